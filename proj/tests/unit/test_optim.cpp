#include "mtm/errors.hpp"
#include "mtm/optim.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace mtm;

TEST_CASE("first AdamW step moves by lr * sign(g) plus decay") {
    std::vector<double> p = {1.0, -2.0, 0.5};
    const std::vector<double> g = {0.3, -4.0, 0.0};
    AdamStateD s(3);
    AdamWOptions o;
    o.lr = 0.1;
    o.weight_decay = 0.01;
    o.eps = 0.0;
    const std::vector<std::uint8_t> mask = {1, 0, 1};
    adamw_step(p, g, s, o, mask);
    CHECK(s.step == 1);
    CHECK(p[0] == doctest::Approx(1.0 - 0.1 - 0.1 * 0.01 * 1.0).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(-2.0 + 0.1).epsilon(1e-15));
    // Zero gradient: 0/0 is avoided only by eps, so use the default.
    std::vector<double> q = {0.5};
    AdamStateD s2(1);
    AdamWOptions o2;
    o2.lr = 0.1;
    o2.weight_decay = 0.01;
    adamw_step(q, std::vector<double>{0.0}, s2, o2);
    CHECK(q[0] == doctest::Approx(0.5 - 0.1 * 0.01 * 0.5).epsilon(1e-15));
}

TEST_CASE("AdamW matches a hand-rolled two-step recursion") {
    std::vector<double> p = {0.7};
    AdamStateD s(1);
    AdamWOptions o;
    o.lr = 0.05;
    o.weight_decay = 0.1;
    double ref = 0.7, m = 0.0, v = 0.0;
    for (int t = 1; t <= 2; ++t) {
        const double g = t == 1 ? 0.2 : -0.5;
        adamw_step(p, std::vector<double>{g}, s, o);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1 - std::pow(0.9, t));
        const double vh = v / (1 - std::pow(0.999, t));
        ref = ref - 0.05 * mh / (std::sqrt(vh) + 1e-8) - 0.05 * 0.1 * ref;
    }
    CHECK(p[0] == doctest::Approx(ref).epsilon(1e-14));
}

TEST_CASE("non-finite gradients raise and leave state untouched") {
    std::vector<float> p = {1.0f, 2.0f};
    AdamState s(2);
    const std::vector<float> g = {0.1f, std::numeric_limits<float>::quiet_NaN()};
    CHECK_THROWS_AS(adamw_step(p, g, s, AdamWOptions{}), TrainingError);
    CHECK(s.step == 0);
    CHECK(p[0] == 1.0f);
    const std::vector<float> inf = {std::numeric_limits<float>::infinity(), 0.0f};
    CHECK_THROWS_AS(adamw_step(p, inf, s, AdamWOptions{}), TrainingError);
    CHECK_THROWS_AS(adamw_step(p, std::vector<float>{0.1f}, s, AdamWOptions{}), ContractViolation);
}
