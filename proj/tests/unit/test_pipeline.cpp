#include "fixtures.hpp"

#include "mtm/errors.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

using namespace mtm;

namespace {

std::vector<GpsPoint> small_points() {
    WorldSpec spec = mtm::test::small_spec();
    spec.n_agents = 20;
    return points_from_traces(simulate_traces(mtm::test::small_world(), spec));
}

}  // namespace

TEST_CASE("check-ins never exceed ten minutes or one cell") {
    const auto points = small_points();
    const GridSpec& grid = mtm::test::small_world().grid();
    const auto checkins = points_to_checkins(points, grid);
    REQUIRE(!checkins.empty());
    std::map<std::string, std::vector<const GpsPoint*>> by_user;
    for (const auto& p : points) {
        by_user[p.user].push_back(&p);
    }
    std::size_t covered = 0;
    for (const CheckIn& c : checkins) {
        CHECK(c.t_end - c.t_start <= kCheckInWindowSeconds);
        CHECK(c.t_start <= c.t_end);
        for (const GpsPoint* p : by_user.at(c.user)) {
            if (p->t >= c.t_start && p->t <= c.t_end) {
                CHECK(latlon_to_cell(p->p, grid) == c.cell);
                ++covered;
            }
        }
    }
    // Every point belongs to exactly one check-in.
    CHECK(covered == points.size());
}

TEST_CASE("check-in clustering on a hand-made sequence") {
    const GridSpec grid(LatLon{35.68, 139.69});
    const LatLon a = cell_to_centroid({0, 0, 8}, grid);
    const LatLon b = cell_to_centroid({1, 0, 8}, grid);
    const std::vector<GpsPoint> pts = {
        {"u", 0, a}, {"u", 300, a}, {"u", 600, a}, {"u", 601, a},  // window closes after 600 s
        {"u", 700, b}, {"u", 800, a},
    };
    const auto c = points_to_checkins(pts, grid);
    REQUIRE(c.size() == 4);
    CHECK(c[0].t_start == 0);
    CHECK(c[0].t_end == 600);
    CHECK(c[1].t_start == 601);
    CHECK(c[2].cell == CellId{1, 0, 8});
    CHECK(c[3].t_start == 800);
}

TEST_CASE("unsorted points are a contract violation") {
    const GridSpec grid(LatLon{35.68, 139.69});
    const LatLon a = cell_to_centroid({0, 0, 8}, grid);
    const std::vector<GpsPoint> pts = {{"u", 100, a}, {"u", 50, a}};
    CHECK_THROWS_AS(points_to_checkins(pts, grid), ContractViolation);
}

TEST_CASE("trajectories group by user and month with salted ids") {
    const auto checkins = points_to_checkins(small_points(), mtm::test::small_world().grid());
    const auto t1 = checkins_to_trajectories(checkins, 1);
    const auto t2 = checkins_to_trajectories(checkins, 2);
    REQUIRE(t1.size() == t2.size());
    std::set<std::string> ids1, ids2;
    for (const auto& t : t1) {
        ids1.insert(t.traj_id);
        CHECK(t.hashes.size() == t.times.size());
        CHECK(std::is_sorted(t.times.begin(), t.times.end()));
        for (Timestamp ts : t.times) {
            CHECK(month_key(ts) == t.month);
        }
    }
    for (const auto& t : t2) {
        ids2.insert(t.traj_id);
    }
    CHECK(ids1.size() == t1.size());
    std::vector<std::string> common;
    std::set_intersection(ids1.begin(), ids1.end(), ids2.begin(), ids2.end(), std::back_inserter(common));
    CHECK(common.empty());
    CHECK(std::is_sorted(t1.begin(), t1.end(), [](const auto& a, const auto& b) { return a.traj_id < b.traj_id; }));
    CHECK(trajectory_id("user", "2023-02", 9) == trajectory_id("user", "2023-02", 9));
    CHECK(trajectory_id("user", "2023-02", 9) != trajectory_id("user", "2023-03", 9));
}

TEST_CASE("filter keeps exactly the trajectories meeting the thresholds") {
    Trajectory t{"a", "2023-02", {}, {}};
    for (int i = 0; i < 10; ++i) {
        t.hashes.push_back(CellId{i % 3, 0, 8}.hash());
        t.times.push_back(i * 1000);
    }
    CHECK(passes_filter(t));
    CHECK(unique_cells(t) == 3);
    Trajectory short_t = t;
    short_t.hashes.pop_back();
    short_t.times.pop_back();
    CHECK_FALSE(passes_filter(short_t));
    Trajectory narrow = t;
    for (auto& h : narrow.hashes) {
        if (h == CellId{2, 0, 8}.hash()) {
            h = CellId{0, 0, 8}.hash();
        }
    }
    CHECK_FALSE(passes_filter(narrow));
    for (const auto& tr : mtm::test::small_corpus()) {
        CHECK(tr.size() >= kMinCheckIns);
        CHECK(unique_cells(tr) >= kMinUniqueCells);
    }
}

TEST_CASE("split is 70/15/15 within one item and disjoint") {
    for (std::size_t n : {3u, 7u, 20u, 101u, 1000u, 2003u}) {
        std::vector<Trajectory> trajs(n);
        for (std::size_t i = 0; i < n; ++i) {
            trajs[i].traj_id = "t" + std::to_string(i);
        }
        const SplitSet s = split_corpus(trajs, 123);
        CHECK(s.pretrain.size() + s.validation.size() + s.test.size() == n);
        CHECK(std::fabs(static_cast<double>(s.pretrain.size()) - 0.70 * static_cast<double>(n)) <= 1.0);
        CHECK(std::fabs(static_cast<double>(s.validation.size()) - 0.15 * static_cast<double>(n)) <= 1.0);
        CHECK(std::fabs(static_cast<double>(s.test.size()) - 0.15 * static_cast<double>(n)) <= 1.0);
        std::set<std::string> all(s.pretrain.begin(), s.pretrain.end());
        all.insert(s.validation.begin(), s.validation.end());
        all.insert(s.test.begin(), s.test.end());
        CHECK(all.size() == n);
        const SplitSet again = split_corpus(trajs, 123);
        CHECK(again.pretrain == s.pretrain);
        CHECK(again.test == s.test);
    }
}

TEST_CASE("too small a corpus cannot be split") {
    std::vector<Trajectory> two(2);
    two[0].traj_id = "a";
    two[1].traj_id = "b";
    CHECK_THROWS_AS(split_corpus(two, 1), ConfigError);
}

TEST_CASE("corpus and split files round-trip") {
    const auto& corpus = mtm::test::small_corpus();
    const std::string dir = mtm::test::temp_dir("corpus");
    write_corpus(corpus, dir + "/corpus.tsv");
    CHECK(read_corpus(dir + "/corpus.tsv") == corpus);
    const SplitSet s = split_corpus(corpus, 5);
    write_split(s, dir + "/split.tsv");
    const SplitSet back = read_split(dir + "/split.tsv");
    CHECK(back.pretrain == s.pretrain);
    CHECK(back.validation == s.validation);
    CHECK(back.test == s.test);
    const auto picked = select(corpus, s.test);
    REQUIRE(picked.size() == s.test.size());
    for (std::size_t i = 0; i < picked.size(); ++i) {
        CHECK(picked[i].traj_id == s.test[i]);
    }
}
