#include "mtm/model.hpp"

#include "mtm/errors.hpp"
#include "mtm/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

namespace mtm {

// ---------------------------------------------------------------------------
// Configuration

ModelConfig ModelConfig::preset(std::string_view name, int vocab_size) {
    ModelConfig c;
    c.vocab_size = vocab_size;
    const auto big = [&c](int layers) {
        c.n_layers = layers;
        c.n_heads = 12;
        c.d_model = 768;
        c.d_ff = 3072;
    };
    const auto desk = [&c](int layers) {
        c.n_layers = layers;
        c.n_heads = 4;
        c.d_model = 128;
        c.d_ff = 512;
    };
    if (name == "desk") {
        desk(4);
    } else if (name == "base") {
        big(12);
    } else if (name == "small") {
        big(3);
    } else if (name == "medium") {
        big(6);
    } else if (name == "large") {
        big(9);
    } else if (name == "desk-small") {
        desk(3);
    } else if (name == "desk-medium") {
        desk(6);
    } else if (name == "desk-large") {
        desk(9);
    } else {
        throw ConfigError("unknown model preset '" + std::string(name) + "'");
    }
    return c;
}

void ModelConfig::validate() const {
    if (n_layers < 1 || n_heads < 1 || d_model < 1 || d_ff < 1 || vocab_size < 1 || max_len < 1) {
        throw ConfigError("model dimensions must all be at least 1");
    }
    if (d_model % n_heads != 0) {
        throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                          std::to_string(n_heads));
    }
    if (max_len > static_cast<int>(kMaxSeqLen)) {
        throw ConfigError("max_len above " + std::to_string(kMaxSeqLen));
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw ConfigError("dropout must be in [0, 1)");
    }
}

void HeadSpec::validate() const {
    if (kind == HeadKind::classification && dim < 2) {
        throw ConfigError("classification head needs at least 2 classes");
    }
    if (kind == HeadKind::regression && dim < 1) {
        throw ConfigError("regression head needs at least 1 output");
    }
    if (kind == HeadKind::none && dim != 0) {
        throw ConfigError("absent head cannot have outputs");
    }
}

std::string to_string(HeadKind kind) {
    switch (kind) {
        case HeadKind::classification:
            return "classification";
        case HeadKind::regression:
            return "regression";
        case HeadKind::none:
            break;
    }
    return "none";
}

HeadKind head_kind_from_string(std::string_view s) {
    if (s == "classification") {
        return HeadKind::classification;
    }
    if (s == "regression") {
        return HeadKind::regression;
    }
    if (s == "none") {
        return HeadKind::none;
    }
    throw ParseError("unknown head kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Layout

std::size_t TensorInfo::size() const {
    std::size_t n = 1;
    for (int d : shape) {
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

namespace {

std::string layer_name(int l, std::string_view suffix) {
    return "layer." + std::to_string(l) + "." + std::string(suffix);
}

}  // namespace

ParamLayout::ParamLayout(const ModelConfig& c, const HeadSpec& head) {
    c.validate();
    head.validate();
    const int d = c.d_model;
    add("embeddings.token", {c.vocab_size, d}, true);
    add("embeddings.position", {c.max_len, d}, true);
    for (int l = 0; l < c.n_layers; ++l) {
        add(layer_name(l, "attention.query"), {d, d}, true);
        add(layer_name(l, "attention.key"), {d, d}, true);
        add(layer_name(l, "attention.value"), {d, d}, true);
        add(layer_name(l, "attention.output"), {d, d}, true);
        add(layer_name(l, "attention.ln.gamma"), {d}, false);
        add(layer_name(l, "attention.ln.beta"), {d}, false);
        add(layer_name(l, "ffn.w1"), {d, c.d_ff}, true);
        add(layer_name(l, "ffn.b1"), {c.d_ff}, false);
        add(layer_name(l, "ffn.w2"), {c.d_ff, d}, true);
        add(layer_name(l, "ffn.b2"), {d}, false);
        add(layer_name(l, "ffn.ln.gamma"), {d}, false);
        add(layer_name(l, "ffn.ln.beta"), {d}, false);
    }
    if (!c.tie_output) {
        add("mlm.weight", {d, c.vocab_size}, true);
    }
    add("mlm.bias", {c.vocab_size}, false);
    if (head.kind != HeadKind::none) {
        add("head.weight", {d, head.dim}, true);
        add("head.bias", {head.dim}, false);
    }
}

void ParamLayout::add(std::string name, std::vector<int> shape, bool decay) {
    TensorInfo t{std::move(name), total_, std::move(shape), decay};
    total_ += t.size();
    tensors_.push_back(std::move(t));
}

const TensorInfo* ParamLayout::find(std::string_view name) const {
    for (const auto& t : tensors_) {
        if (t.name == name) {
            return &t;
        }
    }
    return nullptr;
}

const TensorInfo& ParamLayout::at(std::string_view name) const {
    if (const TensorInfo* t = find(name)) {
        return *t;
    }
    throw DomainError("no parameter tensor named '" + std::string(name) + "'");
}

std::vector<std::uint8_t> ParamLayout::decay_mask() const {
    std::vector<std::uint8_t> mask(total_, 0);
    for (const auto& t : tensors_) {
        std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(t.offset), t.size(), t.decay ? 1 : 0);
    }
    return mask;
}

// ---------------------------------------------------------------------------
// Initialization

namespace {

bool is_gamma(std::string_view name) { return name.ends_with(".gamma"); }
bool is_zero_init(std::string_view name) {
    return name.ends_with(".beta") || name.ends_with("bias") || name.ends_with(".b1") || name.ends_with(".b2");
}

template <typename T>
void init_tensor(const TensorInfo& t, std::span<T> data, Rng& rng) {
    if (is_gamma(t.name)) {
        std::fill(data.begin(), data.end(), T(1));
    } else if (is_zero_init(t.name)) {
        std::fill(data.begin(), data.end(), T(0));
    } else {
        for (T& x : data) {
            x = static_cast<T>(rng.normal(0.0, 0.02));
        }
    }
}

}  // namespace

template <typename T>
ParamSet<T> init_params(const ModelConfig& config, const HeadSpec& head, std::uint64_t seed) {
    ParamSet<T> p{config, head, ParamLayout(config, head), {}};
    p.data.assign(p.layout.total(), T(0));
    Rng rng(derive_seed(seed, "init"));
    for (const auto& t : p.layout.tensors()) {
        init_tensor<T>(t, std::span<T>(p.data.data() + t.offset, t.size()), rng);
    }
    return p;
}

template <typename T>
ParamSet<T> with_head(const ParamSet<T>& params, const HeadSpec& head, std::uint64_t seed) {
    ParamSet<T> p{params.config, head, ParamLayout(params.config, head), {}};
    p.data.assign(p.layout.total(), T(0));
    Rng rng(derive_seed(seed, "head"));
    for (const auto& t : p.layout.tensors()) {
        std::span<T> dst(p.data.data() + t.offset, t.size());
        if (t.name.starts_with("head.")) {
            init_tensor<T>(t, dst, rng);
            continue;
        }
        const TensorInfo& src = params.layout.at(t.name);
        std::copy_n(params.data.begin() + static_cast<std::ptrdiff_t>(src.offset), t.size(), dst.begin());
    }
    return p;
}

template <typename To, typename From>
ParamSet<To> cast_params(const ParamSet<From>& params) {
    ParamSet<To> p{params.config, params.head, params.layout, {}};
    p.data.resize(params.data.size());
    std::transform(params.data.begin(), params.data.end(), p.data.begin(),
                   [](From x) { return static_cast<To>(x); });
    return p;
}

// ---------------------------------------------------------------------------
// Kernels

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ColVec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using CMap = Eigen::Map<const Mat<T>>;
template <typename T>
using MMap = Eigen::Map<Mat<T>>;
template <typename T>
using CRowMap = Eigen::Map<const RowVec<T>>;
template <typename T>
using MRowMap = Eigen::Map<RowVec<T>>;
// Eigen peels unaligned heads off vectorized reductions, so the summation
// order of a Map depends on its address. Parameters and gradients live in
// max-aligned storage to keep results independent of heap placement.
template <typename T>
using AlignedBuf = std::vector<T, Eigen::aligned_allocator<T>>;

constexpr double kLayerNormEps = 1e-12;

template <typename P>
struct LayerPtrs {
    P wq, wk, wv, wo, ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b;
};

template <typename P>
struct Ptrs {
    P tok = nullptr;
    P pos = nullptr;
    std::vector<LayerPtrs<P>> layers;
    P mlm_w = nullptr;  // null when tied
    P mlm_b = nullptr;
    P head_w = nullptr;
    P head_b = nullptr;
};

template <typename P>
Ptrs<P> bind(const ParamLayout& layout, const ModelConfig& c, const HeadSpec& head, P base) {
    const auto at = [&](std::string_view name) { return base + layout.at(name).offset; };
    Ptrs<P> p;
    p.tok = at("embeddings.token");
    p.pos = at("embeddings.position");
    for (int l = 0; l < c.n_layers; ++l) {
        p.layers.push_back({at(layer_name(l, "attention.query")), at(layer_name(l, "attention.key")),
                            at(layer_name(l, "attention.value")), at(layer_name(l, "attention.output")),
                            at(layer_name(l, "attention.ln.gamma")), at(layer_name(l, "attention.ln.beta")),
                            at(layer_name(l, "ffn.w1")), at(layer_name(l, "ffn.b1")), at(layer_name(l, "ffn.w2")),
                            at(layer_name(l, "ffn.b2")), at(layer_name(l, "ffn.ln.gamma")),
                            at(layer_name(l, "ffn.ln.beta"))});
    }
    if (!c.tie_output) {
        p.mlm_w = at("mlm.weight");
    }
    p.mlm_b = at("mlm.bias");
    if (head.kind != HeadKind::none) {
        p.head_w = at("head.weight");
        p.head_b = at("head.bias");
    }
    return p;
}

template <typename T>
struct LayerCache {
    Mat<T> x_in;
    Mat<T> q, k, v;
    std::vector<Mat<T>> probs;  // per head, T x T
    Mat<T> ctx;
    Mat<T> drop_attn;
    Mat<T> xhat1;
    ColVec<T> rstd1;
    Mat<T> h1;
    Mat<T> f1;
    Mat<T> g;
    Mat<T> drop_ffn;
    Mat<T> xhat2;
    ColVec<T> rstd2;
};

template <typename T>
struct ExampleCache {
    std::vector<int> ids;
    std::vector<std::uint8_t> key_valid;
    Mat<T> drop_emb;
    std::vector<LayerCache<T>> layers;
    Mat<T> out;  // final hidden states, T x d
};

template <typename T>
Mat<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
    Mat<T> m(rows, cols);
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = rng.uniform() < rate ? T(0) : scale;
    }
    return m;
}

template <typename T>
void layer_norm(const Mat<T>& z, const T* gamma, const T* beta, Mat<T>& xhat, ColVec<T>& rstd, Mat<T>& y) {
    const Eigen::Index n = z.rows();
    const Eigen::Index d = z.cols();
    xhat.resize(n, d);
    rstd.resize(n);
    y.resize(n, d);
    CRowMap<T> g(gamma, d);
    CRowMap<T> b(beta, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const T mean = z.row(i).mean();
        const T var = (z.row(i).array() - mean).square().mean();
        const T r = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
        rstd(i) = r;
        xhat.row(i) = (z.row(i).array() - mean) * r;
        y.row(i) = xhat.row(i).cwiseProduct(g) + b;
    }
}

/// Returns dz given dy; accumulates dgamma/dbeta.
template <typename T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const Mat<T>& xhat, const ColVec<T>& rstd, const T* gamma,
                           T* dgamma, T* dbeta) {
    const Eigen::Index n = dy.rows();
    const Eigen::Index d = dy.cols();
    CRowMap<T> g(gamma, d);
    MRowMap<T> dg(dgamma, d);
    MRowMap<T> db(dbeta, d);
    dg += dy.cwiseProduct(xhat).colwise().sum();
    db += dy.colwise().sum();
    Mat<T> dz(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const RowVec<T> dxhat = dy.row(i).cwiseProduct(g);
        const T m1 = dxhat.mean();
        const T m2 = dxhat.cwiseProduct(xhat.row(i)).mean();
        dz.row(i) = rstd(i) * (dxhat.array() - m1 - xhat.row(i).array() * m2).matrix();
    }
    return dz;
}

template <typename T>
T gelu(T x) {
    return T(0.5) * x * (T(1) + std::erf(x * static_cast<T>(std::numbers::sqrt2 / 2.0)));
}

template <typename T>
T gelu_grad(T x) {
    const T cdf = T(0.5) * (T(1) + std::erf(x * static_cast<T>(std::numbers::sqrt2 / 2.0)));
    const T pdf = std::exp(T(-0.5) * x * x) * static_cast<T>(std::numbers::inv_sqrtpi / std::numbers::sqrt2);
    return cdf + x * pdf;
}

/// Softmax of a row vector in place; returns log-sum-exp.
template <typename Row>
double softmax_row(Row&& row) {
    using T = typename std::decay_t<Row>::Scalar;
    const T mx = row.maxCoeff();
    row = (row.array() - mx).exp();
    const T sum = row.sum();
    row /= sum;
    return static_cast<double>(mx) + std::log(static_cast<double>(sum));
}

template <typename T>
class Encoder {
public:
    Encoder(const ParamSet<T>& params)
        : c_(params.config),
          head_(params.head),
          store_(params.data.begin(), params.data.end()),
          p_(bind<const T*>(params.layout, params.config, params.head, store_.data())) {}
    Encoder(const Encoder&) = delete;
    Encoder& operator=(const Encoder&) = delete;

    /// Runs the encoder over ids[0..n) with the given key validity.
    void run(std::span<const int> ids, std::span<const std::uint8_t> key_valid, Rng* dropout_rng,
             ExampleCache<T>& cache) const {
        const auto n = static_cast<Eigen::Index>(ids.size());
        const Eigen::Index d = c_.d_model;
        if (n > c_.max_len) {
            throw ContractViolation("sequence of " + std::to_string(n) + " tokens exceeds max_len " +
                                    std::to_string(c_.max_len));
        }
        cache.ids.assign(ids.begin(), ids.end());
        cache.key_valid.assign(key_valid.begin(), key_valid.end());
        const double rate = dropout_rng ? c_.dropout : 0.0;
        const bool drop = rate > 0.0;

        Mat<T> x(n, d);
        CMap<T> tok(p_.tok, c_.vocab_size, d);
        CMap<T> pos(p_.pos, c_.max_len, d);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int id = ids[static_cast<std::size_t>(i)];
            if (id < 0 || id >= c_.vocab_size) {
                throw DomainError("token id " + std::to_string(id) + " outside vocabulary of " +
                                  std::to_string(c_.vocab_size));
            }
            x.row(i) = tok.row(id) + pos.row(i);
        }
        if (drop) {
            cache.drop_emb = dropout_mask<T>(n, d, rate, *dropout_rng);
            x = x.cwiseProduct(cache.drop_emb);
        } else {
            cache.drop_emb.resize(0, 0);
        }

        const int heads = c_.n_heads;
        const Eigen::Index dh = c_.head_dim();
        const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
        const T neg_inf = -std::numeric_limits<T>::infinity();
        cache.layers.resize(static_cast<std::size_t>(c_.n_layers));
        for (int l = 0; l < c_.n_layers; ++l) {
            const LayerPtrs<const T*>& w = p_.layers[static_cast<std::size_t>(l)];
            LayerCache<T>& lc = cache.layers[static_cast<std::size_t>(l)];
            lc.x_in = std::move(x);
            lc.q.noalias() = lc.x_in * CMap<T>(w.wq, d, d);
            lc.k.noalias() = lc.x_in * CMap<T>(w.wk, d, d);
            lc.v.noalias() = lc.x_in * CMap<T>(w.wv, d, d);
            lc.ctx.resize(n, d);
            lc.probs.resize(static_cast<std::size_t>(heads));
            for (int h = 0; h < heads; ++h) {
                Mat<T>& pr = lc.probs[static_cast<std::size_t>(h)];
                pr.noalias() = lc.q.middleCols(h * dh, dh) * lc.k.middleCols(h * dh, dh).transpose();
                pr *= scale;
                for (Eigen::Index j = 0; j < n; ++j) {
                    if (!key_valid[static_cast<std::size_t>(j)]) {
                        pr.col(j).setConstant(neg_inf);
                    }
                }
                for (Eigen::Index i = 0; i < n; ++i) {
                    softmax_row(pr.row(i));
                }
                lc.ctx.middleCols(h * dh, dh).noalias() = pr * lc.v.middleCols(h * dh, dh);
            }
            Mat<T> o;
            o.noalias() = lc.ctx * CMap<T>(w.wo, d, d);
            if (drop) {
                lc.drop_attn = dropout_mask<T>(n, d, rate, *dropout_rng);
                o = o.cwiseProduct(lc.drop_attn);
            } else {
                lc.drop_attn.resize(0, 0);
            }
            Mat<T> z1 = lc.x_in + o;
            layer_norm(z1, w.ln1_g, w.ln1_b, lc.xhat1, lc.rstd1, lc.h1);

            lc.f1.noalias() = lc.h1 * CMap<T>(w.w1, d, c_.d_ff);
            lc.f1.rowwise() += CRowMap<T>(w.b1, c_.d_ff);
            lc.g = lc.f1.unaryExpr([](T v) { return gelu(v); });
            Mat<T> f2;
            f2.noalias() = lc.g * CMap<T>(w.w2, c_.d_ff, d);
            f2.rowwise() += CRowMap<T>(w.b2, d);
            if (drop) {
                lc.drop_ffn = dropout_mask<T>(n, d, rate, *dropout_rng);
                f2 = f2.cwiseProduct(lc.drop_ffn);
            } else {
                lc.drop_ffn.resize(0, 0);
            }
            Mat<T> z2 = lc.h1 + f2;
            layer_norm(z2, w.ln2_g, w.ln2_b, lc.xhat2, lc.rstd2, x);
        }
        cache.out = std::move(x);
    }

    /// Backpropagates d(loss)/d(out) through the encoder into `g`.
    void backward(const ExampleCache<T>& cache, Mat<T> dx, const Ptrs<T*>& g) const {
        const Eigen::Index n = dx.rows();
        const Eigen::Index d = c_.d_model;
        const int heads = c_.n_heads;
        const Eigen::Index dh = c_.head_dim();
        const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
        for (int l = c_.n_layers - 1; l >= 0; --l) {
            const LayerPtrs<const T*>& w = p_.layers[static_cast<std::size_t>(l)];
            const LayerPtrs<T*>& gw = g.layers[static_cast<std::size_t>(l)];
            const LayerCache<T>& lc = cache.layers[static_cast<std::size_t>(l)];

            Mat<T> dz2 = layer_norm_backward(dx, lc.xhat2, lc.rstd2, w.ln2_g, gw.ln2_g, gw.ln2_b);
            Mat<T> dh1 = dz2;
            Mat<T> df2 = lc.drop_ffn.size() ? Mat<T>(dz2.cwiseProduct(lc.drop_ffn)) : std::move(dz2);
            MMap<T>(gw.w2, c_.d_ff, d).noalias() += lc.g.transpose() * df2;
            MRowMap<T>(gw.b2, d) += df2.colwise().sum();
            Mat<T> dg;
            dg.noalias() = df2 * CMap<T>(w.w2, c_.d_ff, d).transpose();
            Mat<T> df1 = dg.cwiseProduct(lc.f1.unaryExpr([](T v) { return gelu_grad(v); }));
            MMap<T>(gw.w1, d, c_.d_ff).noalias() += lc.h1.transpose() * df1;
            MRowMap<T>(gw.b1, c_.d_ff) += df1.colwise().sum();
            dh1.noalias() += df1 * CMap<T>(w.w1, d, c_.d_ff).transpose();

            Mat<T> dz1 = layer_norm_backward(dh1, lc.xhat1, lc.rstd1, w.ln1_g, gw.ln1_g, gw.ln1_b);
            Mat<T> dxin = dz1;
            Mat<T> d_o = lc.drop_attn.size() ? Mat<T>(dz1.cwiseProduct(lc.drop_attn)) : std::move(dz1);
            MMap<T>(gw.wo, d, d).noalias() += lc.ctx.transpose() * d_o;
            Mat<T> dctx;
            dctx.noalias() = d_o * CMap<T>(w.wo, d, d).transpose();

            Mat<T> dq(n, d), dk(n, d), dv(n, d);
            for (int h = 0; h < heads; ++h) {
                const Mat<T>& pr = lc.probs[static_cast<std::size_t>(h)];
                const auto dctx_h = dctx.middleCols(h * dh, dh);
                Mat<T> dp;
                dp.noalias() = dctx_h * lc.v.middleCols(h * dh, dh).transpose();
                dv.middleCols(h * dh, dh).noalias() = pr.transpose() * dctx_h;
                const ColVec<T> rowdot = dp.cwiseProduct(pr).rowwise().sum();
                Mat<T> ds = pr.cwiseProduct(dp.colwise() - rowdot);
                ds *= scale;
                dq.middleCols(h * dh, dh).noalias() = ds * lc.k.middleCols(h * dh, dh);
                dk.middleCols(h * dh, dh).noalias() = ds.transpose() * lc.q.middleCols(h * dh, dh);
            }
            MMap<T>(gw.wq, d, d).noalias() += lc.x_in.transpose() * dq;
            MMap<T>(gw.wk, d, d).noalias() += lc.x_in.transpose() * dk;
            MMap<T>(gw.wv, d, d).noalias() += lc.x_in.transpose() * dv;
            dxin.noalias() += dq * CMap<T>(w.wq, d, d).transpose();
            dxin.noalias() += dk * CMap<T>(w.wk, d, d).transpose();
            dxin.noalias() += dv * CMap<T>(w.wv, d, d).transpose();
            dx = std::move(dxin);
        }
        if (cache.drop_emb.size()) {
            dx = dx.cwiseProduct(cache.drop_emb);
        }
        MMap<T> gtok(g.tok, c_.vocab_size, d);
        MMap<T> gpos(g.pos, c_.max_len, d);
        for (Eigen::Index i = 0; i < n; ++i) {
            gtok.row(cache.ids[static_cast<std::size_t>(i)]) += dx.row(i);
            gpos.row(i) += dx.row(i);
        }
    }

    /// Output-projection logits for the given hidden rows (m x V).
    Mat<T> mlm_logits(const Mat<T>& hidden) const {
        Mat<T> z;
        if (p_.mlm_w) {
            z.noalias() = hidden * CMap<T>(p_.mlm_w, c_.d_model, c_.vocab_size);
        } else {
            z.noalias() = hidden * CMap<T>(p_.tok, c_.vocab_size, c_.d_model).transpose();
        }
        z.rowwise() += CRowMap<T>(p_.mlm_b, c_.vocab_size);
        return z;
    }

    /// dlogits -> accumulates projection grads, returns dhidden.
    Mat<T> mlm_backward(const Mat<T>& hidden, const Mat<T>& dz, const Ptrs<T*>& g) const {
        MRowMap<T>(g.mlm_b, c_.vocab_size) += dz.colwise().sum();
        Mat<T> dh;
        if (p_.mlm_w) {
            MMap<T>(g.mlm_w, c_.d_model, c_.vocab_size).noalias() += hidden.transpose() * dz;
            dh.noalias() = dz * CMap<T>(p_.mlm_w, c_.d_model, c_.vocab_size).transpose();
        } else {
            MMap<T>(g.tok, c_.vocab_size, c_.d_model).noalias() += dz.transpose() * hidden;
            dh.noalias() = dz * CMap<T>(p_.tok, c_.vocab_size, c_.d_model);
        }
        return dh;
    }

    RowVec<T> head_out(const RowVec<T>& pooled) const {
        if (!p_.head_w) {
            throw ContractViolation("model has no task head");
        }
        RowVec<T> y = pooled * CMap<T>(p_.head_w, c_.d_model, head_.dim);
        y += CRowMap<T>(p_.head_b, head_.dim);
        return y;
    }

    RowVec<T> head_backward(const RowVec<T>& pooled, const RowVec<T>& dy, const Ptrs<T*>& g) const {
        MMap<T>(g.head_w, c_.d_model, head_.dim).noalias() += pooled.transpose() * dy;
        MRowMap<T>(g.head_b, head_.dim) += dy;
        return dy * CMap<T>(p_.head_w, c_.d_model, head_.dim).transpose();
    }

private:
    const ModelConfig& c_;
    const HeadSpec& head_;
    AlignedBuf<T> store_;
    Ptrs<const T*> p_;
};

std::vector<std::uint8_t> key_validity(const Encoding& e, std::size_t n) {
    std::vector<std::uint8_t> v(n, 1);
    for (std::size_t i = 0; i < n && i < e.attention_mask.size(); ++i) {
        v[i] = e.attention_mask[i] != 0;
    }
    return v;
}

void check_targets(const HeadSpec& head, const HeadTargets& t, std::size_t batch) {
    if (head.kind == HeadKind::classification) {
        if (t.classes.size() != batch) {
            throw ContractViolation("classification targets must have one class per example");
        }
        for (int y : t.classes) {
            if (y < 0 || y >= head.dim) {
                throw DomainError("class label " + std::to_string(y) + " outside [0, " + std::to_string(head.dim) +
                                  ")");
            }
        }
    } else if (head.kind == HeadKind::regression) {
        if (t.values.size() != batch * static_cast<std::size_t>(head.dim)) {
            throw ContractViolation("regression targets must be batch x dim");
        }
    } else {
        throw ContractViolation("head objective on a model without a head");
    }
}

std::size_t count_masked(std::span<const Encoding> batch) {
    std::size_t m = 0;
    for (const Encoding& e : batch) {
        for (int y : e.labels) {
            m += y != kIgnoreLabel;
        }
    }
    return m;
}

/// Shared implementation of loss_and_grad / compute_loss. `grads` may be null.
template <typename T>
double run_objective(const ParamSet<T>& params, std::span<const Encoding> batch, Objective objective,
                     const HeadTargets& targets, T* grads, const StepOptions& opts) {
    if (batch.empty()) {
        throw ContractViolation("empty batch");
    }
    const Encoder<T> enc(params);
    const ModelConfig& c = params.config;
    std::optional<Ptrs<T*>> g;
    AlignedBuf<T> scratch;
    if (grads) {
        scratch.assign(params.data.size(), T(0));
        g = bind<T*>(params.layout, c, params.head, scratch.data());
    }
    std::size_t n_masked = 0;
    if (objective == Objective::mlm) {
        n_masked = count_masked(batch);
        if (n_masked == 0) {
            throw ContractViolation("batch has no masked positions");
        }
    } else {
        check_targets(params.head, targets, batch.size());
    }
    const double bsz = static_cast<double>(batch.size());
    double loss = 0.0;
    ExampleCache<T> cache;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const Encoding& e = batch[b];
        const std::size_t n = e.content_length();
        std::optional<Rng> rng;
        if (opts.training && c.dropout > 0.0) {
            rng.emplace(derive_seed(opts.dropout_seed, b));
        }
        enc.run(std::span<const int>(e.ids.data(), n), key_validity(e, n), rng ? &*rng : nullptr, cache);
        const Eigen::Index d = c.d_model;
        Mat<T> dout;
        if (g) {
            dout = Mat<T>::Zero(static_cast<Eigen::Index>(n), d);
        }
        if (objective == Objective::mlm) {
            std::vector<Eigen::Index> rows;
            std::vector<int> ys;
            for (std::size_t i = 0; i < n; ++i) {
                if (e.labels[i] != kIgnoreLabel) {
                    rows.push_back(static_cast<Eigen::Index>(i));
                    ys.push_back(e.labels[i]);
                }
            }
            if (rows.empty()) {
                continue;
            }
            Mat<T> hidden(static_cast<Eigen::Index>(rows.size()), d);
            for (std::size_t r = 0; r < rows.size(); ++r) {
                hidden.row(static_cast<Eigen::Index>(r)) = cache.out.row(rows[r]);
            }
            Mat<T> z = enc.mlm_logits(hidden);
            const T inv_m = static_cast<T>(1.0 / static_cast<double>(n_masked));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                const auto ri = static_cast<Eigen::Index>(r);
                const int y = ys[r];
                if (y < 0 || y >= c.vocab_size) {
                    throw DomainError("label id " + std::to_string(y) + " outside vocabulary");
                }
                const double z_y = static_cast<double>(z(ri, y));
                const double lse = softmax_row(z.row(ri));
                loss += lse - z_y;
                z(ri, y) -= T(1);
                z.row(ri) *= inv_m;
            }
            if (g) {
                const Mat<T> dh = enc.mlm_backward(hidden, z, *g);
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    dout.row(rows[r]) += dh.row(static_cast<Eigen::Index>(r));
                }
            }
        } else {
            const RowVec<T> pooled = cache.out.row(0);
            RowVec<T> y = enc.head_out(pooled);
            RowVec<T> dy(y.size());
            if (params.head.kind == HeadKind::classification) {
                const int cls = targets.classes[b];
                const double z_y = static_cast<double>(y(cls));
                const double lse = softmax_row(y);
                loss += (lse - z_y) / bsz;
                dy = y;
                dy(cls) -= T(1);
                dy /= static_cast<T>(bsz);
            } else {
                const double denom = bsz * params.head.dim;
                for (int j = 0; j < params.head.dim; ++j) {
                    const double diff = static_cast<double>(y(j)) -
                                        targets.values[b * static_cast<std::size_t>(params.head.dim) +
                                                       static_cast<std::size_t>(j)];
                    loss += diff * diff / denom;
                    dy(j) = static_cast<T>(2.0 * diff / denom);
                }
            }
            if (g) {
                dout.row(0) = enc.head_backward(pooled, dy, *g);
            }
        }
        if (g) {
            enc.backward(cache, std::move(dout), *g);
        }
    }
    if (objective == Objective::mlm) {
        loss /= static_cast<double>(n_masked);
    }
    for (std::size_t i = 0; i < scratch.size(); ++i) {
        grads[i] += scratch[i];
    }
    return loss;
}

void check_batch_shape(std::span<const Encoding> batch) {
    for (const Encoding& e : batch) {
        if (e.ids.size() != batch.front().ids.size() || e.attention_mask.size() != e.ids.size()) {
            throw ContractViolation("batch encodings must be padded to a common length");
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Public entry points

template <typename T>
ForwardOutput forward(const ParamSet<T>& params, std::span<const Encoding> batch) {
    check_batch_shape(batch);
    const Encoder<T> enc(params);
    const ModelConfig& c = params.config;
    ForwardOutput out;
    out.batch = batch.size();
    out.seq_len = batch.empty() ? 0 : batch.front().ids.size();
    const std::size_t n = out.seq_len;
    const auto v = static_cast<std::size_t>(c.vocab_size);
    const auto d = static_cast<std::size_t>(c.d_model);
    out.mlm_logits.reserve(out.batch * n * v);
    out.pooled.reserve(out.batch * d);
    out.attention0.reserve(out.batch * n * n);
    ExampleCache<T> cache;
    for (const Encoding& e : batch) {
        enc.run(e.ids, key_validity(e, n), nullptr, cache);
        const Mat<T> z = enc.mlm_logits(cache.out);
        out.mlm_logits.insert(out.mlm_logits.end(), z.data(), z.data() + z.size());
        out.pooled.insert(out.pooled.end(), cache.out.row(0).data(), cache.out.row(0).data() + d);
        const Mat<T>& a0 = cache.layers.front().probs.front();
        out.attention0.insert(out.attention0.end(), a0.data(), a0.data() + a0.size());
        if (params.head.kind != HeadKind::none) {
            const RowVec<T> y = enc.head_out(cache.out.row(0));
            out.head.insert(out.head.end(), y.data(), y.data() + y.size());
        }
    }
    return out;
}

double mlm_loss(std::span<const double> logits, std::span<const int> labels, std::size_t vocab) {
    if (vocab == 0 || logits.size() != labels.size() * vocab) {
        throw ContractViolation("logits must be positions x vocab");
    }
    double sum = 0.0;
    std::size_t m = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == kIgnoreLabel) {
            continue;
        }
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= vocab) {
            throw DomainError("label id outside vocabulary");
        }
        const double* row = logits.data() + i * vocab;
        const double mx = *std::max_element(row, row + vocab);
        double s = 0.0;
        for (std::size_t j = 0; j < vocab; ++j) {
            s += std::exp(row[j] - mx);
        }
        sum += mx + std::log(s) - row[labels[i]];
        ++m;
    }
    if (m == 0) {
        throw ContractViolation("no masked positions");
    }
    return sum / static_cast<double>(m);
}

double head_loss(std::span<const double> outputs, const HeadSpec& head, const HeadTargets& targets) {
    if (head.kind == HeadKind::none || head.dim < 1 || outputs.size() % static_cast<std::size_t>(head.dim) != 0) {
        throw ContractViolation("outputs do not match the head");
    }
    const std::size_t batch = outputs.size() / static_cast<std::size_t>(head.dim);
    if (head.kind == HeadKind::classification && (!targets.values.empty() || targets.classes.size() != batch)) {
        throw ContractViolation("classification head needs class targets");
    }
    if (head.kind == HeadKind::regression && (!targets.classes.empty() || targets.values.size() != outputs.size())) {
        throw ContractViolation("regression head needs real-valued targets");
    }
    if (batch == 0) {
        throw ContractViolation("empty batch");
    }
    double sum = 0.0;
    if (head.kind == HeadKind::classification) {
        std::vector<int> labels(targets.classes);
        return mlm_loss(outputs, labels, static_cast<std::size_t>(head.dim));
    }
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        const double e = outputs[i] - targets.values[i];
        sum += e * e;
    }
    return sum / static_cast<double>(outputs.size());
}

template <typename T>
double loss_and_grad(const ParamSet<T>& params, std::span<const Encoding> batch, Objective objective,
                     const HeadTargets& targets, std::span<T> grads, const StepOptions& opts) {
    if (grads.size() != params.data.size()) {
        throw ContractViolation("gradient buffer does not match the parameter layout");
    }
    return run_objective(params, batch, objective, targets, grads.data(), opts);
}

template <typename T>
double compute_loss(const ParamSet<T>& params, std::span<const Encoding> batch, Objective objective,
                    const HeadTargets& targets, const StepOptions& opts) {
    return run_objective<T>(params, batch, objective, targets, nullptr, opts);
}

template <typename T>
std::pair<double, std::size_t> mlm_loss_sum(const ParamSet<T>& params, std::span<const Encoding> batch) {
    const std::size_t m = count_masked(batch);
    if (m == 0) {
        return {0.0, 0};
    }
    const double mean = run_objective<T>(params, batch, Objective::mlm, {}, nullptr, {false, 0});
    return {mean * static_cast<double>(m), m};
}

template <typename T>
std::vector<std::vector<double>> predict_head(const ParamSet<T>& params, std::span<const Encoding> batch) {
    const Encoder<T> enc(params);
    std::vector<std::vector<double>> out;
    out.reserve(batch.size());
    ExampleCache<T> cache;
    for (const Encoding& e : batch) {
        const std::size_t n = e.content_length();
        enc.run(std::span<const int>(e.ids.data(), n), key_validity(e, n), nullptr, cache);
        const RowVec<T> y = enc.head_out(cache.out.row(0));
        out.emplace_back(y.data(), y.data() + y.size());
    }
    return out;
}

#define MTM_INSTANTIATE(T)                                                                                   \
    template ParamSet<T> init_params<T>(const ModelConfig&, const HeadSpec&, std::uint64_t);                \
    template ParamSet<T> with_head<T>(const ParamSet<T>&, const HeadSpec&, std::uint64_t);                  \
    template ForwardOutput forward<T>(const ParamSet<T>&, std::span<const Encoding>);                       \
    template double loss_and_grad<T>(const ParamSet<T>&, std::span<const Encoding>, Objective,             \
                                     const HeadTargets&, std::span<T>, const StepOptions&);                 \
    template double compute_loss<T>(const ParamSet<T>&, std::span<const Encoding>, Objective,              \
                                    const HeadTargets&, const StepOptions&);                                \
    template std::pair<double, std::size_t> mlm_loss_sum<T>(const ParamSet<T>&, std::span<const Encoding>); \
    template std::vector<std::vector<double>> predict_head<T>(const ParamSet<T>&, std::span<const Encoding>);

MTM_INSTANTIATE(float)
MTM_INSTANTIATE(double)
#undef MTM_INSTANTIATE

template ParamSet<double> cast_params<double, float>(const ParamSet<float>&);
template ParamSet<float> cast_params<float, double>(const ParamSet<double>&);

}  // namespace mtm
