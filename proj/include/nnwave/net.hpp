#ifndef NNWAVE_NET_HPP
#define NNWAVE_NET_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "nnwave/errors.hpp"

namespace nnwave::net {

// Dense/convolutional network engine with reverse-mode gradients, written
// against Eigen dense types templated on the scalar. Activations flow as
// (batch x channels*length) matrices in channel-major column layout: column
// c*length + x holds channel c at position x. Dense stages use length == 1.

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

enum class LayerKind { dense, conv1d, batch_norm, dropout, relu, flatten, output };
enum class SkipMode { add, concat };

inline const char* kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv1d: return "conv1d";
        case LayerKind::batch_norm: return "batch_norm";
        case LayerKind::dropout: return "dropout";
        case LayerKind::relu: return "relu";
        case LayerKind::flatten: return "flatten";
        case LayerKind::output: return "output";
    }
    return "?";
}

struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    int in = 0;        // dense/output: input width; conv1d: input channels
    int out = 0;       // dense/output: output width; conv1d: output channels
    int kernel = 3;    // conv1d, odd (same padding)
    double rate = 0;   // dropout

    static LayerSpec dense(int in, int out) { return {LayerKind::dense, in, out}; }
    static LayerSpec conv1d(int in, int out, int kernel = 3) {
        return {LayerKind::conv1d, in, out, kernel};
    }
    static LayerSpec batch_norm(int channels) { return {LayerKind::batch_norm, channels, channels}; }
    static LayerSpec dropout(double rate) { return {LayerKind::dropout, 0, 0, 3, rate}; }
    static LayerSpec relu() { return {LayerKind::relu}; }
    static LayerSpec flatten() { return {LayerKind::flatten}; }
    static LayerSpec output(int in, int out) { return {LayerKind::output, in, out}; }
};

// A skip taps the output of layer `from` (0 = the network input) and merges
// it into the input of layer `to`. Additive skips require matching shapes
// unless `projected` declares a learnable 1x1 channel projection; concat
// skips append channels and widen the receiving layer.
struct SkipSpec {
    int from = 0;
    int to = 1;
    SkipMode mode = SkipMode::add;
    bool projected = false;
};

struct Shape {
    int channels = 0;
    int length = 1;
    int flat() const { return channels * length; }
    bool operator==(const Shape&) const = default;
};

struct NetworkSpec {
    std::string profile;  // "small", "paper", or free-form for tests
    int input_dim = 0;
    int output_dim = 0;
    // > 0: the input is a (input_channels x input_dim/input_channels)
    // sequence; 0: a flat feature vector.
    int input_channels = 0;
    std::vector<LayerSpec> layers;
    std::vector<SkipSpec> skips;
};

// Static shape inference; element i is the output shape of layer i (element
// 0 is the network input). Throws ValidationError on any inconsistency.
// proj_shapes, when given, receives per-skip projection dimensions
// (rows = destination channels, cols = source channels; 0x0 if unprojected).
inline std::vector<Shape> infer_shapes(const NetworkSpec& spec,
                                       std::vector<std::pair<int, int>>* proj_shapes = nullptr) {
    const int n_layers = static_cast<int>(spec.layers.size());
    if (n_layers == 0) throw ValidationError("network has no layers");
    if (spec.input_dim <= 0 || spec.output_dim <= 0)
        throw ValidationError("input_dim and output_dim must be positive");
    for (int i = 0; i < n_layers - 1; ++i)
        if (spec.layers[i].kind == LayerKind::output)
            throw ValidationError("output layer must be last");
    if (spec.layers.back().kind != LayerKind::output)
        throw ValidationError("last layer must be the linear output layer");
    if (spec.layers.back().out != spec.output_dim)
        throw ValidationError("output layer width must equal output_dim");

    if (proj_shapes) proj_shapes->assign(spec.skips.size(), {0, 0});
    for (size_t k = 0; k < spec.skips.size(); ++k) {
        const auto& s = spec.skips[k];
        if (s.from < 0 || s.to < 1 || s.to > n_layers || s.from >= s.to)
            throw ValidationError("skip endpoints must satisfy 0 <= from < to <= layer count");
        if (s.projected && s.mode != SkipMode::add)
            throw ValidationError("projections apply to additive skips only");
    }

    std::vector<Shape> shapes(n_layers + 1);
    if (spec.input_channels > 0) {
        if (spec.input_dim % spec.input_channels != 0)
            throw ValidationError("input_dim not divisible by input_channels");
        shapes[0] = {spec.input_channels, spec.input_dim / spec.input_channels};
    } else {
        shapes[0] = {spec.input_dim, 1};
    }

    for (int i = 1; i <= n_layers; ++i) {
        Shape in = shapes[i - 1];
        for (size_t k = 0; k < spec.skips.size(); ++k) {
            const auto& s = spec.skips[k];
            if (s.to != i) continue;
            const Shape src = shapes[s.from];
            if (src.length != in.length)
                throw ValidationError("skip into layer " + std::to_string(i) +
                                      ": sequence lengths differ");
            if (s.mode == SkipMode::concat) {
                in.channels += src.channels;
            } else if (s.projected) {
                if (proj_shapes) (*proj_shapes)[k] = {in.channels, src.channels};
            } else if (src.channels != in.channels) {
                throw ValidationError("additive skip into layer " + std::to_string(i) +
                                      ": channel widths differ and no projection declared");
            }
        }
        const LayerSpec& L = spec.layers[i - 1];
        const std::string where = "layer " + std::to_string(i) + " (" + kind_name(L.kind) + ")";
        switch (L.kind) {
            case LayerKind::dense:
            case LayerKind::output:
                if (in.length != 1)
                    throw ValidationError(where + ": expects a flat input (add a flatten layer)");
                if (in.channels != L.in)
                    throw ValidationError(where + ": declared width " + std::to_string(L.in) +
                                          " but incoming width is " + std::to_string(in.channels));
                if (L.out <= 0) throw ValidationError(where + ": output width must be positive");
                shapes[i] = {L.out, 1};
                break;
            case LayerKind::conv1d:
                if (L.kernel < 1 || L.kernel % 2 == 0)
                    throw ValidationError(where + ": kernel must be odd");
                if (in.channels != L.in)
                    throw ValidationError(where + ": declared " + std::to_string(L.in) +
                                          " input channels but incoming has " +
                                          std::to_string(in.channels));
                if (L.out <= 0) throw ValidationError(where + ": output channels must be positive");
                shapes[i] = {L.out, in.length};
                break;
            case LayerKind::batch_norm:
                if (in.channels != L.in)
                    throw ValidationError(where + ": channel count mismatch");
                shapes[i] = in;
                break;
            case LayerKind::dropout:
                if (L.rate < 0 || L.rate >= 1)
                    throw ValidationError(where + ": rate must lie in [0, 1)");
                shapes[i] = in;
                break;
            case LayerKind::relu:
                shapes[i] = in;
                break;
            case LayerKind::flatten:
                shapes[i] = {in.flat(), 1};
                break;
        }
    }
    if (shapes[n_layers].flat() != spec.output_dim)
        throw ValidationError("network output width " + std::to_string(shapes[n_layers].flat()) +
                              " does not match output_dim " + std::to_string(spec.output_dim));
    return shapes;
}

template <typename S>
struct ParamTensor {
    Mat<S> value, m, v;  // value + Adam moments

    void setZero(Eigen::Index r, Eigen::Index c) {
        value.setZero(r, c);
        m.setZero(r, c);
        v.setZero(r, c);
    }
    bool empty() const { return value.size() == 0; }
};

template <typename S>
struct LayerState {
    ParamTensor<S> weight, bias;   // dense/conv1d/output
    ParamTensor<S> gamma, beta;    // batch_norm
    Vec<S> running_mean, running_var;
};

template <typename S>
struct Weights {
    std::vector<LayerState<S>> layers;
    std::vector<ParamTensor<S>> skip_proj;  // parallel to spec.skips
    std::int64_t step = 0;                  // Adam step counter
};

template <typename S>
struct Gradients {
    struct Layer {
        Mat<S> weight, bias, gamma, beta;
    };
    std::vector<Layer> layers;
    std::vector<Mat<S>> skip_proj;
};

// Deterministic uniform double in [0, 1) from the raw 64-bit stream;
// std::uniform_real_distribution is implementation-defined, this is not.
inline double rng_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

namespace detail {

template <typename S>
void he_uniform_fill(Mat<S>& w, double fan_in, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / fan_in);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            w(i, j) = static_cast<S>((2.0 * rng_uniform(rng) - 1.0) * bound);
}

}  // namespace detail

// He-uniform weight init (bound sqrt(6/fan_in)), zero biases, batch-norm
// gamma=1 beta=0; deterministic given the seed.
template <typename S>
Weights<S> build(const NetworkSpec& spec, std::uint64_t seed) {
    std::vector<std::pair<int, int>> proj_shapes;
    infer_shapes(spec, &proj_shapes);
    std::mt19937_64 rng(seed);

    Weights<S> w;
    w.layers.resize(spec.layers.size());
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& L = spec.layers[i];
        LayerState<S>& st = w.layers[i];
        switch (L.kind) {
            case LayerKind::dense:
            case LayerKind::output:
                st.weight.setZero(L.out, L.in);
                st.bias.setZero(L.out, 1);
                detail::he_uniform_fill(st.weight.value, L.in, rng);
                break;
            case LayerKind::conv1d:
                st.weight.setZero(L.out, static_cast<Eigen::Index>(L.in) * L.kernel);
                st.bias.setZero(L.out, 1);
                detail::he_uniform_fill(st.weight.value, static_cast<double>(L.in) * L.kernel, rng);
                break;
            case LayerKind::batch_norm:
                st.gamma.setZero(L.in, 1);
                st.beta.setZero(L.in, 1);
                st.gamma.value.setOnes();
                st.running_mean = Vec<S>::Zero(L.in);
                st.running_var = Vec<S>::Ones(L.in);
                break;
            default:
                break;
        }
    }
    w.skip_proj.resize(spec.skips.size());
    for (size_t k = 0; k < spec.skips.size(); ++k) {
        auto [rows, cols] = proj_shapes[k];
        if (rows > 0) {
            w.skip_proj[k].setZero(rows, cols);
            detail::he_uniform_fill(w.skip_proj[k].value, cols, rng);
        }
    }
    return w;
}

enum class StatsMode { batch, frozen };  // batch-norm statistics source

struct ForwardOptions {
    StatsMode stats = StatsMode::frozen;
    bool update_running = false;       // only the real training path sets this
    std::mt19937_64* rng = nullptr;    // dropout active iff non-null
};

template <typename S>
struct ForwardCache {
    std::vector<Mat<S>> outputs;        // [0] = input batch, [i] = layer i output
    std::vector<Mat<S>> merged_inputs;  // per layer, post-skip-merge input
    std::vector<Mat<S>> colmats;        // conv1d im2col buffers
    std::vector<Mat<S>> dropout_masks;  // scaled keep masks
    std::vector<Mat<S>> bn_xhat;        // normalized activations
    std::vector<Vec<S>> bn_invstd;      // per-channel 1/sqrt(var+eps)
};

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.9;

namespace detail {

// Gathers the per-position block of `src` for channel mixing: columns
// {c*length + x : c in [0, channels)} for fixed x.
template <typename S>
Mat<S> position_block(const Mat<S>& src, int channels, int length, int x) {
    Mat<S> out(src.rows(), channels);
    for (int c = 0; c < channels; ++c) out.col(c) = src.col(static_cast<Eigen::Index>(c) * length + x);
    return out;
}

template <typename S>
void add_position_block(Mat<S>& dst, const Mat<S>& block, int channels, int length, int x) {
    for (int c = 0; c < channels; ++c) dst.col(static_cast<Eigen::Index>(c) * length + x) += block.col(c);
}

// dest += src * P^T applied per sequence position (1x1 convolution).
template <typename S>
void apply_projection(Mat<S>& dest, const Mat<S>& src, const Mat<S>& proj, int length) {
    const int src_ch = static_cast<int>(proj.cols());
    const int dst_ch = static_cast<int>(proj.rows());
    for (int x = 0; x < length; ++x) {
        Mat<S> block = position_block(src, src_ch, length, x);
        Mat<S> mixed = block * proj.transpose();
        add_position_block(dest, mixed, dst_ch, length, x);
    }
}

template <typename S>
void check_finite(const Mat<S>& m, int layer_index, LayerKind kind) {
    if (!m.allFinite())
        throw NumericError("non-finite output at layer " + std::to_string(layer_index) + " (" +
                           kind_name(kind) + ")");
}

}  // namespace detail

// Forward pass. Train mode (stats=batch, rng set) uses batch statistics and
// sampled inverted-dropout masks; eval (frozen, no rng) uses running
// statistics and no dropout and is a pure function of (weights, batch).
template <typename S>
Mat<S> forward(const NetworkSpec& spec, Weights<S>& weights, const Mat<S>& batch,
               const ForwardOptions& opt, ForwardCache<S>* cache = nullptr) {
    const std::vector<Shape> shapes = infer_shapes(spec);
    const int n_layers = static_cast<int>(spec.layers.size());
    if (batch.cols() != spec.input_dim)
        throw ValidationError("batch width " + std::to_string(batch.cols()) +
                              " does not match input_dim " + std::to_string(spec.input_dim));

    std::vector<Mat<S>> local_outputs;
    std::vector<Mat<S>>& outputs = cache ? cache->outputs : local_outputs;
    outputs.assign(n_layers + 1, {});
    outputs[0] = batch;
    if (cache) {
        cache->merged_inputs.assign(n_layers, {});
        cache->colmats.assign(n_layers, {});
        cache->dropout_masks.assign(n_layers, {});
        cache->bn_xhat.assign(n_layers, {});
        cache->bn_invstd.assign(n_layers, {});
    }
    const Eigen::Index B = batch.rows();

    for (int i = 1; i <= n_layers; ++i) {
        const LayerSpec& L = spec.layers[i - 1];
        LayerState<S>& st = weights.layers[i - 1];

        // Merge sequential input with any skips targeting this layer.
        Mat<S> in = outputs[i - 1];
        Shape in_shape = shapes[i - 1];
        for (size_t k = 0; k < spec.skips.size(); ++k) {
            const SkipSpec& s = spec.skips[k];
            if (s.to != i) continue;
            const Mat<S>& src = outputs[s.from];
            const Shape src_shape = shapes[s.from];
            if (s.mode == SkipMode::concat) {
                Mat<S> widened(B, in.cols() + src.cols());
                widened << in, src;
                in = std::move(widened);
                in_shape.channels += src_shape.channels;
            } else if (s.projected) {
                detail::apply_projection(in, src, weights.skip_proj[k].value, in_shape.length);
            } else {
                in += src;
            }
        }
        if (cache) cache->merged_inputs[i - 1] = in;

        Mat<S>& out = outputs[i];
        switch (L.kind) {
            case LayerKind::dense:
            case LayerKind::output: {
                out.noalias() = in * st.weight.value.transpose();
                out.rowwise() += st.bias.value.col(0).transpose();
                break;
            }
            case LayerKind::conv1d: {
                const int len = in_shape.length;
                const int ic = L.in, oc = L.out, kw = L.kernel, half = kw / 2;
                Mat<S> colmat = Mat<S>::Zero(B * len, static_cast<Eigen::Index>(ic) * kw);
                for (int c = 0; c < ic; ++c)
                    for (int k = 0; k < kw; ++k)
                        for (int x = 0; x < len; ++x) {
                            const int sx = x + k - half;
                            if (sx < 0 || sx >= len) continue;
                            colmat.col(static_cast<Eigen::Index>(c) * kw + k)
                                .segment(static_cast<Eigen::Index>(x) * B, B) =
                                in.col(static_cast<Eigen::Index>(c) * len + sx);
                        }
                Mat<S> flat(B * len, oc);
                flat.noalias() = colmat * st.weight.value.transpose();
                out.resize(B, static_cast<Eigen::Index>(oc) * len);
                for (int c = 0; c < oc; ++c)
                    for (int x = 0; x < len; ++x)
                        out.col(static_cast<Eigen::Index>(c) * len + x) =
                            (flat.col(c).segment(static_cast<Eigen::Index>(x) * B, B).array() +
                             st.bias.value(c, 0))
                                .matrix();
                if (cache) cache->colmats[i - 1] = std::move(colmat);
                break;
            }
            case LayerKind::batch_norm: {
                const int len = in_shape.length;
                const int ch = L.in;
                const double n = static_cast<double>(B) * len;
                out.resize(B, in.cols());
                Mat<S> xhat(B, in.cols());
                Vec<S> invstd(ch);
                for (int c = 0; c < ch; ++c) {
                    auto block = in.middleCols(static_cast<Eigen::Index>(c) * len, len);
                    S mean, var;
                    if (opt.stats == StatsMode::batch) {
                        mean = block.sum() / static_cast<S>(n);
                        var = (block.array() - mean).square().sum() / static_cast<S>(n);
                        if (opt.update_running) {
                            st.running_mean(c) = static_cast<S>(kBnMomentum) * st.running_mean(c) +
                                                 static_cast<S>(1 - kBnMomentum) * mean;
                            st.running_var(c) = static_cast<S>(kBnMomentum) * st.running_var(c) +
                                                static_cast<S>(1 - kBnMomentum) * var;
                        }
                    } else {
                        mean = st.running_mean(c);
                        var = st.running_var(c);
                    }
                    invstd(c) = static_cast<S>(1.0 / std::sqrt(static_cast<double>(var) + kBnEps));
                    auto xh = xhat.middleCols(static_cast<Eigen::Index>(c) * len, len);
                    xh = ((block.array() - mean) * invstd(c)).matrix();
                    out.middleCols(static_cast<Eigen::Index>(c) * len, len) =
                        (xh.array() * st.gamma.value(c, 0) + st.beta.value(c, 0)).matrix();
                }
                if (cache) {
                    cache->bn_xhat[i - 1] = std::move(xhat);
                    cache->bn_invstd[i - 1] = std::move(invstd);
                }
                break;
            }
            case LayerKind::dropout: {
                if (opt.rng && L.rate > 0) {
                    const S scale = static_cast<S>(1.0 / (1.0 - L.rate));
                    Mat<S> mask(B, in.cols());
                    for (Eigen::Index jc = 0; jc < mask.cols(); ++jc)
                        for (Eigen::Index jr = 0; jr < mask.rows(); ++jr)
                            mask(jr, jc) = rng_uniform(*opt.rng) >= L.rate ? scale : S(0);
                    out = in.cwiseProduct(mask);
                    if (cache) cache->dropout_masks[i - 1] = std::move(mask);
                } else {
                    out = in;
                }
                break;
            }
            case LayerKind::relu:
                out = in.cwiseMax(S(0));
                break;
            case LayerKind::flatten:
                out = in;  // channel-major layout: flattening is a shape relabel
                break;
        }
        detail::check_finite(out, i, L.kind);
    }
    return outputs[n_layers];
}

// Eval-mode prediction; pure in (weights, batch).
template <typename S>
Mat<S> predict(const NetworkSpec& spec, const Weights<S>& weights, const Mat<S>& batch) {
    ForwardOptions opt;  // frozen stats, no dropout, no running update
    return forward(spec, const_cast<Weights<S>&>(weights), batch, opt);
}

// Mean squared error over batch rows and output columns.
template <typename S>
S mse_loss(const Mat<S>& pred, const Mat<S>& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw ValidationError("prediction/target shape mismatch");
    const double n = static_cast<double>(pred.rows()) * pred.cols();
    return static_cast<S>((pred - target).squaredNorm() / n);
}

template <typename S>
Gradients<S> zero_gradients(const NetworkSpec& spec, const Weights<S>& w) {
    Gradients<S> g;
    g.layers.resize(w.layers.size());
    for (size_t i = 0; i < w.layers.size(); ++i) {
        const auto& st = w.layers[i];
        if (!st.weight.empty()) g.layers[i].weight = Mat<S>::Zero(st.weight.value.rows(), st.weight.value.cols());
        if (!st.bias.empty()) g.layers[i].bias = Mat<S>::Zero(st.bias.value.rows(), st.bias.value.cols());
        if (!st.gamma.empty()) g.layers[i].gamma = Mat<S>::Zero(st.gamma.value.rows(), st.gamma.value.cols());
        if (!st.beta.empty()) g.layers[i].beta = Mat<S>::Zero(st.beta.value.rows(), st.beta.value.cols());
    }
    g.skip_proj.resize(w.skip_proj.size());
    for (size_t k = 0; k < w.skip_proj.size(); ++k)
        if (!w.skip_proj[k].empty())
            g.skip_proj[k] = Mat<S>::Zero(w.skip_proj[k].value.rows(), w.skip_proj[k].value.cols());
    return g;
}

// Forward + reverse-mode accumulation through all layers and skips.
// opt.stats selects batch statistics (training) or frozen running statistics
// (gradient checking); dropout masks are sampled iff opt.rng is set.
template <typename S>
S loss_and_grads(const NetworkSpec& spec, Weights<S>& weights, const Mat<S>& batch,
                 const Mat<S>& targets, const ForwardOptions& opt, Gradients<S>& grads) {
    const std::vector<Shape> shapes = infer_shapes(spec);
    const int n_layers = static_cast<int>(spec.layers.size());
    if (targets.cols() != spec.output_dim)
        throw ValidationError("target width does not match output_dim");

    ForwardCache<S> cache;
    Mat<S> pred = forward(spec, weights, batch, opt, &cache);
    const S loss = mse_loss(pred, targets);
    grads = zero_gradients(spec, weights);

    const Eigen::Index B = batch.rows();
    const double n = static_cast<double>(pred.rows()) * pred.cols();

    std::vector<Mat<S>> d_out(n_layers + 1);
    auto accumulate = [&](int idx, const Mat<S>& g) {
        if (d_out[idx].size() == 0)
            d_out[idx] = g;
        else
            d_out[idx] += g;
    };
    d_out[n_layers] = (pred - targets) * static_cast<S>(2.0 / n);

    for (int i = n_layers; i >= 1; --i) {
        const LayerSpec& L = spec.layers[i - 1];
        const LayerState<S>& st = weights.layers[i - 1];
        const Mat<S>& g_out = d_out[i];
        const Mat<S>& in = cache.merged_inputs[i - 1];
        Mat<S> d_in;

        switch (L.kind) {
            case LayerKind::dense:
            case LayerKind::output: {
                grads.layers[i - 1].weight.noalias() += g_out.transpose() * in;
                grads.layers[i - 1].bias += g_out.colwise().sum().transpose();
                d_in.noalias() = g_out * st.weight.value;
                break;
            }
            case LayerKind::conv1d: {
                const int len = shapes[i - 1].length;  // concat widens channels, not length
                const int ic = L.in, oc = L.out, kw = L.kernel, half = kw / 2;
                const Mat<S>& colmat = cache.colmats[i - 1];
                Mat<S> d_flat(B * len, oc);
                for (int c = 0; c < oc; ++c)
                    for (int x = 0; x < len; ++x)
                        d_flat.col(c).segment(static_cast<Eigen::Index>(x) * B, B) =
                            g_out.col(static_cast<Eigen::Index>(c) * len + x);
                grads.layers[i - 1].weight.noalias() += d_flat.transpose() * colmat;
                for (int c = 0; c < oc; ++c)
                    grads.layers[i - 1].bias(c, 0) += d_flat.col(c).sum();
                Mat<S> d_colmat;
                d_colmat.noalias() = d_flat * st.weight.value;
                d_in = Mat<S>::Zero(B, static_cast<Eigen::Index>(ic) * len);
                for (int c = 0; c < ic; ++c)
                    for (int k = 0; k < kw; ++k)
                        for (int x = 0; x < len; ++x) {
                            const int sx = x + k - half;
                            if (sx < 0 || sx >= len) continue;
                            d_in.col(static_cast<Eigen::Index>(c) * len + sx) +=
                                d_colmat.col(static_cast<Eigen::Index>(c) * kw + k)
                                    .segment(static_cast<Eigen::Index>(x) * B, B);
                        }
                break;
            }
            case LayerKind::batch_norm: {
                const int len = shapes[i - 1].length;
                const int ch = L.in;
                const double cnt = static_cast<double>(B) * len;
                const Mat<S>& xhat = cache.bn_xhat[i - 1];
                const Vec<S>& invstd = cache.bn_invstd[i - 1];
                d_in.resize(B, in.cols());
                for (int c = 0; c < ch; ++c) {
                    auto gb = g_out.middleCols(static_cast<Eigen::Index>(c) * len, len);
                    auto xh = xhat.middleCols(static_cast<Eigen::Index>(c) * len, len);
                    const S dgamma = (gb.array() * xh.array()).sum();
                    const S dbeta = gb.sum();
                    grads.layers[i - 1].gamma(c, 0) += dgamma;
                    grads.layers[i - 1].beta(c, 0) += dbeta;
                    auto di = d_in.middleCols(static_cast<Eigen::Index>(c) * len, len);
                    const S scale = st.gamma.value(c, 0) * invstd(c);
                    if (opt.stats == StatsMode::batch) {
                        // d_in = scale/N * (N*g - sum(g) - xhat * sum(g*xhat))
                        di = ((gb.array() * static_cast<S>(cnt) - dbeta - xh.array() * dgamma) *
                              (scale / static_cast<S>(cnt)))
                                 .matrix();
                    } else {
                        di = (gb.array() * scale).matrix();
                    }
                }
                break;
            }
            case LayerKind::dropout: {
                if (cache.dropout_masks[i - 1].size() > 0)
                    d_in = g_out.cwiseProduct(cache.dropout_masks[i - 1]);
                else
                    d_in = g_out;
                break;
            }
            case LayerKind::relu: {
                d_in = ((cache.outputs[i].array() > S(0)).template cast<S>() * g_out.array())
                           .matrix();
                break;
            }
            case LayerKind::flatten:
                d_in = g_out;
                break;
        }

        // Unwind the skip merge in reverse declaration order.
        Mat<S> d_cur = std::move(d_in);
        for (int k = static_cast<int>(spec.skips.size()) - 1; k >= 0; --k) {
            const SkipSpec& s = spec.skips[k];
            if (s.to != i) continue;
            if (s.mode == SkipMode::concat) {
                const Eigen::Index w_src = cache.outputs[s.from].cols();
                accumulate(s.from, d_cur.rightCols(w_src));
                d_cur = d_cur.leftCols(d_cur.cols() - w_src).eval();
            } else if (s.projected) {
                const Mat<S>& proj = weights.skip_proj[k].value;
                const int src_ch = static_cast<int>(proj.cols());
                const int dst_ch = static_cast<int>(proj.rows());
                const int len = shapes[s.from].length;
                Mat<S> d_src = Mat<S>::Zero(B, cache.outputs[s.from].cols());
                for (int x = 0; x < len; ++x) {
                    Mat<S> d_block = detail::position_block(d_cur, dst_ch, len, x);
                    Mat<S> s_block = detail::position_block(cache.outputs[s.from], src_ch, len, x);
                    grads.skip_proj[k].noalias() += d_block.transpose() * s_block;
                    Mat<S> back = d_block * proj;
                    detail::add_position_block(d_src, back, src_ch, len, x);
                }
                accumulate(s.from, d_src);
            } else {
                accumulate(s.from, d_cur);
            }
        }
        accumulate(i - 1, d_cur);
    }
    return loss;
}

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

namespace detail {

template <typename S>
void adam_update(ParamTensor<S>& p, const Mat<S>& g, double lr, double bc1, double bc2) {
    if (p.empty()) return;
    if (!g.allFinite()) throw NumericError("non-finite gradient in adam_step");
    p.m = static_cast<S>(kAdamBeta1) * p.m + static_cast<S>(1 - kAdamBeta1) * g;
    p.v = static_cast<S>(kAdamBeta2) * p.v + static_cast<S>(1 - kAdamBeta2) * g.cwiseProduct(g);
    p.value.array() -= static_cast<S>(lr) * (p.m.array() / static_cast<S>(bc1)) /
                       ((p.v.array() / static_cast<S>(bc2)).sqrt() + static_cast<S>(kAdamEps));
}

}  // namespace detail

// One bias-corrected Adam update; increments the step counter.
template <typename S>
void adam_step(Weights<S>& w, const Gradients<S>& g, double lr) {
    w.step += 1;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(w.step));
    const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(w.step));
    for (size_t i = 0; i < w.layers.size(); ++i) {
        detail::adam_update(w.layers[i].weight, g.layers[i].weight, lr, bc1, bc2);
        detail::adam_update(w.layers[i].bias, g.layers[i].bias, lr, bc1, bc2);
        detail::adam_update(w.layers[i].gamma, g.layers[i].gamma, lr, bc1, bc2);
        detail::adam_update(w.layers[i].beta, g.layers[i].beta, lr, bc1, bc2);
    }
    for (size_t k = 0; k < w.skip_proj.size(); ++k)
        detail::adam_update(w.skip_proj[k], g.skip_proj[k], lr, bc1, bc2);
}

// Reduce-on-plateau: strict improvement resets the counter; two consecutive
// non-improving validation losses multiply the rate by 0.75, floored at 1e-5.
struct LrScheduler {
    double initial = 0.01;
    double factor = 0.75;
    double floor = 1e-5;
    int patience = 2;

    double lr = 0.01;
    double best_val_loss = std::numeric_limits<double>::infinity();
    int epochs_since_improvement = 0;

    void step(double val_loss) {
        if (!std::isfinite(val_loss)) throw NumericError("non-finite validation loss");
        if (val_loss < best_val_loss) {
            best_val_loss = val_loss;
            epochs_since_improvement = 0;
            return;
        }
        ++epochs_since_improvement;
        if (epochs_since_improvement >= patience) {
            lr = std::max(lr * factor, floor);
            epochs_since_improvement = 0;
        }
    }
};

// Profile constructors. "small" is the desk-scale default: four width-64
// dense layers where each layer's output is concatenated into every later
// dense layer, then a linear head. "paper" realizes the full stack: four
// conv blocks (128/128/256/256 filters, batch norm + ReLU + dropout) with
// three additive skips, then four dense layers (256/192/128/128) with the
// same dense-to-all-later concatenation rule.
inline NetworkSpec make_profile(const std::string& profile, int input_dim, int output_dim) {
    NetworkSpec s;
    s.profile = profile;
    s.input_dim = input_dim;
    s.output_dim = output_dim;
    using L = LayerSpec;
    if (profile == "small") {
        s.layers = {L::dense(input_dim, 64), L::relu(), L::dense(64, 64), L::relu(),
                    L::dense(128, 64), L::relu(), L::dense(192, 64), L::relu(),
                    L::output(64, output_dim)};
        s.skips = {{2, 5, SkipMode::concat}, {2, 7, SkipMode::concat}, {4, 7, SkipMode::concat}};
    } else if (profile == "paper") {
        const int F = input_dim;
        s.input_channels = 1;  // the feature vector enters as a 1-channel sequence
        s.layers = {
            L::conv1d(1, 128),   L::batch_norm(128), L::relu(), L::dropout(0.1),
            L::conv1d(128, 128), L::batch_norm(128), L::relu(), L::dropout(0.1),
            L::conv1d(128, 256), L::batch_norm(256), L::relu(), L::dropout(0.1),
            L::conv1d(256, 256), L::batch_norm(256), L::relu(), L::dropout(0.1),
            L::flatten(),
            L::dense(256 * F, 256), L::relu(),
            L::dense(256, 192),     L::relu(),
            L::dense(448, 128),     L::relu(),
            L::dense(576, 128),     L::relu(),
            L::output(128, output_dim)};
        s.skips = {{4, 9, SkipMode::add},
                   {8, 13, SkipMode::add, true},
                   {0, 13, SkipMode::add, true},
                   {19, 22, SkipMode::concat},
                   {19, 24, SkipMode::concat},
                   {21, 24, SkipMode::concat}};
    } else {
        throw ValidationError("unknown network profile '" + profile + "'");
    }
    infer_shapes(s);
    return s;
}

}  // namespace nnwave::net

#endif
