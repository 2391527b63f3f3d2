#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "airt/errors.hpp"
#include "airt/nn.hpp"
#include "airt/seqio.hpp"
#include "airt/standardize.hpp"
#include "airt/types.hpp"

namespace airt {

struct MaskSpec {
    int patch_len = 16;
    double mask_ratio = 0.5;
    double noise_std = 0.1;  // sigma in units of the per-signal std
    uint64_t seed = 0;

    void validate() const {
        if (patch_len < 1) throw format_error("MaskSpec: patch_len >= 1");
        if (mask_ratio < 0.0 || mask_ratio >= 1.0)
            throw format_error("MaskSpec: mask_ratio must be in [0, 1)");
        if (noise_std < 0.0) throw format_error("MaskSpec: noise_std >= 0");
    }
};

/// Network topology. The defaults are sized for online per-sequence training
/// on a laptop CPU; everything is adjustable.
struct ArchSpec {
    int input_len = 64;  // signals are resampled to this length
    std::vector<int> channels = {8, 16, 32};
    int kernel = 7;
    int stride = 2;
    int se_reduction = 4;
    bool attention = true;
    double leaky_slope = 0.01;

    nlohmann::json to_json() const {
        return {{"input_len", input_len}, {"channels", channels},   {"kernel", kernel},
                {"stride", stride},       {"se_reduction", se_reduction},
                {"attention", attention}, {"leaky_slope", leaky_slope}};
    }
    static ArchSpec from_json(const nlohmann::json& j) {
        ArchSpec a;
        a.input_len = j.value("input_len", a.input_len);
        a.channels = j.value("channels", a.channels);
        a.kernel = j.value("kernel", a.kernel);
        a.stride = j.value("stride", a.stride);
        a.se_reduction = j.value("se_reduction", a.se_reduction);
        a.attention = j.value("attention", a.attention);
        a.leaky_slope = j.value("leaky_slope", a.leaky_slope);
        return a;
    }
};

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 32;
    int epochs = 100;
    int latent_dim = 10;
    MaskSpec mask;
    uint64_t seed = 0;
    int max_train_pixels = 2048;  // seeded subsample cap keeping online training fast
    ArchSpec arch;

    void validate() const {
        if (!(learning_rate > 0.0) || batch_size < 1 || epochs < 0 || latent_dim < 1)
            throw format_error("TrainConfig: learning_rate, batch_size, latent_dim must be positive");
        mask.validate();
    }
};

struct AdapterModel {
    ArchSpec arch;
    int latent_dim = 10;
    std::vector<double> params;
};

struct LatentStack {
    std::vector<Image2D> images;  // latent_dim images of shape (n_y, n_x)
};

enum class PoolOp { avg, max, pca };

inline std::string to_string(PoolOp op) {
    switch (op) {
        case PoolOp::avg: return "avg";
        case PoolOp::max: return "max";
        case PoolOp::pca: return "pca";
    }
    return "?";
}

inline PoolOp pool_op_from_string(const std::string& s) {
    if (s == "avg") return PoolOp::avg;
    if (s == "max") return PoolOp::max;
    if (s == "pca") return PoolOp::pca;
    throw format_error("unknown pooling op: " + s);
}

struct AlignedImage {
    Image2D pixels;
    PoolOp pooling = PoolOp::avg;
    std::map<std::string, std::string> provenance;
};

// ---- corruption -------------------------------------------------------------

/// Patch-wise binary masking plus additive Gaussian noise scaled by the
/// signal's own standard deviation. Exactly round(mask_ratio * n_patches)
/// patches are zeroed (capped so at least one stays visible).
inline std::pair<std::vector<double>, std::vector<uint8_t>> corrupt(
    const std::vector<double>& signal, const MaskSpec& mask, std::mt19937_64& rng) {
    mask.validate();
    const int n = static_cast<int>(signal.size());
    const int n_patches = (n + mask.patch_len - 1) / mask.patch_len;
    int n_masked = static_cast<int>(std::lround(mask.mask_ratio * n_patches));
    n_masked = std::min(n_masked, n_patches - 1);

    std::vector<int> order(n_patches);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<uint8_t> bits(n, 1);
    for (int i = 0; i < n_masked; ++i) {
        const int p0 = order[i] * mask.patch_len;
        for (int j = p0; j < std::min(p0 + mask.patch_len, n); ++j) bits[j] = 0;
    }

    double mean = 0.0;
    for (double s : signal) mean += s;
    mean /= std::max(n, 1);
    double var = 0.0;
    for (double s : signal) var += (s - mean) * (s - mean);
    var /= std::max(n, 1);
    const double sigma = mask.noise_std * std::sqrt(var);

    std::vector<double> out(n);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        out[i] = bits[i] ? signal[i] : 0.0;
        if (sigma > 0.0) out[i] += sigma * noise(rng);
    }
    return {std::move(out), std::move(bits)};
}

/// Clamped boxcar low-pass over the temporal axis. Camera noise is white
/// while the underlying cooling transients are smooth, so a short moving
/// average raises the input SNR before encoding without moving the signal.
inline std::vector<double> presmooth_signal(const double* src, int n, int radius = 2) {
    std::vector<double> out(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k)
            acc += src[std::clamp(i + k, 0, n - 1)];
        out[i] = acc / (2 * radius + 1);
    }
    return out;
}

/// Linear-interpolation resample to a fixed length.
inline std::vector<double> resample_signal(const double* src, int n, int target) {
    std::vector<double> out(target);
    if (n == 1) {
        std::fill(out.begin(), out.end(), src[0]);
        return out;
    }
    for (int i = 0; i < target; ++i) {
        const double pos = target > 1 ? i * double(n - 1) / (target - 1) : 0.0;
        const int lo = std::min(static_cast<int>(pos), n - 2);
        const double frac = pos - lo;
        out[i] = src[lo] * (1.0 - frac) + src[lo + 1] * frac;
    }
    return out;
}

// ---- network ----------------------------------------------------------------

/// Encoder: stride-2 conv blocks with channel attention, one self-attention
/// layer over the temporal tokens, global average over time, affine to the
/// latent. Decoder: affine, reshape, mirrored transposed-conv blocks.
class AdapterNet {
public:
    AdapterNet(const ArchSpec& arch, int latent_dim)
        : arch_(arch),
          latent_dim_(latent_dim),
          lrelu_(arch.leaky_slope) {
        if (arch.channels.size() != 3) throw format_error("ArchSpec: need exactly 3 channel sizes");
        const int pad = arch.kernel / 2;
        const int c1 = arch.channels[0], c2 = arch.channels[1], c3 = arch.channels[2];
        convs_ = {nn::Conv1D(1, c1, arch.kernel, arch.stride, pad),
                  nn::Conv1D(c1, c2, arch.kernel, arch.stride, pad),
                  nn::Conv1D(c2, c3, arch.kernel, arch.stride, pad)};
        ses_ = {nn::SqueezeExcite(c1, arch.se_reduction), nn::SqueezeExcite(c2, arch.se_reduction),
                nn::SqueezeExcite(c3, arch.se_reduction)};
        lens_ = {arch.input_len};
        for (int i = 0; i < 3; ++i) lens_.push_back(convs_[i].out_len(lens_.back()));
        attn_ = std::make_unique<nn::SelfAttention>(c3);
        enc_head_ = std::make_unique<nn::Dense>(c3, latent_dim);
        dec_head_ = std::make_unique<nn::Dense>(latent_dim, c3 * lens_[3]);
        const int out_pad = arch.stride - 1;
        tconvs_ = {nn::TConv1D(c3, c2, arch.kernel, arch.stride, pad, out_pad),
                   nn::TConv1D(c2, c1, arch.kernel, arch.stride, pad, out_pad),
                   nn::TConv1D(c1, 1, arch.kernel, arch.stride, pad, out_pad)};
        if (tconvs_[2].out_len(tconvs_[1].out_len(tconvs_[0].out_len(lens_[3]))) != arch.input_len)
            throw format_error("ArchSpec: decoder does not reproduce input_len");

        offsets_.clear();
        size_t total = 0;
        auto alloc = [&](size_t n) {
            offsets_.push_back(total);
            total += n;
        };
        for (int i = 0; i < 3; ++i) {
            alloc(convs_[i].param_count());
            alloc(ses_[i].param_count());
        }
        alloc(arch.attention ? attn_->param_count() : 0);
        alloc(enc_head_->param_count());
        alloc(dec_head_->param_count());
        for (int i = 0; i < 3; ++i) alloc(tconvs_[i].param_count());
        total_params_ = total;
    }

    size_t param_count() const { return total_params_; }

    std::vector<double> init_params(uint64_t seed) const {
        std::vector<double> p(total_params_, 0.0);
        std::mt19937_64 rng(seed);
        int slot = 0;
        for (int i = 0; i < 3; ++i) {
            convs_[i].init(p.data() + offsets_[slot++], rng);
            ses_[i].init(p.data() + offsets_[slot++], rng);
        }
        if (arch_.attention) attn_->init(p.data() + offsets_[slot], rng);
        ++slot;
        enc_head_->init(p.data() + offsets_[slot++], rng);
        dec_head_->init(p.data() + offsets_[slot++], rng);
        for (int i = 0; i < 3; ++i) tconvs_[i].init(p.data() + offsets_[slot++], rng);
        return p;
    }

    struct Ctx {
        std::array<nn::Conv1D::Ctx, 3> conv;
        std::array<nn::SqueezeExcite::Ctx, 3> se;
        std::array<nn::LeakyReLU::Ctx, 3> act;
        nn::SelfAttention::Ctx attn;
        nn::Dense::Ctx enc_head, dec_head;
        nn::LeakyReLU::Ctx latent_act, dec_act0;
        std::array<nn::TConv1D::Ctx, 3> tconv;
        std::array<nn::LeakyReLU::Ctx, 2> tact;
        int gap_len = 0;
    };

    /// (1, B*input_len) -> (latent_dim, B)
    nn::MatrixXd encode_batch(const nn::MatrixXd& x, const double* p, Ctx& ctx) const {
        nn::MatrixXd h = x;
        for (int i = 0; i < 3; ++i) {
            h = convs_[i].forward_with_len(h, p + offsets_[2 * i], ctx.conv[i], lens_[i]);
            h = lrelu_.forward(h, ctx.act[i]);
            h = ses_[i].forward_with_len(h, p + offsets_[2 * i + 1], ctx.se[i], lens_[i + 1]);
        }
        if (arch_.attention)
            h = attn_->forward_with_len(h, p + offsets_[6], ctx.attn, lens_[3]);
        ctx.gap_len = lens_[3];
        h = nn::global_avg_pool_time(h, lens_[3]);
        h = enc_head_->forward(h, p + offsets_[7], ctx.enc_head);
        // Rectified latent: mostly-nonnegative channels aggregate coherently
        // under channel-mean pooling instead of cancelling by sign.
        return lrelu_.forward(h, ctx.latent_act);
    }

    /// (latent_dim, B) -> (1, B*input_len)
    nn::MatrixXd decode_batch(const nn::MatrixXd& z, const double* p, Ctx& ctx) const {
        const int c3 = arch_.channels[2], t3 = lens_[3];
        nn::MatrixXd h = dec_head_->forward(z, p + offsets_[8], ctx.dec_head);
        h = lrelu_.forward(h, ctx.dec_act0);
        h = nn::cols_to_stream(h, c3, t3);
        int len = t3;
        for (int i = 0; i < 3; ++i) {
            h = tconvs_[i].forward_with_len(h, p + offsets_[9 + i], ctx.tconv[i], len);
            len = tconvs_[i].out_len(len);
            if (i < 2) h = lrelu_.forward(h, ctx.tact[i]);
        }
        return h;
    }

    /// Backward through decoder then encoder; accumulates into g, returns dX.
    nn::MatrixXd backward(const nn::MatrixXd& d_recon, const double* p, Ctx& ctx,
                          double* g) const {
        const int c3 = arch_.channels[2], t3 = lens_[3];
        nn::MatrixXd d = d_recon;
        for (int i = 2; i >= 0; --i) {
            if (i < 2) d = lrelu_.backward(d, ctx.tact[i]);
            d = tconvs_[i].backward(d, p + offsets_[9 + i], ctx.tconv[i], g + offsets_[9 + i]);
        }
        d = nn::stream_to_cols(d, c3, t3);
        d = lrelu_.backward(d, ctx.dec_act0);
        d = dec_head_->backward(d, p + offsets_[8], ctx.dec_head, g + offsets_[8]);
        d = lrelu_.backward(d, ctx.latent_act);
        d = enc_head_->backward(d, p + offsets_[7], ctx.enc_head, g + offsets_[7]);
        d = nn::global_avg_pool_time_backward(d, ctx.gap_len);
        if (arch_.attention)
            d = attn_->backward(d, p + offsets_[6], ctx.attn, g + offsets_[6]);
        for (int i = 2; i >= 0; --i) {
            d = ses_[i].backward(d, p + offsets_[2 * i + 1], ctx.se[i], g + offsets_[2 * i + 1]);
            d = lrelu_.backward(d, ctx.act[i]);
            d = convs_[i].backward(d, p + offsets_[2 * i], ctx.conv[i], g + offsets_[2 * i]);
        }
        return d;
    }

    const std::vector<int>& lens() const { return lens_; }

private:
    ArchSpec arch_;
    int latent_dim_;
    nn::LeakyReLU lrelu_;
    std::vector<nn::Conv1D> convs_;
    std::vector<nn::SqueezeExcite> ses_;
    std::vector<nn::TConv1D> tconvs_;
    std::unique_ptr<nn::SelfAttention> attn_;
    std::unique_ptr<nn::Dense> enc_head_, dec_head_;
    std::vector<int> lens_;  // temporal length before each encoder stage
    std::vector<size_t> offsets_;
    size_t total_params_ = 0;
};

// ---- encode / decode --------------------------------------------------------

inline std::vector<double> encode(const AdapterModel& model, const std::vector<double>& signal) {
    if (static_cast<int>(signal.size()) != model.arch.input_len)
        throw numeric_error("encode: signal length " + std::to_string(signal.size()) +
                            " does not match arch input length " +
                            std::to_string(model.arch.input_len));
    AdapterNet net(model.arch, model.latent_dim);
    nn::MatrixXd x(1, signal.size());
    for (size_t i = 0; i < signal.size(); ++i) x(0, static_cast<Eigen::Index>(i)) = signal[i];
    AdapterNet::Ctx ctx;
    const nn::MatrixXd z = net.encode_batch(x, model.params.data(), ctx);
    std::vector<double> out(model.latent_dim);
    for (int i = 0; i < model.latent_dim; ++i) out[i] = z(i, 0);
    return out;
}

inline std::vector<double> decode(const AdapterModel& model, const std::vector<double>& latent) {
    if (static_cast<int>(latent.size()) != model.latent_dim)
        throw numeric_error("decode: latent length mismatch");
    AdapterNet net(model.arch, model.latent_dim);
    nn::MatrixXd z(model.latent_dim, 1);
    for (int i = 0; i < model.latent_dim; ++i) z(i, 0) = latent[i];
    AdapterNet::Ctx ctx;
    const nn::MatrixXd r = net.decode_batch(z, model.params.data(), ctx);
    std::vector<double> out(model.arch.input_len);
    for (int i = 0; i < model.arch.input_len; ++i) out[i] = r(0, i);
    return out;
}

// ---- training ---------------------------------------------------------------

/// Online masked-denoising training on one sequence's pixel signals.
/// Deterministic for a fixed seed. Returns the model and per-epoch losses.
inline std::pair<AdapterModel, std::vector<double>> train(const StandardizedSequence& std_seq,
                                                          const TrainConfig& cfg) {
    cfg.validate();
    const size_t p_total = std_seq.n_pixels();
    if (p_total < static_cast<size_t>(cfg.batch_size))
        throw numeric_error("train: fewer pixels than batch_size");

    AdapterNet net(cfg.arch, cfg.latent_dim);
    AdapterModel model;
    model.arch = cfg.arch;
    model.latent_dim = cfg.latent_dim;
    model.params = net.init_params(cfg.seed);

    std::mt19937_64 rng(cfg.seed ^ 0x6a09e667f3bcc908ull);

    // seeded subsample keeps per-sequence training bounded on large images
    std::vector<size_t> pixels(p_total);
    std::iota(pixels.begin(), pixels.end(), size_t{0});
    if (cfg.max_train_pixels > 0 && p_total > static_cast<size_t>(cfg.max_train_pixels)) {
        std::shuffle(pixels.begin(), pixels.end(), rng);
        pixels.resize(cfg.max_train_pixels);
    }
    const size_t p = pixels.size();
    const int len = cfg.arch.input_len;

    std::vector<std::vector<double>> resampled(p);
    for (size_t i = 0; i < p; ++i) {
        const auto smooth = presmooth_signal(std_seq.signal(pixels[i]), std_seq.n_t);
        resampled[i] = resample_signal(smooth.data(), std_seq.n_t, len);
    }

    nn::Adam adam(model.params.size(), cfg.learning_rate);
    std::vector<double> grads(model.params.size());
    std::vector<double> history;
    const size_t n_batches = p / cfg.batch_size;
    MaskSpec mask = cfg.mask;

    double initial_loss = 0.0;
    int high_loss_streak = 0;
    std::vector<size_t> order(p);
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (size_t bi = 0; bi < n_batches; ++bi) {
            const int bsz = cfg.batch_size;
            nn::MatrixXd x(1, static_cast<Eigen::Index>(bsz) * len);
            nn::MatrixXd target(1, static_cast<Eigen::Index>(bsz) * len);
            for (int b = 0; b < bsz; ++b) {
                const auto& sig = resampled[order[bi * bsz + b]];
                auto [corrupted, bits] = corrupt(sig, mask, rng);
                for (int i = 0; i < len; ++i) {
                    x(0, static_cast<Eigen::Index>(b) * len + i) = corrupted[i];
                    target(0, static_cast<Eigen::Index>(b) * len + i) = sig[i];
                }
            }
            AdapterNet::Ctx ctx;
            const nn::MatrixXd z = net.encode_batch(x, model.params.data(), ctx);
            const nn::MatrixXd recon = net.decode_batch(z, model.params.data(), ctx);
            const nn::MatrixXd diff = recon - target;
            const double loss = diff.squaredNorm() / diff.size();
            epoch_loss += loss;

            std::fill(grads.begin(), grads.end(), 0.0);
            const nn::MatrixXd d_recon = diff * (2.0 / diff.size());
            net.backward(d_recon, model.params.data(), ctx, grads.data());
            adam.step(model.params, grads);
        }
        epoch_loss /= std::max<size_t>(n_batches, 1);
        if (!std::isfinite(epoch_loss))
            throw numeric_error("train: loss diverged (NaN) at epoch " + std::to_string(epoch));
        if (epoch == 0) initial_loss = epoch_loss;
        high_loss_streak = epoch_loss > 10.0 * initial_loss ? high_loss_streak + 1 : 0;
        if (high_loss_streak >= 5)
            throw numeric_error("train: loss diverged (>10x initial for 5 epochs) at epoch " +
                                std::to_string(epoch));
        history.push_back(epoch_loss);
    }
    return {std::move(model), std::move(history)};
}

// ---- latent stack and pooling ----------------------------------------------

inline LatentStack latent_stack(const AdapterModel& model, const StandardizedSequence& std_seq) {
    AdapterNet net(model.arch, model.latent_dim);
    const size_t p = std_seq.n_pixels();
    const int len = model.arch.input_len;

    LatentStack stack;
    for (int c = 0; c < model.latent_dim; ++c)
        stack.images.emplace_back(static_cast<int>(std_seq.n_y), static_cast<int>(std_seq.n_x));

    const size_t chunk = 256;
    for (size_t start = 0; start < p; start += chunk) {
        const size_t n = std::min(chunk, p - start);
        nn::MatrixXd x(1, static_cast<Eigen::Index>(n) * len);
        for (size_t b = 0; b < n; ++b) {
            const auto smooth = presmooth_signal(std_seq.signal(start + b), std_seq.n_t);
            const auto sig = resample_signal(smooth.data(), std_seq.n_t, len);
            for (int i = 0; i < len; ++i)
                x(0, static_cast<Eigen::Index>(b) * len + i) = sig[i];
        }
        AdapterNet::Ctx ctx;
        const nn::MatrixXd z = net.encode_batch(x, model.params.data(), ctx);
        for (size_t b = 0; b < n; ++b)
            for (int c = 0; c < model.latent_dim; ++c)
                stack.images[c].v[start + b] = z(c, static_cast<Eigen::Index>(b));
    }
    return stack;
}

inline AlignedImage pool(const LatentStack& stack, PoolOp op) {
    if (stack.images.empty()) throw numeric_error("pool: empty latent stack");
    const int h = stack.images[0].h, w = stack.images[0].w;
    const size_t n = stack.images[0].size();
    const size_t l = stack.images.size();
    AlignedImage out;
    out.pooling = op;
    out.pixels = Image2D(h, w);

    if (op == PoolOp::avg) {
        for (size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (const auto& img : stack.images) s += img.v[i];
            out.pixels.v[i] = s / l;
        }
    } else if (op == PoolOp::max) {
        for (size_t i = 0; i < n; ++i) {
            double m = stack.images[0].v[i];
            for (const auto& img : stack.images) m = std::max(m, img.v[i]);
            out.pixels.v[i] = m;
        }
    } else {
        // first principal component of the channel distribution across pixels
        Eigen::MatrixXd data(l, n);
        for (size_t c = 0; c < l; ++c)
            for (size_t i = 0; i < n; ++i) data(c, i) = stack.images[c].v[i];
        const Eigen::VectorXd mean = data.rowwise().mean();
        data.colwise() -= mean;
        const Eigen::MatrixXd cov = data * data.transpose() / double(n);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        Eigen::VectorXd pc = eig.eigenvectors().col(static_cast<Eigen::Index>(l) - 1);
        Eigen::VectorXd proj = pc.transpose() * data;
        double m3 = 0.0;
        const double pmean = proj.mean();
        for (Eigen::Index i = 0; i < proj.size(); ++i) {
            const double d = proj[i] - pmean;
            m3 += d * d * d;
        }
        if (m3 < 0.0) proj = -proj;
        for (size_t i = 0; i < n; ++i) out.pixels.v[i] = proj[static_cast<Eigen::Index>(i)];
    }
    out.provenance["pooling"] = to_string(op);
    out.provenance["latent_dim"] = std::to_string(l);
    return out;
}

/// Standardize -> train -> latent stack -> pool, end to end.
inline AlignedImage run_adapter(const InspectionSequence& seq, const TrainConfig& cfg,
                                PoolOp pooling) {
    const StandardizedSequence std_seq = standardize(seq);
    auto [model, history] = train(std_seq, cfg);
    const LatentStack stack = latent_stack(model, std_seq);
    AlignedImage out = pool(stack, pooling);
    out.provenance["seed"] = std::to_string(cfg.seed);
    out.provenance["epochs"] = std::to_string(cfg.epochs);
    out.provenance["resample_len"] = std::to_string(cfg.arch.input_len);
    if (!history.empty()) {
        out.provenance["loss_first"] = std::to_string(history.front());
        out.provenance["loss_last"] = std::to_string(history.back());
    }
    return out;
}

// ---- checkpoint format ------------------------------------------------------

// "AVLM" | u32 json_len | ArchSpec+latent_dim JSON | float32 params

inline void save_model(const AdapterModel& model, const std::string& path) {
    nlohmann::json meta = model.arch.to_json();
    meta["latent_dim"] = model.latent_dim;
    meta["param_count"] = model.params.size();
    const std::string js = meta.dump();
    std::string out;
    out.append("AVLM", 4);
    detail::put_le<uint32_t>(out, static_cast<uint32_t>(js.size()));
    out += js;
    for (double v : model.params) detail::put_le<float>(out, static_cast<float>(v));
    detail::write_file(path, out);
}

inline AdapterModel load_model(const std::string& path) {
    const std::string buf = detail::read_file(path);
    if (buf.size() < 4 || buf.compare(0, 4, "AVLM") != 0)
        throw format_error("bad magic at byte offset 0, expected \"AVLM\": " + path);
    const auto js_len = detail::get_le<uint32_t>(buf, 4, "json length");
    if (buf.size() < 8 + js_len) throw format_error("truncated checkpoint header: " + path);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(buf.substr(8, js_len));
    } catch (const nlohmann::json::parse_error& e) {
        throw format_error("checkpoint metadata is not valid JSON: " + std::string(e.what()));
    }
    AdapterModel model;
    model.arch = ArchSpec::from_json(meta);
    model.latent_dim = meta.value("latent_dim", 10);
    const size_t n = meta.value("param_count", size_t{0});
    if (buf.size() != 8 + js_len + n * 4)
        throw format_error("truncated checkpoint payload: " + path);
    model.params.resize(n);
    for (size_t i = 0; i < n; ++i)
        model.params[i] = detail::get_le<float>(buf, 8 + js_len + i * 4, "param");
    AdapterNet net(model.arch, model.latent_dim);
    if (net.param_count() != n)
        throw format_error("checkpoint parameter count does not match architecture");
    return model;
}

}  // namespace airt
