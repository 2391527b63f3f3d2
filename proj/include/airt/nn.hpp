#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "airt/errors.hpp"

// Small 1-D network toolkit, double precision, CPU only.
//
// Batched activations are Eigen matrices of shape (channels, batch*time):
// sample b occupies the column block [b*T, (b+1)*T). Dense layers use T = 1.
// Every layer exposes param_count / forward / backward with analytic
// gradients; backward accumulates into a caller-owned gradient buffer.

namespace airt::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline void uniform_fan_in_init(double* p, size_t count, size_t fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<size_t>(fan_in, 1)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (size_t i = 0; i < count; ++i) p[i] = dist(rng);
}

// ---- Conv1D -----------------------------------------------------------------

/// 1-D convolution via im2col + GEMM. Zero padding; L_out = floor((L + 2*pad - k)/stride) + 1.
class Conv1D {
public:
    Conv1D(int c_in, int c_out, int kernel, int stride, int pad)
        : c_in_(c_in), c_out_(c_out), k_(kernel), stride_(stride), pad_(pad) {}

    int out_len(int l_in) const { return (l_in + 2 * pad_ - k_) / stride_ + 1; }
    size_t param_count() const {
        return static_cast<size_t>(c_out_) * c_in_ * k_ + c_out_;
    }
    void init(double* p, std::mt19937_64& rng) const {
        uniform_fan_in_init(p, param_count(), static_cast<size_t>(c_in_) * k_, rng);
    }

    struct Ctx {
        MatrixXd xcol;
        int l_in = 0, batch = 0;
    };

    MatrixXd forward_with_len(const MatrixXd& x, const double* p, Ctx& ctx, int l_in) const {
        const int batch = static_cast<int>(x.cols()) / l_in;
        const int l_out = out_len(l_in);
        ctx.l_in = l_in;
        ctx.batch = batch;
        Eigen::Map<const MatrixXd> w(p, c_out_, static_cast<Eigen::Index>(c_in_) * k_);
        Eigen::Map<const VectorXd> bias(p + c_out_ * c_in_ * k_, c_out_);

        ctx.xcol.setZero(static_cast<Eigen::Index>(c_in_) * k_,
                         static_cast<Eigen::Index>(batch) * l_out);
        for (int b = 0; b < batch; ++b)
            for (int o = 0; o < l_out; ++o) {
                const Eigen::Index col = static_cast<Eigen::Index>(b) * l_out + o;
                for (int tap = 0; tap < k_; ++tap) {
                    const int i = o * stride_ + tap - pad_;
                    if (i < 0 || i >= l_in) continue;
                    ctx.xcol.block(static_cast<Eigen::Index>(tap) * c_in_, col, c_in_, 1) =
                        x.col(static_cast<Eigen::Index>(b) * l_in + i);
                }
            }
        MatrixXd y = w * ctx.xcol;
        y.colwise() += bias;
        return y;
    }

    MatrixXd backward(const MatrixXd& dy, const double* p, const Ctx& ctx, double* g) const {
        Eigen::Map<const MatrixXd> w(p, c_out_, static_cast<Eigen::Index>(c_in_) * k_);
        Eigen::Map<MatrixXd> dw(g, c_out_, static_cast<Eigen::Index>(c_in_) * k_);
        Eigen::Map<VectorXd> db(g + c_out_ * c_in_ * k_, c_out_);
        dw += dy * ctx.xcol.transpose();
        db += dy.rowwise().sum();

        const MatrixXd dxcol = w.transpose() * dy;
        const int l_out = out_len(ctx.l_in);
        MatrixXd dx = MatrixXd::Zero(c_in_, static_cast<Eigen::Index>(ctx.batch) * ctx.l_in);
        for (int b = 0; b < ctx.batch; ++b)
            for (int o = 0; o < l_out; ++o) {
                const Eigen::Index col = static_cast<Eigen::Index>(b) * l_out + o;
                for (int tap = 0; tap < k_; ++tap) {
                    const int i = o * stride_ + tap - pad_;
                    if (i < 0 || i >= ctx.l_in) continue;
                    dx.col(static_cast<Eigen::Index>(b) * ctx.l_in + i) +=
                        dxcol.block(static_cast<Eigen::Index>(tap) * c_in_, col, c_in_, 1);
                }
            }
        return dx;
    }

    int c_in() const { return c_in_; }
    int c_out() const { return c_out_; }

private:
    int c_in_, c_out_, k_, stride_, pad_;
};

// ---- TransposedConv1D -------------------------------------------------------

/// Stride-s transposed convolution; L_out = (L_in - 1)*stride - 2*pad + k + out_pad.
class TConv1D {
public:
    TConv1D(int c_in, int c_out, int kernel, int stride, int pad, int out_pad)
        : c_in_(c_in), c_out_(c_out), k_(kernel), stride_(stride), pad_(pad), out_pad_(out_pad) {}

    int out_len(int l_in) const { return (l_in - 1) * stride_ - 2 * pad_ + k_ + out_pad_; }
    size_t param_count() const {
        return static_cast<size_t>(c_in_) * c_out_ * k_ + c_out_;
    }
    void init(double* p, std::mt19937_64& rng) const {
        uniform_fan_in_init(p, param_count(), static_cast<size_t>(c_in_) * k_ / stride_, rng);
    }

    struct Ctx {
        MatrixXd x;
        int l_in = 0, batch = 0;
    };

    // weights laid out as (c_in, c_out*k): column (co*k + tap)
    MatrixXd forward_with_len(const MatrixXd& x, const double* p, Ctx& ctx, int l_in) const {
        const int batch = static_cast<int>(x.cols()) / l_in;
        const int l_out = out_len(l_in);
        ctx.x = x;
        ctx.l_in = l_in;
        ctx.batch = batch;
        Eigen::Map<const MatrixXd> w(p, c_in_, static_cast<Eigen::Index>(c_out_) * k_);
        Eigen::Map<const VectorXd> bias(p + c_in_ * c_out_ * k_, c_out_);

        // ycol[(co,tap), (b,t)] then scatter to out position t*stride + tap - pad
        const MatrixXd ycol = w.transpose() * x;
        MatrixXd y(c_out_, static_cast<Eigen::Index>(batch) * l_out);
        for (int b = 0; b < batch; ++b)
            for (int o = 0; o < l_out; ++o) y.col(static_cast<Eigen::Index>(b) * l_out + o) = bias;
        for (int b = 0; b < batch; ++b)
            for (int t = 0; t < l_in; ++t) {
                const Eigen::Index col = static_cast<Eigen::Index>(b) * l_in + t;
                for (int tap = 0; tap < k_; ++tap) {
                    const int o = t * stride_ + tap - pad_;
                    if (o < 0 || o >= l_out) continue;
                    for (int co = 0; co < c_out_; ++co)
                        y(co, static_cast<Eigen::Index>(b) * l_out + o) +=
                            ycol(static_cast<Eigen::Index>(co) * k_ + tap, col);
                }
            }
        return y;
    }

    MatrixXd backward(const MatrixXd& dy, const double* p, const Ctx& ctx, double* g) const {
        Eigen::Map<const MatrixXd> w(p, c_in_, static_cast<Eigen::Index>(c_out_) * k_);
        Eigen::Map<MatrixXd> dw(g, c_in_, static_cast<Eigen::Index>(c_out_) * k_);
        Eigen::Map<VectorXd> db(g + c_in_ * c_out_ * k_, c_out_);
        const int l_out = out_len(ctx.l_in);

        for (int b = 0; b < ctx.batch; ++b)
            for (int o = 0; o < l_out; ++o)
                db += dy.col(static_cast<Eigen::Index>(b) * l_out + o);

        // gather dy into dycol, mirroring the forward scatter
        MatrixXd dycol = MatrixXd::Zero(static_cast<Eigen::Index>(c_out_) * k_,
                                        static_cast<Eigen::Index>(ctx.batch) * ctx.l_in);
        for (int b = 0; b < ctx.batch; ++b)
            for (int t = 0; t < ctx.l_in; ++t) {
                const Eigen::Index col = static_cast<Eigen::Index>(b) * ctx.l_in + t;
                for (int tap = 0; tap < k_; ++tap) {
                    const int o = t * stride_ + tap - pad_;
                    if (o < 0 || o >= l_out) continue;
                    for (int co = 0; co < c_out_; ++co)
                        dycol(static_cast<Eigen::Index>(co) * k_ + tap, col) =
                            dy(co, static_cast<Eigen::Index>(b) * l_out + o);
                }
            }
        dw += ctx.x * dycol.transpose();
        return w * dycol;
    }

private:
    int c_in_, c_out_, k_, stride_, pad_, out_pad_;
};

// ---- LeakyReLU --------------------------------------------------------------

class LeakyReLU {
public:
    explicit LeakyReLU(double slope = 0.01) : slope_(slope) {}
    size_t param_count() const { return 0; }

    struct Ctx {
        MatrixXd x;
    };

    MatrixXd forward(const MatrixXd& x, Ctx& ctx) const {
        ctx.x = x;
        return x.unaryExpr([this](double v) { return v > 0.0 ? v : slope_ * v; });
    }

    MatrixXd backward(const MatrixXd& dy, const Ctx& ctx) const {
        return dy.binaryExpr(ctx.x,
                             [this](double d, double v) { return v > 0.0 ? d : slope_ * d; });
    }

private:
    double slope_;
};

// ---- SqueezeExcite ----------------------------------------------------------

/// Channel attention: gate = sigmoid(W2 relu(W1 mean_t(x) + b1) + b2), applied
/// multiplicatively per channel.
class SqueezeExcite {
public:
    SqueezeExcite(int channels, int reduction)
        : c_(channels), cr_(std::max(1, channels / reduction)) {}

    size_t param_count() const {
        return static_cast<size_t>(cr_) * c_ + cr_ + static_cast<size_t>(c_) * cr_ + c_;
    }
    void init(double* p, std::mt19937_64& rng) const {
        uniform_fan_in_init(p, static_cast<size_t>(cr_) * c_ + cr_, c_, rng);
        uniform_fan_in_init(p + cr_ * c_ + cr_, static_cast<size_t>(c_) * cr_ + c_, cr_, rng);
    }

    struct Ctx {
        MatrixXd x, means, hidden, gates;  // means/hidden/gates: one column per sample
        int t = 0;
    };

    MatrixXd forward_with_len(const MatrixXd& x, const double* p, Ctx& ctx, int t) const {
        const int batch = static_cast<int>(x.cols()) / t;
        ctx.x = x;
        ctx.t = t;
        Eigen::Map<const MatrixXd> w1(p, cr_, c_);
        Eigen::Map<const VectorXd> b1(p + cr_ * c_, cr_);
        Eigen::Map<const MatrixXd> w2(p + cr_ * c_ + cr_, c_, cr_);
        Eigen::Map<const VectorXd> b2(p + cr_ * c_ + cr_ + c_ * cr_, c_);

        ctx.means.resize(c_, batch);
        for (int b = 0; b < batch; ++b)
            ctx.means.col(b) = x.middleCols(static_cast<Eigen::Index>(b) * t, t).rowwise().mean();
        ctx.hidden = ((w1 * ctx.means).colwise() + b1).cwiseMax(0.0);
        ctx.gates = ((w2 * ctx.hidden).colwise() + b2)
                        .unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });

        MatrixXd y(x.rows(), x.cols());
        for (int b = 0; b < batch; ++b)
            y.middleCols(static_cast<Eigen::Index>(b) * t, t) =
                x.middleCols(static_cast<Eigen::Index>(b) * t, t).array().colwise() *
                ctx.gates.col(b).array();
        return y;
    }

    MatrixXd backward(const MatrixXd& dy, const double* p, const Ctx& ctx, double* g) const {
        const int t = ctx.t;
        const int batch = static_cast<int>(dy.cols()) / t;
        Eigen::Map<const MatrixXd> w1(p, cr_, c_);
        Eigen::Map<const MatrixXd> w2(p + cr_ * c_ + cr_, c_, cr_);
        Eigen::Map<MatrixXd> dw1(g, cr_, c_);
        Eigen::Map<VectorXd> db1(g + cr_ * c_, cr_);
        Eigen::Map<MatrixXd> dw2(g + cr_ * c_ + cr_, c_, cr_);
        Eigen::Map<VectorXd> db2(g + cr_ * c_ + cr_ + c_ * cr_, c_);

        MatrixXd dx(dy.rows(), dy.cols());
        MatrixXd dgate(c_, batch);
        for (int b = 0; b < batch; ++b) {
            const auto xb = ctx.x.middleCols(static_cast<Eigen::Index>(b) * t, t);
            const auto dyb = dy.middleCols(static_cast<Eigen::Index>(b) * t, t);
            dgate.col(b) = (dyb.array() * xb.array()).rowwise().sum();
            dx.middleCols(static_cast<Eigen::Index>(b) * t, t) =
                dyb.array().colwise() * ctx.gates.col(b).array();
        }
        // through sigmoid
        const MatrixXd dz2 =
            dgate.array() * ctx.gates.array() * (1.0 - ctx.gates.array());
        dw2 += dz2 * ctx.hidden.transpose();
        db2 += dz2.rowwise().sum();
        MatrixXd dh = w2.transpose() * dz2;
        dh = (ctx.hidden.array() > 0.0).select(dh, 0.0);
        dw1 += dh * ctx.means.transpose();
        db1 += dh.rowwise().sum();
        const MatrixXd dmean = w1.transpose() * dh;
        for (int b = 0; b < batch; ++b)
            dx.middleCols(static_cast<Eigen::Index>(b) * t, t).colwise() +=
                (dmean.col(b) / t).eval();
        return dx;
    }

private:
    int c_, cr_;
};

// ---- SelfAttention ----------------------------------------------------------

/// Single-head scaled dot-product attention over the temporal tokens with a
/// residual connection: Y = X + Wo * (V * softmax(Q^T K / sqrt(C))^T).
class SelfAttention {
public:
    explicit SelfAttention(int channels) : c_(channels) {}

    size_t param_count() const { return 4ull * c_ * c_; }
    void init(double* p, std::mt19937_64& rng) const {
        uniform_fan_in_init(p, param_count(), c_, rng);
    }

    struct Ctx {
        MatrixXd x;
        std::vector<MatrixXd> q, k, v, attn, out;  // per sample
        int t = 0;
    };

    MatrixXd forward_with_len(const MatrixXd& x, const double* p, Ctx& ctx, int t) const {
        const int batch = static_cast<int>(x.cols()) / t;
        ctx.x = x;
        ctx.t = t;
        ctx.q.resize(batch);
        ctx.k.resize(batch);
        ctx.v.resize(batch);
        ctx.attn.resize(batch);
        ctx.out.resize(batch);
        Eigen::Map<const MatrixXd> wq(p, c_, c_), wk(p + c_ * c_, c_, c_),
            wv(p + 2 * c_ * c_, c_, c_), wo(p + 3 * c_ * c_, c_, c_);
        const double scale = 1.0 / std::sqrt(static_cast<double>(c_));

        MatrixXd y(c_, x.cols());
        for (int b = 0; b < batch; ++b) {
            const auto xb = x.middleCols(static_cast<Eigen::Index>(b) * t, t);
            ctx.q[b] = wq * xb;
            ctx.k[b] = wk * xb;
            ctx.v[b] = wv * xb;
            MatrixXd scores = (ctx.q[b].transpose() * ctx.k[b]) * scale;  // (t, t)
            for (int r = 0; r < t; ++r) {
                const double mx = scores.row(r).maxCoeff();
                scores.row(r) = (scores.row(r).array() - mx).exp();
                scores.row(r) /= scores.row(r).sum();
            }
            ctx.attn[b] = scores;
            ctx.out[b] = ctx.v[b] * scores.transpose();
            y.middleCols(static_cast<Eigen::Index>(b) * t, t) = xb + wo * ctx.out[b];
        }
        return y;
    }

    MatrixXd backward(const MatrixXd& dy, const double* p, const Ctx& ctx, double* g) const {
        const int t = ctx.t;
        const int batch = static_cast<int>(dy.cols()) / t;
        Eigen::Map<const MatrixXd> wq(p, c_, c_), wk(p + c_ * c_, c_, c_),
            wv(p + 2 * c_ * c_, c_, c_), wo(p + 3 * c_ * c_, c_, c_);
        Eigen::Map<MatrixXd> dwq(g, c_, c_), dwk(g + c_ * c_, c_, c_),
            dwv(g + 2 * c_ * c_, c_, c_), dwo(g + 3 * c_ * c_, c_, c_);
        const double scale = 1.0 / std::sqrt(static_cast<double>(c_));

        MatrixXd dx = dy;  // residual path
        for (int b = 0; b < batch; ++b) {
            const auto xb = ctx.x.middleCols(static_cast<Eigen::Index>(b) * t, t);
            const auto dyb = dy.middleCols(static_cast<Eigen::Index>(b) * t, t);
            dwo += dyb * ctx.out[b].transpose();
            const MatrixXd dout = wo.transpose() * dyb;
            const MatrixXd dv = dout * ctx.attn[b];
            MatrixXd dattn = dout.transpose() * ctx.v[b];  // (t, t)
            // softmax backward, row-wise
            MatrixXd dscores(t, t);
            for (int r = 0; r < t; ++r) {
                const double dot = dattn.row(r).dot(ctx.attn[b].row(r));
                dscores.row(r) =
                    (dattn.row(r).array() - dot) * ctx.attn[b].row(r).array();
            }
            const MatrixXd dq = ctx.k[b] * dscores.transpose() * scale;
            const MatrixXd dk = ctx.q[b] * dscores * scale;
            dwq += dq * xb.transpose();
            dwk += dk * xb.transpose();
            dwv += dv * xb.transpose();
            dx.middleCols(static_cast<Eigen::Index>(b) * t, t) +=
                wq.transpose() * dq + wk.transpose() * dk + wv.transpose() * dv;
        }
        return dx;
    }

private:
    int c_;
};

// ---- Dense ------------------------------------------------------------------

class Dense {
public:
    Dense(int c_in, int c_out) : c_in_(c_in), c_out_(c_out) {}

    size_t param_count() const { return static_cast<size_t>(c_out_) * c_in_ + c_out_; }
    void init(double* p, std::mt19937_64& rng) const {
        uniform_fan_in_init(p, param_count(), c_in_, rng);
    }

    struct Ctx {
        MatrixXd x;
    };

    MatrixXd forward(const MatrixXd& x, const double* p, Ctx& ctx) const {
        ctx.x = x;
        Eigen::Map<const MatrixXd> w(p, c_out_, c_in_);
        Eigen::Map<const VectorXd> b(p + static_cast<size_t>(c_out_) * c_in_, c_out_);
        return (w * x).colwise() + b;
    }

    MatrixXd backward(const MatrixXd& dy, const double* p, const Ctx& ctx, double* g) const {
        Eigen::Map<const MatrixXd> w(p, c_out_, c_in_);
        Eigen::Map<MatrixXd> dw(g, c_out_, c_in_);
        Eigen::Map<VectorXd> db(g + static_cast<size_t>(c_out_) * c_in_, c_out_);
        dw += dy * ctx.x.transpose();
        db += dy.rowwise().sum();
        return w.transpose() * dy;
    }

private:
    int c_in_, c_out_;
};

// ---- shape utilities --------------------------------------------------------

/// Mean over time: (C, B*T) -> (C, B).
inline MatrixXd global_avg_pool_time(const MatrixXd& x, int t) {
    const int batch = static_cast<int>(x.cols()) / t;
    MatrixXd y(x.rows(), batch);
    for (int b = 0; b < batch; ++b)
        y.col(b) = x.middleCols(static_cast<Eigen::Index>(b) * t, t).rowwise().mean();
    return y;
}

inline MatrixXd global_avg_pool_time_backward(const MatrixXd& dy, int t) {
    const int batch = static_cast<int>(dy.cols());
    MatrixXd dx(dy.rows(), static_cast<Eigen::Index>(batch) * t);
    for (int b = 0; b < batch; ++b)
        dx.middleCols(static_cast<Eigen::Index>(b) * t, t).colwise() = (dy.col(b) / t).eval();
    return dx;
}

/// (C*T, B) column vectors -> (C, B*T) streams; index c*T + t within a column.
inline MatrixXd cols_to_stream(const MatrixXd& x, int c, int t) {
    const int batch = static_cast<int>(x.cols());
    MatrixXd y(c, static_cast<Eigen::Index>(batch) * t);
    for (int b = 0; b < batch; ++b)
        for (int ch = 0; ch < c; ++ch)
            for (int i = 0; i < t; ++i)
                y(ch, static_cast<Eigen::Index>(b) * t + i) =
                    x(static_cast<Eigen::Index>(ch) * t + i, b);
    return y;
}

inline MatrixXd stream_to_cols(const MatrixXd& y, int c, int t) {
    const int batch = static_cast<int>(y.cols()) / t;
    MatrixXd x(static_cast<Eigen::Index>(c) * t, batch);
    for (int b = 0; b < batch; ++b)
        for (int ch = 0; ch < c; ++ch)
            for (int i = 0; i < t; ++i)
                x(static_cast<Eigen::Index>(ch) * t + i, b) =
                    y(ch, static_cast<Eigen::Index>(b) * t + i);
    return x;
}

// ---- Adam -------------------------------------------------------------------

class Adam {
public:
    Adam(size_t n, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

    void step(std::vector<double>& params, const std::vector<double>& grads) {
        ++t_;
        const double bc1 = 1.0 - std::pow(b1_, t_);
        const double bc2 = 1.0 - std::pow(b2_, t_);
        for (size_t i = 0; i < params.size(); ++i) {
            m_[i] = b1_ * m_[i] + (1.0 - b1_) * grads[i];
            v_[i] = b2_ * v_[i] + (1.0 - b2_) * grads[i] * grads[i];
            params[i] -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
        }
    }

private:
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
    std::vector<double> m_, v_;
};

}  // namespace airt::nn
