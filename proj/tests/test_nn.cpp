#include <catch2/catch_amalgamated.hpp>

#include <functional>
#include <random>

#include "airt/nn.hpp"

using namespace airt::nn;
using Eigen::MatrixXd;

namespace {

// Scalar probe loss L = sum(W .* y) with fixed random W, so dL/dy = W.
// Central differences on inputs and parameters against the analytic backward.
struct GradCheck {
    std::mt19937_64 rng{12345};
    double eps = 1e-5;
    double tol = 1e-4;

    MatrixXd random_mat(Eigen::Index r, Eigen::Index c, double scale = 1.0) {
        std::normal_distribution<double> d(0.0, scale);
        MatrixXd m(r, c);
        for (Eigen::Index j = 0; j < c; ++j)
            for (Eigen::Index i = 0; i < r; ++i) m(i, j) = d(rng);
        return m;
    }

    // forward: (x, params) -> y. backward: (dy, params, grad_out) -> dx.
    void run(const std::string& name, MatrixXd x, std::vector<double> params,
             const std::function<MatrixXd(const MatrixXd&, const double*)>& fwd,
             const std::function<MatrixXd(const MatrixXd&, const double*, double*)>& bwd) {
        INFO("layer: " << name);
        const MatrixXd y0 = fwd(x, params.data());
        const MatrixXd w = random_mat(y0.rows(), y0.cols());
        auto loss = [&](const MatrixXd& xx, const double* pp) {
            return (w.array() * fwd(xx, pp).array()).sum();
        };

        std::vector<double> grad(params.size(), 0.0);
        // backward must run against the same cached forward pass
        (void)fwd(x, params.data());
        const MatrixXd dx = bwd(w, params.data(), grad.data());

        double max_err = 0.0, max_ref = 0.0;
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            for (Eigen::Index i = 0; i < x.rows(); ++i) {
                MatrixXd xp = x, xm = x;
                xp(i, j) += eps;
                xm(i, j) -= eps;
                const double num = (loss(xp, params.data()) - loss(xm, params.data())) / (2 * eps);
                max_err = std::max(max_err, std::abs(num - dx(i, j)));
                max_ref = std::max(max_ref, std::abs(num));
            }
        INFO("input grad: max_abs_err=" << max_err << " max_ref=" << max_ref);
        REQUIRE(max_err <= tol * std::max(1.0, max_ref));

        max_err = max_ref = 0.0;
        for (size_t i = 0; i < params.size(); ++i) {
            auto pp = params;
            pp[i] += eps;
            const double lp = loss(x, pp.data());
            pp[i] -= 2 * eps;
            const double lm = loss(x, pp.data());
            const double num = (lp - lm) / (2 * eps);
            max_err = std::max(max_err, std::abs(num - grad[i]));
            max_ref = std::max(max_ref, std::abs(num));
        }
        INFO("param grad: max_abs_err=" << max_err << " max_ref=" << max_ref);
        REQUIRE(max_err <= tol * std::max(1.0, max_ref));
    }
};

}  // namespace

TEST_CASE("conv1d matches finite differences") {
    GradCheck gc;
    Conv1D layer(3, 4, 3, 2, 1);
    const int T = 8, B = 2;
    std::vector<double> params(layer.param_count());
    std::mt19937_64 rng(7);
    layer.init(params.data(), rng);
    auto ctx = std::make_shared<Conv1D::Ctx>();
    gc.run(
        "conv1d", gc.random_mat(3, B * T), params,
        [&](const MatrixXd& x, const double* p) { return layer.forward_with_len(x, p, *ctx, T); },
        [&](const MatrixXd& dy, const double* p, double* g) {
            return layer.backward(dy, p, *ctx, g);
        });
    CHECK(layer.out_len(T) == 4);  // (8 + 2 - 3)/2 + 1
}

TEST_CASE("transposed conv1d matches finite differences and inverts the length map") {
    GradCheck gc;
    TConv1D layer(3, 2, 7, 2, 3, 1);
    const int T = 4, B = 2;
    CHECK(layer.out_len(T) == 2 * T);  // (T-1)*2 - 6 + 7 + 1
    std::vector<double> params(layer.param_count());
    std::mt19937_64 rng(8);
    layer.init(params.data(), rng);
    auto ctx = std::make_shared<TConv1D::Ctx>();
    gc.run(
        "tconv1d", gc.random_mat(3, B * T), params,
        [&](const MatrixXd& x, const double* p) { return layer.forward_with_len(x, p, *ctx, T); },
        [&](const MatrixXd& dy, const double* p, double* g) {
            return layer.backward(dy, p, *ctx, g);
        });
}

TEST_CASE("leaky relu matches finite differences") {
    GradCheck gc;
    LeakyReLU layer(0.01);
    auto ctx = std::make_shared<LeakyReLU::Ctx>();
    // keep activations away from the kink at 0
    MatrixXd x = gc.random_mat(5, 12);
    for (auto& v : x.reshaped())
        if (std::abs(v) < 0.05) v = v < 0 ? -0.1 : 0.1;
    gc.run(
        "leaky_relu", x, {},
        [&](const MatrixXd& xx, const double*) { return layer.forward(xx, *ctx); },
        [&](const MatrixXd& dy, const double*, double*) { return layer.backward(dy, *ctx); });
}

TEST_CASE("squeeze-excite gating matches finite differences") {
    GradCheck gc;
    SqueezeExcite layer(4, 2);
    const int T = 5, B = 2;
    std::vector<double> params(layer.param_count());
    std::mt19937_64 rng(9);
    layer.init(params.data(), rng);
    auto ctx = std::make_shared<SqueezeExcite::Ctx>();
    gc.run(
        "squeeze_excite", gc.random_mat(4, B * T), params,
        [&](const MatrixXd& x, const double* p) { return layer.forward_with_len(x, p, *ctx, T); },
        [&](const MatrixXd& dy, const double* p, double* g) {
            return layer.backward(dy, p, *ctx, g);
        });
}

TEST_CASE("self-attention (softmax jacobian included) matches finite differences") {
    GradCheck gc;
    SelfAttention layer(4);
    const int T = 5, B = 2;
    std::vector<double> params(layer.param_count());
    std::mt19937_64 rng(10);
    layer.init(params.data(), rng);
    auto ctx = std::make_shared<SelfAttention::Ctx>();
    gc.run(
        "self_attention", gc.random_mat(4, B * T), params,
        [&](const MatrixXd& x, const double* p) { return layer.forward_with_len(x, p, *ctx, T); },
        [&](const MatrixXd& dy, const double* p, double* g) {
            return layer.backward(dy, p, *ctx, g);
        });
}

TEST_CASE("dense matches finite differences") {
    GradCheck gc;
    Dense layer(6, 3);
    std::vector<double> params(layer.param_count());
    std::mt19937_64 rng(11);
    layer.init(params.data(), rng);
    auto ctx = std::make_shared<Dense::Ctx>();
    gc.run(
        "dense", gc.random_mat(6, 4), params,
        [&](const MatrixXd& x, const double* p) { return layer.forward(x, p, *ctx); },
        [&](const MatrixXd& dy, const double* p, double* g) {
            return layer.backward(dy, p, *ctx, g);
        });
}

TEST_CASE("temporal pooling and layout helpers are mutually consistent") {
    GradCheck gc;
    const int C = 3, T = 4, B = 2;
    MatrixXd x = gc.random_mat(C, B * T);

    SECTION("global average pool is the column-block mean") {
        MatrixXd y = global_avg_pool_time(x, T);
        REQUIRE(y.cols() == B);
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
                double m = 0;
                for (int t = 0; t < T; ++t) m += x(c, b * T + t);
                CHECK(y(c, b) == Catch::Approx(m / T).margin(1e-12));
            }
        // backward spreads the gradient uniformly; matches finite differences
        MatrixXd w = gc.random_mat(C, B);
        MatrixXd dx = global_avg_pool_time_backward(w, T);
        CHECK(dx(1, T + 2) == Catch::Approx(w(1, 1) / T).margin(1e-12));
    }
    SECTION("stream <-> column layout round-trips") {
        MatrixXd cols = stream_to_cols(x, C, T);
        REQUIRE(cols.rows() == C * T);
        CHECK(cols(2 * T + 1, 1) == x(2, T + 1));
        MatrixXd back = cols_to_stream(cols, C, T);
        CHECK((back - x).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("adam drives a quadratic to its known minimum") {
    const int n = 50;
    std::mt19937_64 rng(17);
    std::normal_distribution<double> d(0.0, 2.0);
    std::vector<double> target(n), w(n, 0.0);
    for (auto& v : target) v = d(rng);

    Adam opt(n, 1e-2);
    std::vector<double> grad(n);
    for (int it = 0; it < 5000; ++it) {
        for (int i = 0; i < n; ++i) grad[i] = 2.0 * (w[i] - target[i]);
        opt.step(w, grad);
    }
    double dist = 0;
    for (int i = 0; i < n; ++i) dist += (w[i] - target[i]) * (w[i] - target[i]);
    CHECK(std::sqrt(dist) < 1e-3);
}

TEST_CASE("adam first step has the bias-corrected unit magnitude") {
    // With m_hat = g and v_hat = g^2, step 1 moves each weight by lr (up to eps).
    Adam opt(2, 0.5);
    std::vector<double> w{1.0, -3.0}, g{0.2, -4.0};
    opt.step(w, g);
    CHECK(w[0] == Catch::Approx(1.0 - 0.5).epsilon(1e-6));
    CHECK(w[1] == Catch::Approx(-3.0 + 0.5).epsilon(1e-6));
}
