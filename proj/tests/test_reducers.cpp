#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <random>
#include <sstream>

#include "airt/metrics.hpp"
#include "airt/reducers.hpp"

using namespace airt;

namespace {

InspectionSequence make_seq(int n_t, int n_y, int n_x, float rate = 10.0f) {
    InspectionSequence s;
    s.n_t = n_t;
    s.n_y = n_y;
    s.n_x = n_x;
    s.frame_rate_hz = rate;
    s.frames.assign(static_cast<size_t>(n_t) * n_y * n_x, 0.0f);
    return s;
}

std::vector<double> parse_csv(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

}  // namespace

TEST_CASE("log-log polynomial fit recovers a pure power law exactly") {
    // ln T = 2.0 - 0.5 ln t sampled on 40 points: degree-5 fit must return the
    // line and zero out the higher orders
    const int n = 40;
    Eigen::VectorXd u(n);
    Eigen::MatrixXd y(n, 2);
    for (int i = 0; i < n; ++i) {
        u[i] = std::log(0.1 * (i + 1));
        y(i, 0) = 2.0 - 0.5 * u[i];
        y(i, 1) = -1.0 - 0.5 * u[i];  // same slope, different amplitude
    }
    auto c = detail::polyfit_multi(u, y, 5);
    REQUIRE(c.rows() == 6);
    for (int col = 0; col < 2; ++col) {
        CHECK(c(1, col) == Catch::Approx(-0.5).margin(1e-6));
        for (int j = 2; j <= 5; ++j) CHECK(std::abs(c(j, col)) < 1e-6);
    }
    CHECK(c(0, 0) == Catch::Approx(2.0).margin(1e-6));
    CHECK(c(0, 1) == Catch::Approx(-1.0).margin(1e-6));
}

TEST_CASE("polynomial derivative helpers agree with central differences") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Eigen::VectorXd c(6);
    for (int i = 0; i < 6; ++i) c[i] = uni(rng);
    const double u = 0.37, eps = 1e-6;
    const double d1 = (detail::polyval(c, u + eps) - detail::polyval(c, u - eps)) / (2 * eps);
    const double d2 = (detail::polyval(c, u + eps) - 2 * detail::polyval(c, u) +
                       detail::polyval(c, u - eps)) /
                      (eps * eps);
    CHECK(detail::polyval_d1(c, u) == Catch::Approx(d1).margin(1e-6));
    CHECK(detail::polyval_d2(c, u) == Catch::Approx(d2).margin(1e-3));
}

TEST_CASE("a higher-degree fit never fits worse than a nested lower degree") {
    const int n = 30;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> noise(0.0, 0.05);
    Eigen::VectorXd u(n);
    Eigen::MatrixXd y(n, 1);
    for (int i = 0; i < n; ++i) {
        u[i] = std::log(0.1 * (i + 1));
        y(i, 0) = 1.0 + 0.3 * u[i] - 0.2 * u[i] * u[i] + noise(rng);
    }
    auto resid = [&](int degree) {
        auto c = detail::polyfit_multi(u, y, degree);
        double r = 0;
        for (int i = 0; i < n; ++i) {
            double diff = y(i, 0) - detail::polyval(c.col(0), u[i]);
            r += diff * diff;
        }
        return r;
    };
    CHECK(resid(5) <= resid(2) + 1e-12);
    CHECK(resid(2) < n * 0.05 * 0.05 * 3);  // degree 2 already captures the truth
}

TEST_CASE("tsr: spatially uniform input gives spatially constant maps") {
    auto seq = make_seq(60, 6, 6);
    for (int k = 0; k < 60; ++k) {
        const float v = 300.0f + 20.0f / std::sqrt(float(k) * 0.1f + 0.05f);
        for (size_t i = 0; i < 36; ++i) seq.frames[size_t(k) * 36 + i] = v;
    }
    auto r = reduce_tsr(seq, 5);
    REQUIRE(r.images.size() == 8);  // 6 coefficients + 1st + 2nd derivative maps
    CHECK(r.selected == 7);
    for (const auto& img : r.images)
        for (double v : img.v) CHECK(v == Catch::Approx(img.v[0]).margin(1e-9));
    // surface cooling after a flash: negative log-log slope at the window center
    CHECK(r.images[6].v[0] < 0.0);
}

TEST_CASE("tsr: identical pixels give identical maps regardless of position") {
    auto seq = make_seq(40, 2, 2);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> noise(0.0, 0.01);
    for (int k = 0; k < 40; ++k) {
        const double base = 5.0 / std::sqrt(k * 0.1 + 0.1);
        seq.frames[size_t(k) * 4 + 0] = float(base);
        seq.frames[size_t(k) * 4 + 3] = float(base);
        seq.frames[size_t(k) * 4 + 1] = float(base * 2 + noise(rng));
        seq.frames[size_t(k) * 4 + 2] = float(base * 0.5);
    }
    auto r = reduce_tsr(seq);
    for (const auto& img : r.images) CHECK(img.at(0, 0) == Catch::Approx(img.at(1, 1)).margin(1e-9));
}

TEST_CASE("tsr: too few frames is an error") {
    auto seq = make_seq(5, 2, 2);
    for (size_t i = 0; i < seq.frames.size(); ++i) seq.frames[i] = float(i);
    REQUIRE_THROWS_AS(reduce_tsr(seq, 5), numeric_error);
}

TEST_CASE("raw reducer picks the frame with the best roi contrast") {
    auto seq = make_seq(10, 8, 8);
    RoiLabels labels;
    labels.defect_box = BBox{1, 1, 4, 4};
    labels.sound_box = BBox{1, 5, 8, 8};
    // frame 6 carries the strongest defect signature
    for (int k = 0; k < 10; ++k) {
        const float amp = (k == 6) ? 5.0f : 0.5f;
        for (int y = 1; y < 4; ++y)
            for (int x = 1; x < 4; ++x) seq.at(k, y, x) = amp;
        seq.at(k, 7, 7) = 1.0f;  // keep contrast denominators alive
    }
    auto r = reduce_raw(seq, labels);
    REQUIRE(r.images.size() == 10);
    CHECK(r.selected == 6);
    CHECK(r.selected_image().at(2, 2) == Catch::Approx(5.0));
}

TEST_CASE("pct: sign-split rank-one sequence yields the sign pattern as eof 1") {
    const int n_t = 30, n = 6;
    auto seq = make_seq(n_t, n, n);
    std::vector<double> w(n_t);
    for (int k = 0; k < n_t; ++k) w[k] = std::sin(0.4 * k) + 0.3 * std::sin(1.1 * k);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double a = (x < n / 2) ? 1.5 : -0.7;  // left half positive
            for (int k = 0; k < n_t; ++k) seq.at(k, y, x) = float(10.0 + a * w[k]);
        }
    auto r = reduce_pct(seq, 3);
    REQUIRE(r.images.size() == 3);
    // cosine similarity of EOF1 against the +-1 sign pattern
    double dot = 0, na = 0, nb = 0;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double s = (x < n / 2) ? 1.0 : -1.0;
            const double e = r.images[0].at(y, x);
            dot += s * e;
            na += s * s;
            nb += e * e;
        }
    CHECK(std::abs(dot) / std::sqrt(na * nb) > 0.999);
}

TEST_CASE("pct agrees with an independent dense svd of the standardized matrix") {
    const int n_t = 25, h = 5, w = 6, p = h * w;
    auto seq = make_seq(n_t, h, w);
    std::mt19937_64 rng(31);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (auto& v : seq.frames) v = float(300.0 + noise(rng));

    // oracle: standardize by hand, full SVD, skewness-fixed right singular vectors
    Eigen::MatrixXd a(n_t, p);
    for (int i = 0; i < p; ++i) {
        double mean = 0;
        for (int k = 0; k < n_t; ++k) mean += seq.frames[size_t(k) * p + i];
        mean /= n_t;
        double var = 0;
        for (int k = 0; k < n_t; ++k) {
            const double d = seq.frames[size_t(k) * p + i] - mean;
            var += d * d;
        }
        var /= n_t;
        for (int k = 0; k < n_t; ++k)
            a(k, i) = (seq.frames[size_t(k) * p + i] - mean) / std::sqrt(var + 1e-12);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);

    const int n_c = 4;
    auto r = reduce_pct(seq, n_c);
    auto sigmas = parse_csv(r.params.at("singular_values"));
    REQUIRE(sigmas.size() == n_c);
    for (int c = 0; c < n_c; ++c) {
        CHECK(sigmas[c] == Catch::Approx(svd.singularValues()[c]).margin(1e-6));
        if (c > 0) CHECK(sigmas[c] <= sigmas[c - 1] + 1e-12);
        Eigen::VectorXd v = svd.matrixV().col(c);
        double m = v.mean(), m3 = 0;
        for (int i = 0; i < p; ++i) m3 += std::pow(v[i] - m, 3);
        if (m3 < 0) v = -v;
        for (int i = 0; i < p; ++i)
            CHECK(r.images[c].v[i] == Catch::Approx(v[i]).margin(1e-6));
    }

    SECTION("eofs are orthonormal") {
        for (int c1 = 0; c1 < n_c; ++c1)
            for (int c2 = 0; c2 <= c1; ++c2) {
                double dot = 0;
                for (int i = 0; i < p; ++i) dot += r.images[c1].v[i] * r.images[c2].v[i];
                CHECK(dot == Catch::Approx(c1 == c2 ? 1.0 : 0.0).margin(1e-9));
            }
    }

    SECTION("truncated reconstruction error matches the discarded spectrum") {
        // keep n_c terms; squared residual = sum of remaining squared singular values
        Eigen::MatrixXd recon = Eigen::MatrixXd::Zero(n_t, p);
        for (int c = 0; c < n_c; ++c)
            recon += svd.singularValues()[c] * svd.matrixU().col(c) *
                     svd.matrixV().col(c).transpose();
        double expected = 0;
        for (int c = n_c; c < svd.singularValues().size(); ++c)
            expected += svd.singularValues()[c] * svd.singularValues()[c];
        CHECK((a - recon).squaredNorm() == Catch::Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("pct: label-driven component selection picks the high-contrast eof") {
    const int n_t = 30, n = 8;
    auto seq = make_seq(n_t, n, n);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> noise(0.0, 0.05);
    for (int k = 0; k < n_t; ++k)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                double v = 300.0 + std::exp(-0.1 * k) * 2.0 + noise(rng);
                if (y < 3 && x < 3) v += 1.5 * std::exp(-0.05 * k);  // defect-like corner
                seq.at(k, y, x) = float(v);
            }
    RoiLabels labels;
    labels.defect_box = BBox{0, 0, 3, 3};
    labels.sound_box = BBox{3, 3, 8, 8};
    auto r = reduce_pct(seq, 4, &labels);
    CHECK(r.params.at("selection") == "max_contrast");
    const double sel = contrast(r.selected_image(), labels.defect_box, labels.sound_box);
    for (const auto& img : r.images)
        CHECK(sel >= contrast(img, labels.defect_box, labels.sound_box) - 1e-12);

    auto r2 = reduce_pct(seq, 4);
    CHECK(r2.selected == 1);
}

TEST_CASE("pct: degenerate inputs raise numeric errors") {
    auto seq = make_seq(20, 4, 4);
    for (auto& v : seq.frames) v = 7.0f;
    REQUIRE_THROWS_AS(reduce_pct(seq, 3), numeric_error);

    auto ok = make_seq(20, 4, 4);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (auto& v : ok.frames) v = float(noise(rng));
    REQUIRE_THROWS_AS(reduce_pct(ok, 0), numeric_error);
    REQUIRE_THROWS_AS(reduce_pct(ok, 17), numeric_error);  // > min(n_t, p) = 16
}
