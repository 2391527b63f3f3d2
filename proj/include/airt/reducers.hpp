#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "airt/errors.hpp"
#include "airt/metrics.hpp"
#include "airt/standardize.hpp"
#include "airt/types.hpp"

namespace airt {

enum class ReductionMethod { raw_best_frame, tsr, pct };

inline std::string to_string(ReductionMethod m) {
    switch (m) {
        case ReductionMethod::raw_best_frame: return "raw";
        case ReductionMethod::tsr: return "tsr";
        case ReductionMethod::pct: return "pct";
    }
    return "?";
}

struct ReductionResult {
    std::vector<Image2D> images;
    ReductionMethod method = ReductionMethod::raw_best_frame;
    int selected = 0;
    std::map<std::string, std::string> params;

    const Image2D& selected_image() const { return images[selected]; }
};

/// All frames; selected = the frame with maximum contrast against the labels
/// (first index wins ties). Label-aware selection gives the baseline its best
/// case.
inline ReductionResult reduce_raw(const InspectionSequence& seq, const RoiLabels& labels) {
    seq.validate();
    ReductionResult r;
    r.method = ReductionMethod::raw_best_frame;
    double best = -1.0;
    for (uint32_t k = 0; k < seq.n_t; ++k) {
        r.images.push_back(seq.frame(k));
        const double c = contrast(r.images.back(), labels.defect_box, labels.sound_box);
        if (c > best) {
            best = c;
            r.selected = static_cast<int>(k);
        }
    }
    r.params["selection"] = "max_contrast";
    r.params["selected_contrast"] = std::to_string(best);
    return r;
}

namespace detail {

/// Least-squares polynomial fit y ~ sum_j c_j u^j for shared abscissae and
/// many right-hand sides (one column per pixel).
inline Eigen::MatrixXd polyfit_multi(const Eigen::VectorXd& u, const Eigen::MatrixXd& y,
                                     int degree) {
    Eigen::MatrixXd design(u.size(), degree + 1);
    for (int j = 0; j <= degree; ++j)
        design.col(j) = u.array().pow(static_cast<double>(j));
    return design.colPivHouseholderQr().solve(y);
}

inline double polyval(const Eigen::VectorXd& c, double u) {
    double acc = 0.0;
    for (int j = static_cast<int>(c.size()) - 1; j >= 0; --j) acc = acc * u + c[j];
    return acc;
}

inline double polyval_d1(const Eigen::VectorXd& c, double u) {
    double acc = 0.0;
    for (int j = static_cast<int>(c.size()) - 1; j >= 1; --j) acc = acc * u + j * c[j];
    return acc;
}

inline double polyval_d2(const Eigen::VectorXd& c, double u) {
    double acc = 0.0;
    for (int j = static_cast<int>(c.size()) - 1; j >= 2; --j) acc = acc * u + j * (j - 1) * c[j];
    return acc;
}

}  // namespace detail

/// Per-pixel polynomial fit of ln(dT) vs ln(t) over the post-peak window.
/// Images: coefficient maps c_0..c_degree, then first- and second-derivative
/// maps evaluated at log-mid-time; selected = the second-derivative map.
inline ReductionResult reduce_tsr(const InspectionSequence& seq, int degree = 5) {
    seq.validate();
    const size_t p = seq.frame_size();

    // peak of per-frame spatial mean; post-pulse window starts just after it
    uint32_t k_peak = 0;
    double peak = -1e300;
    for (uint32_t k = 0; k < seq.n_t; ++k) {
        double s = 0.0;
        for (size_t i = 0; i < p; ++i) s += seq.frames[static_cast<size_t>(k) * p + i];
        if (s / p > peak) {
            peak = s / p;
            k_peak = k;
        }
    }
    uint32_t k0 = k_peak + 1;
    if (seq.n_t - k0 < static_cast<uint32_t>(degree + 2)) {
        if (seq.n_t < static_cast<uint32_t>(degree + 2))
            throw numeric_error("reduce_tsr: need at least degree+2 frames");
        k0 = seq.n_t - (degree + 2);
    }
    const int n = static_cast<int>(seq.n_t - k0);

    // Synthetic sequences carry no pre-pulse frames, so the ambient offset is
    // the global minimum with a small positive margin keeping every log-domain
    // sample defined.
    float lo = seq.frames[0], hi = seq.frames[0];
    for (float s : seq.frames) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    const double ambient = lo - 1e-6 * std::max(1.0, double(hi) - lo);

    const double frame_dt = 1.0 / seq.frame_rate_hz;
    Eigen::VectorXd u(n);
    for (int i = 0; i < n; ++i) u[i] = std::log((i + 1) * frame_dt);

    Eigen::MatrixXd logs(n, p);
    std::vector<char> fallback(p, 0);
    size_t n_fallback = 0;
    for (size_t i = 0; i < p; ++i) {
        for (int k = 0; k < n; ++k) {
            const double dT = seq.frames[(k0 + k) * p + i] - ambient;
            if (dT <= 0.0) {
                fallback[i] = 1;
                break;
            }
            logs(k, i) = std::log(dT);
        }
        if (fallback[i]) {
            logs.col(i).setZero();
            ++n_fallback;
        }
    }

    Eigen::MatrixXd coeffs = detail::polyfit_multi(u, logs, degree);
    for (size_t i = 0; i < p; ++i)
        if (fallback[i]) coeffs.col(i).setZero();

    const double u_mid = 0.5 * (u[0] + u[n - 1]);
    ReductionResult r;
    r.method = ReductionMethod::tsr;
    for (int j = 0; j <= degree + 2; ++j)
        r.images.emplace_back(static_cast<int>(seq.n_y), static_cast<int>(seq.n_x));
    for (size_t i = 0; i < p; ++i) {
        const Eigen::VectorXd c = coeffs.col(i);
        for (int j = 0; j <= degree; ++j) r.images[j].v[i] = c[j];
        r.images[degree + 1].v[i] = fallback[i] ? 0.0 : detail::polyval_d1(c, u_mid);
        r.images[degree + 2].v[i] = fallback[i] ? 0.0 : detail::polyval_d2(c, u_mid);
    }
    r.selected = degree + 2;
    r.params["degree"] = std::to_string(degree);
    r.params["window_start_frame"] = std::to_string(k0);
    r.params["ambient_mode"] = "global_min_margin";
    r.params["fallback_pixels"] = std::to_string(n_fallback);
    return r;
}

/// Principal component thermography: per-pixel standardization (centering plus
/// unit-variance scaling with epsilon guard), then the leading empirical
/// orthogonal functions of the N_t x P matrix. Signs fixed by non-negative
/// skewness. Selected = best-|contrast| EOF when labels are given, else 1.
inline ReductionResult reduce_pct(const InspectionSequence& seq, int n_components = 10,
                                  const RoiLabels* labels = nullptr) {
    seq.validate();
    const size_t p = seq.frame_size();
    if (n_components < 1 ||
        n_components > static_cast<int>(std::min<size_t>(seq.n_t, p)))
        throw numeric_error("reduce_pct: n_components out of range");

    const StandardizedSequence std_seq = standardize(seq);
    Eigen::MatrixXd a(seq.n_t, p);
    bool any_nonzero = false;
    for (size_t i = 0; i < p; ++i) {
        double var = 0.0;
        const double* sig = std_seq.signal(i);
        for (uint32_t k = 0; k < seq.n_t; ++k) var += sig[k] * sig[k];
        var /= seq.n_t;
        if (var > 0.0) any_nonzero = true;
        const double scale = 1.0 / std::sqrt(var + 1e-12);
        for (uint32_t k = 0; k < seq.n_t; ++k) a(k, i) = sig[k] * scale;
    }
    if (!any_nonzero) throw numeric_error("reduce_pct: degenerate (all-zero) sequence");

    // temporal covariance route: eig of A A^T, EOF_i = A^T u_i / sigma_i
    const Eigen::MatrixXd cov = a * a.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw numeric_error("reduce_pct: eigendecomposition failed");

    ReductionResult r;
    r.method = ReductionMethod::pct;
    std::string singulars;
    const int n_t = static_cast<int>(seq.n_t);
    for (int c = 0; c < n_components; ++c) {
        const int idx = n_t - 1 - c;  // eigenvalues ascend; walk from the top
        const double sigma = std::sqrt(std::max(0.0, eig.eigenvalues()[idx]));
        if (sigma <= 0.0) throw numeric_error("reduce_pct: rank too low for n_components");
        Eigen::VectorXd eof = (a.transpose() * eig.eigenvectors().col(idx)) / sigma;
        // remove SVD sign ambiguity: non-negative skewness
        const double mean = eof.mean();
        double m2 = 0.0, m3 = 0.0;
        for (int i = 0; i < eof.size(); ++i) {
            const double d = eof[i] - mean;
            m2 += d * d;
            m3 += d * d * d;
        }
        if (m3 < 0.0) eof = -eof;
        Image2D img(static_cast<int>(seq.n_y), static_cast<int>(seq.n_x));
        for (size_t i = 0; i < p; ++i) img.v[i] = eof[static_cast<Eigen::Index>(i)];
        r.images.push_back(std::move(img));
        singulars += (c ? "," : "") + std::to_string(sigma);
    }
    r.params["singular_values"] = singulars;

    if (labels) {
        double best = -1.0;
        for (size_t c = 0; c < r.images.size(); ++c) {
            const double ctr = contrast(r.images[c], labels->defect_box, labels->sound_box);
            if (ctr > best) {
                best = ctr;
                r.selected = static_cast<int>(c);
            }
        }
        r.params["selection"] = "max_contrast";
    } else {
        r.selected = r.images.size() > 1 ? 1 : 0;
        r.params["selection"] = "default_index_1";
    }
    return r;
}

}  // namespace airt
