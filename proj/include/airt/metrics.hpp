#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include <json.hpp>

#include "airt/standardize.hpp"
#include "airt/types.hpp"

namespace airt {

struct MetricBundle {
    double contrast = 0.0;
    double snr_db = 0.0;
    bool snr_valid = true;
    double iou = 0.0;
    double ncd = 0.0;
    std::map<std::string, double> details;
    std::string snr_error;

    nlohmann::json to_json() const {
        nlohmann::json j{{"contrast", contrast}, {"iou", iou}, {"ncd", ncd}};
        if (snr_valid)
            j["snr_db"] = snr_db;
        else
            j["snr_error"] = snr_error;
        j["details"] = details;
        return j;
    }
};

/// |mean_d - mean_s| / (mean_d + mean_s) on the image shifted by its global
/// minimum, so the denominator is non-negative for signed inputs.
inline double contrast(const Image2D& img, const BBox& defect, const BBox& sound,
                       std::map<std::string, double>* details = nullptr) {
    double shift = img.v.empty() ? 0.0 : img.v[0];
    for (double p : img.v) shift = std::min(shift, p);
    auto [md, sd_d, nd] = extract_roi_stats(img, defect);
    auto [ms, sd_s, ns] = extract_roi_stats(img, sound);
    md -= shift;
    ms -= shift;
    if (details) {
        (*details)["contrast_shift"] = shift;
        (*details)["mean_defect_shifted"] = md;
        (*details)["mean_sound_shifted"] = ms;
        (*details)["n_defect"] = nd;
        (*details)["n_sound"] = ns;
    }
    const double denom = md + ms;
    if (denom == 0.0) return 0.0;
    return std::abs(md - ms) / denom;
}

/// 20*log10(|mean_d - mean_s| / sigma_s), amplitude-ratio dB convention.
inline double snr_db(const Image2D& img, const BBox& defect, const BBox& sound,
                     std::map<std::string, double>* details = nullptr) {
    auto [md, sd_d, nd] = extract_roi_stats(img, defect);
    auto [ms, sigma_s, ns] = extract_roi_stats(img, sound);
    if (details) {
        (*details)["mean_defect"] = md;
        (*details)["mean_sound"] = ms;
        (*details)["sigma_s"] = sigma_s;
    }
    if (sigma_s == 0.0) throw numeric_error("snr_db: degenerate sound region (sigma_s = 0)");
    return 20.0 * std::log10(std::abs(md - ms) / sigma_s);
}

/// Intersection over union of two half-open boxes; 0 when disjoint.
inline double iou(const BBox& a, const BBox& b) {
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

/// Center distance normalized by the ground-truth box diagonal.
inline double ncd(const BBox& pred, const BBox& gt) {
    const double diag = std::sqrt(gt.width() * gt.width() + gt.height() * gt.height());
    if (diag == 0.0) throw numeric_error("ncd: ground-truth box has zero diagonal");
    const double dx = pred.cx() - gt.cx();
    const double dy = pred.cy() - gt.cy();
    return std::sqrt(dx * dx + dy * dy) / diag;
}

inline MetricBundle evaluate(const Image2D& img, const BBox& pred, const RoiLabels& labels) {
    MetricBundle m;
    m.contrast = contrast(img, labels.defect_box, labels.sound_box, &m.details);
    try {
        m.snr_db = snr_db(img, labels.defect_box, labels.sound_box, &m.details);
    } catch (const numeric_error& e) {
        m.snr_valid = false;
        m.snr_error = e.what();
    }
    m.iou = iou(pred, labels.defect_box);
    m.ncd = ncd(pred, labels.defect_box);
    return m;
}

}  // namespace airt
