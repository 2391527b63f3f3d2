#pragma once

#include <cmath>
#include <tuple>

#include "airt/errors.hpp"
#include "airt/types.hpp"

namespace airt {

/// Center each pixel's temporal signal by its own temporal mean.
/// Output rows are raster order: pixel n = y*N_x + x.
inline StandardizedSequence standardize(const InspectionSequence& seq) {
    seq.validate();
    StandardizedSequence out;
    out.n_t = seq.n_t;
    out.n_y = seq.n_y;
    out.n_x = seq.n_x;
    const size_t p = out.n_pixels();
    out.signals.resize(p * seq.n_t);
    out.pixel_means.resize(p);
    for (size_t n = 0; n < p; ++n) {
        double sum = 0.0;
        for (uint32_t k = 0; k < seq.n_t; ++k)
            sum += seq.frames[static_cast<size_t>(k) * p + n];
        const double mean = sum / seq.n_t;
        out.pixel_means[n] = mean;
        double* row = out.signal(n);
        for (uint32_t k = 0; k < seq.n_t; ++k)
            row[k] = seq.frames[static_cast<size_t>(k) * p + n] - mean;
    }
    return out;
}

/// Mean, population std, and pixel count over the clamped roi.
/// Pixel (x,y) counts as inside under the half-open convention: x1 <= x < x2.
inline std::tuple<double, double, int> extract_roi_stats(const Image2D& img, const BBox& roi) {
    const BBox r = roi.clamped(img.w, img.h);
    const int x0 = static_cast<int>(std::ceil(r.x1));
    const int x1 = static_cast<int>(std::ceil(r.x2));
    const int y0 = static_cast<int>(std::ceil(r.y1));
    const int y1 = static_cast<int>(std::ceil(r.y2));
    if (x0 >= x1 || y0 >= y1)
        throw numeric_error("extract_roi_stats: roi does not intersect image");
    double sum = 0.0;
    int count = 0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            sum += img.at(y, x);
            ++count;
        }
    const double mean = sum / count;
    double var = 0.0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            const double d = img.at(y, x) - mean;
            var += d * d;
        }
    return {mean, std::sqrt(var / count), count};
}

}  // namespace airt
