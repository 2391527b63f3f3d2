#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "airt/errors.hpp"

namespace airt {

/// 2-D image, row-major, double precision internally.
struct Image2D {
    int h = 0;
    int w = 0;
    std::vector<double> v;

    Image2D() = default;
    Image2D(int h_, int w_, double fill = 0.0) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, fill) {}

    double& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    double at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
    size_t size() const { return v.size(); }
};

/// Axis-aligned box, half-open pixel region [x1,x2) x [y1,y2).
struct BBox {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return std::max(0.0, width()) * std::max(0.0, height()); }
    double cx() const { return 0.5 * (x1 + x2); }
    double cy() const { return 0.5 * (y1 + y2); }

    bool valid() const { return x1 <= x2 && y1 <= y2; }

    BBox clamped(int img_w, int img_h) const {
        BBox b;
        b.x1 = std::clamp(x1, 0.0, static_cast<double>(img_w));
        b.x2 = std::clamp(x2, 0.0, static_cast<double>(img_w));
        b.y1 = std::clamp(y1, 0.0, static_cast<double>(img_h));
        b.y2 = std::clamp(y2, 0.0, static_cast<double>(img_h));
        return b;
    }

    bool overlaps(const BBox& o) const {
        return std::min(x2, o.x2) > std::max(x1, o.x1) && std::min(y2, o.y2) > std::max(y1, o.y1);
    }
};

/// Ground-truth defect region plus a manually (or automatically) chosen sound region.
struct RoiLabels {
    BBox defect_box;
    BBox sound_box;
    std::string source;

    void validate() const {
        if (!defect_box.valid() || !sound_box.valid())
            throw format_error("RoiLabels: degenerate box");
        if (defect_box.overlaps(sound_box))
            throw format_error("RoiLabels: defect_box and sound_box overlap");
        if (sound_box.area() < 25.0)
            throw format_error("RoiLabels: sound_box area < 25 pixels");
    }
};

/// Raw inspection sequence: N_t thermograms of size N_y x N_x.
/// Storage is float32 (camera bit depth); computation downstream is double.
struct InspectionSequence {
    std::vector<float> frames;  // frame-major, then row-major (k, y, x)
    uint32_t n_t = 0, n_y = 0, n_x = 0;
    float frame_rate_hz = 0.0f;
    std::map<std::string, std::string> meta;

    size_t frame_size() const { return static_cast<size_t>(n_y) * n_x; }

    float at(uint32_t k, uint32_t y, uint32_t x) const {
        return frames[(static_cast<size_t>(k) * n_y + y) * n_x + x];
    }
    float& at(uint32_t k, uint32_t y, uint32_t x) {
        return frames[(static_cast<size_t>(k) * n_y + y) * n_x + x];
    }

    Image2D frame(uint32_t k) const {
        Image2D img(static_cast<int>(n_y), static_cast<int>(n_x));
        const size_t off = static_cast<size_t>(k) * frame_size();
        for (size_t i = 0; i < frame_size(); ++i) img.v[i] = frames[off + i];
        return img;
    }

    void validate() const {
        if (n_t < 2 || n_y < 1 || n_x < 1)
            throw format_error("InspectionSequence: need n_t >= 2, n_y >= 1, n_x >= 1");
        if (frames.size() != static_cast<size_t>(n_t) * n_y * n_x)
            throw format_error("InspectionSequence: frames length does not match dimensions");
        if (!(frame_rate_hz > 0.0f))
            throw format_error("InspectionSequence: frame_rate_hz must be > 0");
        for (float s : frames)
            if (!std::isfinite(s)) throw numeric_error("InspectionSequence: non-finite sample");
    }
};

/// Per-pixel mean-centered temporal signals, raster order (n = y*N_x + x).
struct StandardizedSequence {
    std::vector<double> signals;      // P x N_t, row n is pixel n's centered response
    std::vector<double> pixel_means;  // length P
    uint32_t n_t = 0, n_y = 0, n_x = 0;

    size_t n_pixels() const { return static_cast<size_t>(n_y) * n_x; }
    const double* signal(size_t n) const { return signals.data() + n * n_t; }
    double* signal(size_t n) { return signals.data() + n * n_t; }
};

}  // namespace airt
