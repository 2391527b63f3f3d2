#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "airt/errors.hpp"
#include "airt/metrics.hpp"
#include "airt/seqio.hpp"
#include "airt/types.hpp"

namespace airt {

struct Prompt {
    std::string text =
        "Inspect the thermal image of a CFRP sheet and output the defect bounding box as "
        "<x1, y1, x2, y2>.";
};

struct Detection {
    BBox box;
    double confidence = 0.0;
    double support = 0.0;  // NMS cumulative support; 0 outside nms_ensemble
    std::string backend_id;
    double latency_s = 0.0;
};

enum class BackendKind { mock, http };

struct BackendConfig {
    BackendKind kind = BackendKind::mock;
    std::string endpoint_url;
    double timeout_s = 10.0;
    int retries = 2;
    Prompt prompt;
};

namespace detail {

/// Otsu threshold over a 256-bin histogram of values in [0,1].
inline double otsu_threshold(const std::vector<double>& normalized) {
    std::array<int, 256> hist{};
    for (double p : normalized) {
        int bin = static_cast<int>(p * 255.0);
        hist[std::clamp(bin, 0, 255)]++;
    }
    const double total = static_cast<double>(normalized.size());
    double sum_all = 0.0;
    for (int i = 0; i < 256; ++i) sum_all += i * hist[i];
    double w0 = 0.0, sum0 = 0.0, best_var = -1.0;
    int best_t = 127;
    for (int t = 0; t < 255; ++t) {
        w0 += hist[t];
        if (w0 == 0.0) continue;
        const double w1 = total - w0;
        if (w1 == 0.0) break;
        sum0 += t * hist[t];
        const double m0 = sum0 / w0;
        const double m1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best_var) {
            best_var = between;
            best_t = t;
        }
    }
    return (best_t + 0.5) / 255.0;
}

struct Component {
    int area = 0;
    int min_x = 0, min_y = 0, max_x = 0, max_y = 0;
    double sum = 0.0;
};

/// Largest 8-connected component of the mask; returns area 0 if mask empty.
inline Component largest_component(const std::vector<char>& mask, const Image2D& img) {
    const int h = img.h, w = img.w;
    std::vector<int> label(mask.size(), -1);
    Component best;
    std::vector<int> stack;
    int next = 0;
    for (int i = 0; i < static_cast<int>(mask.size()); ++i) {
        if (!mask[i] || label[i] >= 0) continue;
        Component c{0, w, h, -1, -1, 0.0};
        stack.push_back(i);
        label[i] = next;
        while (!stack.empty()) {
            const int p = stack.back();
            stack.pop_back();
            const int y = p / w, x = p % w;
            c.area++;
            c.sum += img.v[p];
            c.min_x = std::min(c.min_x, x);
            c.max_x = std::max(c.max_x, x);
            c.min_y = std::min(c.min_y, y);
            c.max_y = std::max(c.max_y, y);
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                    const int q = ny * w + nx;
                    if (mask[q] && label[q] < 0) {
                        label[q] = next;
                        stack.push_back(q);
                    }
                }
        }
        // tie-break on area by top-left position for determinism
        if (c.area > best.area ||
            (c.area == best.area && (c.min_x < best.min_x ||
                                     (c.min_x == best.min_x && c.min_y < best.min_y))))
            best = c;
        ++next;
    }
    return best;
}

}  // namespace detail

/// Deterministic local oracle: Otsu threshold on the min-max-normalized image,
/// largest 8-connected blob, with automatic polarity selection (the polarity
/// whose largest component fills its bounding box more compactly wins).
inline Detection mock_localize(const Image2D& img) {
    double lo = img.v.empty() ? 0.0 : img.v[0], hi = lo, sum = 0.0;
    for (double p : img.v) {
        lo = std::min(lo, p);
        hi = std::max(hi, p);
        sum += p;
    }
    if (!(hi > lo)) throw numeric_error("mock_localize: no structure (constant image)");

    std::vector<double> norm(img.v.size());
    for (size_t i = 0; i < img.v.size(); ++i) norm[i] = (img.v[i] - lo) / (hi - lo);
    const double thresh = detail::otsu_threshold(norm);

    std::vector<char> bright(norm.size()), dark(norm.size());
    for (size_t i = 0; i < norm.size(); ++i) {
        bright[i] = norm[i] > thresh;
        dark[i] = norm[i] <= thresh;
    }
    const auto cb = detail::largest_component(bright, img);
    const auto cd = detail::largest_component(dark, img);

    auto compactness = [](const detail::Component& c) {
        if (c.area == 0) return 0.0;
        const double box = static_cast<double>(c.max_x - c.min_x + 1) * (c.max_y - c.min_y + 1);
        return c.area / box;
    };
    // A component whose bounding box spans most of the image is background
    // (e.g. the sound region surrounding an anomaly); it only wins if the
    // other side is empty or equally image-filling.
    auto box_cover = [&](const detail::Component& c) {
        if (c.area == 0) return 0.0;
        const double box = static_cast<double>(c.max_x - c.min_x + 1) * (c.max_y - c.min_y + 1);
        return box / (static_cast<double>(img.h) * img.w);
    };
    const bool b_fg = cb.area > 0 && box_cover(cb) <= 0.5;
    const bool d_fg = cd.area > 0 && box_cover(cd) <= 0.5;
    const detail::Component& c =
        (b_fg == d_fg) ? (compactness(cb) >= compactness(cd) ? cb : cd) : (b_fg ? cb : cd);
    if (c.area == 0) throw numeric_error("mock_localize: no structure");

    const double gmean = sum / img.v.size();
    double gvar = 0.0;
    for (double p : img.v) gvar += (p - gmean) * (p - gmean);
    const double gstd = std::sqrt(gvar / img.v.size());

    Detection d;
    d.box = BBox{static_cast<double>(c.min_x), static_cast<double>(c.min_y),
                 static_cast<double>(c.max_x + 1), static_cast<double>(c.max_y + 1)};
    const double cmean = c.sum / c.area;
    d.confidence = gstd > 0.0 ? std::clamp(std::abs(cmean - gmean) / gstd, 0.0, 1.0) : 0.0;
    d.backend_id = "mock";
    return d;
}

namespace detail {

inline std::string base64_encode(const std::string& in) {
    static const char tbl[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((in.size() + 2) / 3 * 4);
    for (size_t i = 0; i < in.size(); i += 3) {
        uint32_t n = static_cast<uint8_t>(in[i]) << 16;
        if (i + 1 < in.size()) n |= static_cast<uint8_t>(in[i + 1]) << 8;
        if (i + 2 < in.size()) n |= static_cast<uint8_t>(in[i + 2]);
        out.push_back(tbl[(n >> 18) & 63]);
        out.push_back(tbl[(n >> 12) & 63]);
        out.push_back(i + 1 < in.size() ? tbl[(n >> 6) & 63] : '=');
        out.push_back(i + 2 < in.size() ? tbl[n & 63] : '=');
    }
    return out;
}

struct ParsedUrl {
    std::string host_port;  // scheme://host:port, as httplib::Client expects
    std::string path;
};

inline ParsedUrl parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw transport_error("unparseable endpoint URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

inline Detection http_detect(const Image2D& img, const BackendConfig& cfg) {
    const auto parsed = parse_url(cfg.endpoint_url);
    nlohmann::json body{{"image", base64_encode(encode_pgm(img))}, {"prompt", cfg.prompt.text}};
    const std::string payload = body.dump();

    std::string last_err;
    double backoff_s = 0.5;
    for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::duration<double>(backoff_s));
            backoff_s *= 2.0;
        }
        httplib::Client client(parsed.host_port);
        client.set_connection_timeout(std::chrono::duration<double>(cfg.timeout_s));
        client.set_read_timeout(std::chrono::duration<double>(cfg.timeout_s));
        auto res = client.Post(parsed.path, payload, "application/json");
        if (!res) {
            last_err = httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_err = "HTTP status " + std::to_string(res->status);
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::parse_error& e) {
            throw protocol_error("response is not valid JSON: " + std::string(e.what()),
                                 res->body);
        }
        if (!j.contains("bbox"))
            throw protocol_error("response missing \"bbox\"", res->body);
        BBox box;
        try {
            box = bbox_from_json(j["bbox"]);
        } catch (const format_error& e) {
            throw protocol_error(e.what(), res->body);
        }
        if (!box.valid())
            throw protocol_error("bbox has x1 > x2 or y1 > y2", res->body);
        Detection d;
        d.box = box.clamped(img.w, img.h);
        d.confidence = 0.5;  // default when the VLM reports none
        if (j.contains("confidence")) {
            if (!j["confidence"].is_number())
                throw protocol_error("confidence is not numeric", res->body);
            d.confidence = std::clamp(j["confidence"].get<double>(), 0.0, 1.0);
        }
        d.backend_id = "http:" + cfg.endpoint_url;
        return d;
    }
    throw transport_error("detection request failed after " + std::to_string(cfg.retries + 1) +
                          " attempts: " + last_err);
}

}  // namespace detail

inline Detection detect(const Image2D& img, const BackendConfig& cfg) {
    for (double p : img.v)
        if (!std::isfinite(p)) throw numeric_error("detect: non-finite image");
    const auto t0 = std::chrono::steady_clock::now();
    Detection d = cfg.kind == BackendKind::mock ? mock_localize(img) : detail::http_detect(img, cfg);
    d.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return d;
}

/// Greedy NMS by confidence; returns the surviving box with the highest
/// cumulative support (own confidence plus confidences of suppressed boxes).
inline Detection nms_merge(std::vector<Detection> dets, double iou_thresh) {
    if (dets.empty()) throw numeric_error("nms_merge: no detections");
    // sort by confidence desc; ties by lower x1, then lower y1
    std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        if (a.box.x1 != b.box.x1) return a.box.x1 < b.box.x1;
        return a.box.y1 < b.box.y1;
    });
    std::vector<char> suppressed(dets.size(), 0);
    std::vector<double> support(dets.size(), 0.0);
    for (size_t i = 0; i < dets.size(); ++i) {
        if (suppressed[i]) continue;
        support[i] = dets[i].confidence;
        for (size_t j = i + 1; j < dets.size(); ++j) {
            if (suppressed[j]) continue;
            if (iou(dets[i].box, dets[j].box) > iou_thresh) {
                suppressed[j] = 1;
                support[i] += dets[j].confidence;
            }
        }
    }
    size_t winner = 0;
    double best = -1.0;
    for (size_t i = 0; i < dets.size(); ++i) {
        if (suppressed[i]) continue;
        if (support[i] > best) {
            best = support[i];
            winner = i;
        }
    }
    Detection result = dets[winner];
    result.support = best;
    return result;
}

/// Detect on every latent image, greedy NMS by confidence, return the survivor
/// with the highest cumulative support (its own confidence plus the
/// confidences of the boxes it suppressed).
inline Detection nms_ensemble(const std::vector<Image2D>& latent_images, const BackendConfig& cfg,
                              double iou_thresh = 0.5) {
    if (latent_images.empty()) throw numeric_error("nms_ensemble: empty latent stack");
    std::vector<Detection> dets;
    std::vector<std::string> failures;
    double total_latency = 0.0;
    for (size_t i = 0; i < latent_images.size(); ++i) {
        try {
            Detection d = detect(latent_images[i], cfg);
            total_latency += d.latency_s;
            dets.push_back(std::move(d));
        } catch (const std::exception& e) {
            failures.push_back("image " + std::to_string(i) + ": " + e.what());
        }
    }
    if (dets.empty()) {
        std::string msg = "nms_ensemble: all per-image detections failed:";
        for (const auto& f : failures) msg += "\n  " + f;
        throw numeric_error(msg);
    }
    Detection result = nms_merge(dets, iou_thresh);
    result.backend_id += "+nms";
    result.latency_s = total_latency;
    return result;
}

}  // namespace airt
