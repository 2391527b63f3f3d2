#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "airt/errors.hpp"
#include "airt/types.hpp"

// File formats:
//   .airt  little-endian: "AIRT" | u16 version=1 | u16 reserved=0 | u32 n_t | u32 n_y
//          | u32 n_x | f32 frame_rate  (24-byte header), then float32 frames,
//          frame-major then row-major.
//   .aimg  "AIMG" | u32 h | u32 w, then float32 row-major pixels.
//   labels JSON {"defect_box":[x1,y1,x2,y2], "sound_box":[...], "source": string}.

namespace airt {

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));  // assumes little-endian host
}

template <typename T>
T get_le(const std::string& buf, size_t offset, const char* what) {
    if (offset + sizeof(T) > buf.size())
        throw format_error(std::string("truncated file: ") + what + " at byte offset " +
                           std::to_string(offset));
    T value;
    std::memcpy(&value, buf.data() + offset, sizeof(T));
    return value;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("cannot open file: " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

inline void write_file(const std::string& path, const std::string& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw format_error("cannot open file for writing: " + path);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw format_error("write failed: " + path);
}

}  // namespace detail

inline void write_sequence(const InspectionSequence& seq, const std::string& path) {
    seq.validate();
    std::string out;
    out.reserve(24 + seq.frames.size() * 4);
    out.append("AIRT", 4);
    detail::put_le<uint16_t>(out, 1);  // version
    detail::put_le<uint16_t>(out, 0);  // reserved
    detail::put_le<uint32_t>(out, seq.n_t);
    detail::put_le<uint32_t>(out, seq.n_y);
    detail::put_le<uint32_t>(out, seq.n_x);
    detail::put_le<float>(out, seq.frame_rate_hz);
    for (float s : seq.frames) detail::put_le<float>(out, s);
    detail::write_file(path, out);
}

inline InspectionSequence read_sequence(const std::string& path) {
    const std::string buf = detail::read_file(path);
    if (buf.size() < 4 || buf.compare(0, 4, "AIRT") != 0)
        throw format_error("bad magic at byte offset 0, expected \"AIRT\": " + path);
    const auto version = detail::get_le<uint16_t>(buf, 4, "version");
    if (version != 1)
        throw format_error("unsupported version " + std::to_string(version) + " at byte offset 4");
    InspectionSequence seq;
    seq.n_t = detail::get_le<uint32_t>(buf, 8, "n_t");
    seq.n_y = detail::get_le<uint32_t>(buf, 12, "n_y");
    seq.n_x = detail::get_le<uint32_t>(buf, 16, "n_x");
    seq.frame_rate_hz = detail::get_le<float>(buf, 20, "frame_rate");
    const uint64_t count = static_cast<uint64_t>(seq.n_t) * seq.n_y * seq.n_x;
    if (count > (1ull << 32))
        throw format_error("dimension overflow at byte offset 8: " + std::to_string(count) +
                           " samples");
    if (buf.size() != 24 + count * 4)
        throw format_error("truncated payload at byte offset 24: expected " +
                           std::to_string(24 + count * 4) + " bytes, got " +
                           std::to_string(buf.size()));
    seq.frames.resize(count);
    std::memcpy(seq.frames.data(), buf.data() + 24, count * 4);
    seq.validate();
    return seq;
}

inline void write_aligned_image(const Image2D& img, const std::string& path) {
    std::string out;
    out.append("AIMG", 4);
    detail::put_le<uint32_t>(out, static_cast<uint32_t>(img.h));
    detail::put_le<uint32_t>(out, static_cast<uint32_t>(img.w));
    for (double p : img.v) detail::put_le<float>(out, static_cast<float>(p));
    detail::write_file(path, out);
}

inline Image2D read_aligned_image(const std::string& path) {
    const std::string buf = detail::read_file(path);
    if (buf.size() < 4 || buf.compare(0, 4, "AIMG") != 0)
        throw format_error("bad magic at byte offset 0, expected \"AIMG\": " + path);
    const auto h = detail::get_le<uint32_t>(buf, 4, "height");
    const auto w = detail::get_le<uint32_t>(buf, 8, "width");
    const uint64_t count = static_cast<uint64_t>(h) * w;
    if (buf.size() != 12 + count * 4)
        throw format_error("truncated payload at byte offset 12 in " + path);
    Image2D img(static_cast<int>(h), static_cast<int>(w));
    for (size_t i = 0; i < count; ++i) img.v[i] = detail::get_le<float>(buf, 12 + i * 4, "pixel");
    return img;
}

/// 8-bit PGM P5 with min-max normalization; constant images map to 128.
inline std::string encode_pgm(const Image2D& img) {
    double lo = img.v.empty() ? 0.0 : img.v[0], hi = lo;
    for (double p : img.v) {
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    std::string out = "P5\n" + std::to_string(img.w) + " " + std::to_string(img.h) + "\n255\n";
    const double span = hi - lo;
    for (double p : img.v) {
        int g = span > 0.0 ? static_cast<int>(std::lround((p - lo) / span * 255.0)) : 128;
        out.push_back(static_cast<char>(std::clamp(g, 0, 255)));
    }
    return out;
}

inline void write_pgm(const Image2D& img, const std::string& path) {
    detail::write_file(path, encode_pgm(img));
}

inline nlohmann::json bbox_to_json(const BBox& b) {
    return nlohmann::json::array({b.x1, b.y1, b.x2, b.y2});
}

inline BBox bbox_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 4)
        throw format_error("bbox must be a 4-element array");
    for (const auto& c : j)
        if (!c.is_number()) throw format_error("bbox coordinates must be numeric");
    return BBox{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

inline void write_labels(const RoiLabels& labels, const std::string& path) {
    labels.validate();
    nlohmann::json j{{"defect_box", bbox_to_json(labels.defect_box)},
                     {"sound_box", bbox_to_json(labels.sound_box)},
                     {"source", labels.source}};
    detail::write_file(path, j.dump(2) + "\n");
}

inline RoiLabels read_labels(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(detail::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw format_error("labels file is not valid JSON: " + std::string(e.what()));
    }
    RoiLabels labels;
    labels.defect_box = bbox_from_json(j.at("defect_box"));
    labels.sound_box = bbox_from_json(j.at("sound_box"));
    labels.source = j.value("source", "");
    labels.validate();
    return labels;
}

}  // namespace airt
