#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "airt/errors.hpp"
#include "airt/seqio.hpp"
#include "airt/types.hpp"

namespace airt {

/// Defect as a half-open cell box with a thermal-diffusivity multiplier;
/// alpha_scale < 1 models a delamination / air gap.
struct DefectSpec {
    int x1 = 0, y1 = 0, z1 = 0, x2 = 0, y2 = 0, z2 = 0;
    double alpha_scale = 0.1;
};

enum class ExcitationMode { flash_front, long_pulse_front, flash_back, long_pulse_back };

inline std::string to_string(ExcitationMode m) {
    switch (m) {
        case ExcitationMode::flash_front: return "flash_front";
        case ExcitationMode::long_pulse_front: return "long_pulse_front";
        case ExcitationMode::flash_back: return "flash_back";
        case ExcitationMode::long_pulse_back: return "long_pulse_back";
    }
    return "?";
}

inline ExcitationMode excitation_mode_from_string(const std::string& s) {
    if (s == "flash_front") return ExcitationMode::flash_front;
    if (s == "long_pulse_front") return ExcitationMode::long_pulse_front;
    if (s == "flash_back") return ExcitationMode::flash_back;
    if (s == "long_pulse_back") return ExcitationMode::long_pulse_back;
    throw format_error("unknown excitation mode: " + s);
}

struct ExcitationSpec {
    ExcitationMode mode = ExcitationMode::flash_front;
    double pulse_duration_s = 5.0;  // long-pulse modes only
    double fluence = 8.0;           // surface energy density, arbitrary units
    double nonuniformity = 0.0;     // amplitude of the cosine heating envelope
    double noise_std = 0.0;         // per-sample camera noise
};

struct SlabSpec {
    int nx = 64, ny = 64, nz = 10;
    double dx = 1.2e-3, dy = 1.2e-3, dz = 4.0e-4;  // meters
    double alpha_base = 4.0e-7;                    // m^2/s
    std::vector<DefectSpec> defects;
    ExcitationSpec excitation;
    double duration_s = 50.0;
    double frame_rate_hz = 10.0;
    uint64_t seed = 0;
    double dt_override = 0.0;  // 0 = choose automatically from the stability bound

    double max_stable_dt() const {
        const double h = std::min({dx, dy, dz});
        return 0.9 * h * h / (6.0 * alpha_base);
    }

    void validate() const {
        if (nx < 1 || ny < 1 || nz < 1) throw format_error("SlabSpec: dims must be >= 1");
        if (!(alpha_base > 0.0)) throw format_error("SlabSpec: alpha_base must be > 0");
        if (!(dx > 0.0 && dy > 0.0 && dz > 0.0)) throw format_error("SlabSpec: cell sizes > 0");
        if (!(duration_s > 0.0) || !(frame_rate_hz > 0.0))
            throw format_error("SlabSpec: duration and frame rate must be > 0");
        for (const auto& d : defects) {
            if (d.x1 < 0 || d.y1 < 0 || d.z1 < 0 || d.x2 > nx || d.y2 > ny || d.z2 > nz ||
                d.x1 >= d.x2 || d.y1 >= d.y2 || d.z1 >= d.z2)
                throw format_error("DefectSpec: box outside slab or empty");
            if (!(d.alpha_scale > 0.0) || d.alpha_scale > 1.0)
                throw format_error("DefectSpec: alpha_scale must be in (0, 1]");
        }
        const bool long_pulse = excitation.mode == ExcitationMode::long_pulse_front ||
                                excitation.mode == ExcitationMode::long_pulse_back;
        if (long_pulse && excitation.pulse_duration_s < max_stable_dt())
            throw format_error("ExcitationSpec: pulse_duration_s shorter than one time step");
    }
};

/// Explicit FTCS field on a uniform grid with per-cell diffusivity.
/// Fluxes are applied antisymmetrically per face, so with adiabatic boundaries
/// and no source the cell sum is conserved to roundoff.
class HeatField {
public:
    explicit HeatField(const SlabSpec& spec, double initial_temp = 300.0)
        : nx_(spec.nx), ny_(spec.ny), nz_(spec.nz), dx_(spec.dx), dy_(spec.dy), dz_(spec.dz),
          temp_(static_cast<size_t>(spec.nx) * spec.ny * spec.nz, initial_temp),
          alpha_(temp_.size(), spec.alpha_base) {
        for (const auto& d : spec.defects)
            for (int z = d.z1; z < d.z2; ++z)
                for (int y = d.y1; y < d.y2; ++y)
                    for (int x = d.x1; x < d.x2; ++x)
                        alpha_[idx(x, y, z)] = spec.alpha_base * d.alpha_scale;
    }

    size_t idx(int x, int y, int z) const {
        return (static_cast<size_t>(z) * ny_ + y) * nx_ + x;
    }

    double& temp(int x, int y, int z) { return temp_[idx(x, y, z)]; }
    double temp(int x, int y, int z) const { return temp_[idx(x, y, z)]; }

    double total() const {
        double s = 0.0;
        for (double t : temp_) s += t;
        return s;
    }

    /// One FTCS step; face diffusivity is the arithmetic mean of the neighbors.
    void step(double dt) {
        std::vector<double>& t = temp_;
        std::vector<double> delta(t.size(), 0.0);
        const double cx = dt / (dx_ * dx_), cy = dt / (dy_ * dy_), cz = dt / (dz_ * dz_);
        auto exchange = [&](size_t a, size_t b, double c) {
            const double f = c * 0.5 * (alpha_[a] + alpha_[b]) * (t[b] - t[a]);
            delta[a] += f;
            delta[b] -= f;
        };
        for (int z = 0; z < nz_; ++z)
            for (int y = 0; y < ny_; ++y)
                for (int x = 0; x < nx_; ++x) {
                    const size_t a = idx(x, y, z);
                    if (x + 1 < nx_) exchange(a, a + 1, cx);
                    if (y + 1 < ny_) exchange(a, idx(x, y + 1, z), cy);
                    if (z + 1 < nz_) exchange(a, idx(x, y, z + 1), cz);
                }
        for (size_t i = 0; i < t.size(); ++i) t[i] += delta[i];
    }

    /// Add energy to one z-plane, weighted by a per-(x,y) envelope.
    void deposit(int z, double amount, const std::vector<double>& envelope) {
        for (int y = 0; y < ny_; ++y)
            for (int x = 0; x < nx_; ++x)
                temp_[idx(x, y, z)] += amount * envelope[static_cast<size_t>(y) * nx_ + x];
    }

private:
    int nx_, ny_, nz_;
    double dx_, dy_, dz_;
    std::vector<double> temp_;
    std::vector<double> alpha_;
};

namespace detail {

/// Low-order cosine heating envelope: 1 at the edges, 1 + amplitude at center.
inline std::vector<double> heating_envelope(int nx, int ny, double amplitude) {
    std::vector<double> env(static_cast<size_t>(nx) * ny);
    for (int y = 0; y < ny; ++y)
        for (int x = 0; x < nx; ++x) {
            const double xr = nx > 1 ? x / double(nx - 1) - 0.5 : 0.0;
            const double yr = ny > 1 ? y / double(ny - 1) - 0.5 : 0.0;
            env[static_cast<size_t>(y) * nx + x] =
                1.0 + amplitude * std::cos(M_PI * xr) * std::cos(M_PI * yr);
        }
    return env;
}

/// Non-overlapping sound region: first corner candidate clear of all defects.
inline BBox choose_sound_box(const SlabSpec& spec) {
    const double size = 10.0, margin = 3.0;
    const std::vector<std::pair<double, double>> corners = {
        {margin, margin},
        {spec.nx - margin - size, margin},
        {margin, spec.ny - margin - size},
        {spec.nx - margin - size, spec.ny - margin - size}};
    for (auto [x, y] : corners) {
        BBox cand{x, y, x + size, y + size};
        bool clear = true;
        for (const auto& d : spec.defects) {
            BBox proj{double(d.x1) - 2, double(d.y1) - 2, double(d.x2) + 2, double(d.y2) + 2};
            if (cand.overlaps(proj)) clear = false;
        }
        if (clear) return cand;
    }
    throw numeric_error("choose_sound_box: no defect-free corner available");
}

}  // namespace detail

/// Run the simulation; returns surface frames from the observed face (always
/// z = 0: heated face in reflection modes, opposite face in transmission)
/// plus ground-truth labels. Deterministic for a fixed seed.
inline std::pair<InspectionSequence, RoiLabels> simulate(const SlabSpec& spec) {
    spec.validate();
    const double dt_max = spec.max_stable_dt();
    if (spec.dt_override > 0.0 && spec.dt_override > dt_max)
        throw numeric_error("simulate: dt " + std::to_string(spec.dt_override) +
                            " violates FTCS stability; maximum admissible dt = " +
                            std::to_string(dt_max));
    const double frame_dt = 1.0 / spec.frame_rate_hz;
    const double dt_cap = spec.dt_override > 0.0 ? spec.dt_override : dt_max;
    const int substeps = std::max(1, static_cast<int>(std::ceil(frame_dt / dt_cap)));
    const double dt = frame_dt / substeps;

    const auto& exc = spec.excitation;
    const bool is_flash = exc.mode == ExcitationMode::flash_front ||
                          exc.mode == ExcitationMode::flash_back;
    const bool heat_front = exc.mode == ExcitationMode::flash_front ||
                            exc.mode == ExcitationMode::long_pulse_front;
    const int heated_z = heat_front ? 0 : spec.nz - 1;

    HeatField field(spec);
    const auto env = detail::heating_envelope(spec.nx, spec.ny, exc.nonuniformity);
    if (is_flash) field.deposit(heated_z, exc.fluence, env);

    const uint32_t n_t =
        static_cast<uint32_t>(std::lround(spec.duration_s * spec.frame_rate_hz));
    InspectionSequence seq;
    seq.n_t = std::max<uint32_t>(n_t, 2);
    seq.n_y = static_cast<uint32_t>(spec.ny);
    seq.n_x = static_cast<uint32_t>(spec.nx);
    seq.frame_rate_hz = static_cast<float>(spec.frame_rate_hz);
    seq.frames.resize(static_cast<size_t>(seq.n_t) * spec.ny * spec.nx);
    seq.meta["excitation"] = to_string(exc.mode);
    seq.meta["seed"] = std::to_string(spec.seed);

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);

    double t = 0.0;
    for (uint32_t k = 0; k < seq.n_t; ++k) {
        for (int s = 0; s < substeps; ++s) {
            if (!is_flash && t < exc.pulse_duration_s) {
                const double frac = std::min(dt, exc.pulse_duration_s - t) / exc.pulse_duration_s;
                field.deposit(heated_z, exc.fluence * frac, env);
            }
            field.step(dt);
            t += dt;
        }
        const size_t off = static_cast<size_t>(k) * spec.ny * spec.nx;
        for (int y = 0; y < spec.ny; ++y)
            for (int x = 0; x < spec.nx; ++x) {
                double v = field.temp(x, y, 0);
                if (exc.noise_std > 0.0) v += exc.noise_std * noise(rng);
                seq.frames[off + static_cast<size_t>(y) * spec.nx + x] =
                    static_cast<float>(v);
            }
    }

    RoiLabels labels;
    if (!spec.defects.empty()) {
        const auto shallow = *std::min_element(
            spec.defects.begin(), spec.defects.end(),
            [](const DefectSpec& a, const DefectSpec& b) { return a.z1 < b.z1; });
        labels.defect_box = BBox{double(shallow.x1), double(shallow.y1), double(shallow.x2),
                                 double(shallow.y2)};
        labels.sound_box = detail::choose_sound_box(spec);
        labels.source = "heatsim:" + to_string(exc.mode);
        labels.validate();
    }
    return {std::move(seq), labels};
}

// ---- scenario JSON ----------------------------------------------------------

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                                const std::string& pointer) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) throw format_error("unknown key at " + pointer + "/" + it.key());
    }
}

}  // namespace detail

inline SlabSpec slab_spec_from_json(const nlohmann::json& j, const std::string& pointer = "") {
    detail::reject_unknown_keys(j,
                                {"nx", "ny", "nz", "dx", "dy", "dz", "alpha_base", "defects",
                                 "excitation", "duration_s", "frame_rate_hz", "seed",
                                 "dt_override"},
                                pointer);
    SlabSpec s;
    s.nx = j.value("nx", s.nx);
    s.ny = j.value("ny", s.ny);
    s.nz = j.value("nz", s.nz);
    s.dx = j.value("dx", s.dx);
    s.dy = j.value("dy", s.dy);
    s.dz = j.value("dz", s.dz);
    s.alpha_base = j.value("alpha_base", s.alpha_base);
    s.duration_s = j.value("duration_s", s.duration_s);
    s.frame_rate_hz = j.value("frame_rate_hz", s.frame_rate_hz);
    s.seed = j.value("seed", s.seed);
    s.dt_override = j.value("dt_override", s.dt_override);
    if (j.contains("excitation")) {
        const auto& e = j["excitation"];
        detail::reject_unknown_keys(
            e, {"mode", "pulse_duration_s", "fluence", "nonuniformity", "noise_std"},
            pointer + "/excitation");
        if (e.contains("mode"))
            s.excitation.mode = excitation_mode_from_string(e["mode"].get<std::string>());
        s.excitation.pulse_duration_s = e.value("pulse_duration_s", s.excitation.pulse_duration_s);
        s.excitation.fluence = e.value("fluence", s.excitation.fluence);
        s.excitation.nonuniformity = e.value("nonuniformity", s.excitation.nonuniformity);
        s.excitation.noise_std = e.value("noise_std", s.excitation.noise_std);
    }
    if (j.contains("defects")) {
        for (size_t i = 0; i < j["defects"].size(); ++i) {
            const auto& d = j["defects"][i];
            detail::reject_unknown_keys(d, {"box3d", "alpha_scale"},
                                        pointer + "/defects/" + std::to_string(i));
            const auto& b = d.at("box3d");
            if (!b.is_array() || b.size() != 6)
                throw format_error("box3d must be [x1,y1,z1,x2,y2,z2] at " + pointer +
                                   "/defects/" + std::to_string(i));
            DefectSpec ds;
            ds.x1 = b[0].get<int>();
            ds.y1 = b[1].get<int>();
            ds.z1 = b[2].get<int>();
            ds.x2 = b[3].get<int>();
            ds.y2 = b[4].get<int>();
            ds.z2 = b[5].get<int>();
            ds.alpha_scale = d.value("alpha_scale", ds.alpha_scale);
            s.defects.push_back(ds);
        }
    }
    return s;
}

// ---- benchmark suite --------------------------------------------------------

struct SuiteEntry {
    std::string sequence_path;
    std::string labels_path;
};

struct SuiteParams {
    int n_sequences = 25;
    uint64_t seed = 7;
    double noise_std = 0.03;
    double nonuniformity = 0.15;
};

/// Deterministic per-sequence spec for entry i of the suite: cycles all four
/// excitation modes and alternates shallow/strong with deep/weak defects.
inline SlabSpec suite_sequence_spec(int i, const SuiteParams& params) {
    SlabSpec spec;
    spec.seed = params.seed * 0x9e3779b97f4a7c15ull + static_cast<uint64_t>(i) + 1;
    std::mt19937_64 rng(spec.seed);

    const ExcitationMode modes[4] = {ExcitationMode::flash_front, ExcitationMode::long_pulse_front,
                                     ExcitationMode::flash_back, ExcitationMode::long_pulse_back};
    spec.excitation.mode = modes[i % 4];
    spec.excitation.fluence = 8.0;
    spec.excitation.pulse_duration_s = 5.0;
    spec.excitation.noise_std = params.noise_std;
    spec.excitation.nonuniformity = params.nonuniformity;

    DefectSpec d;
    const bool shallow = (i / 4) % 2 == 0;  // analogue of 15 J vs 5 J impacts
    const int size = shallow ? 14 : 12;
    d.z1 = shallow ? 1 : 2;
    d.z2 = d.z1 + 2;
    d.alpha_scale = shallow ? 0.08 : 0.18;
    std::uniform_int_distribution<int> pos(16, spec.nx - 16 - size);
    d.x1 = pos(rng);
    d.y1 = pos(rng);
    d.x2 = d.x1 + size;
    d.y2 = d.y1 + size;
    spec.defects.push_back(d);
    return spec;
}

inline std::vector<SuiteEntry> make_benchmark_suite(const SuiteParams& params,
                                                    const std::string& out_dir) {
    if (params.n_sequences < 1) throw format_error("make_benchmark_suite: n_sequences >= 1");
    std::filesystem::create_directories(out_dir);
    std::vector<SuiteEntry> entries;
    for (int i = 0; i < params.n_sequences; ++i) {
        const SlabSpec spec = suite_sequence_spec(i, params);
        auto [seq, labels] = simulate(spec);
        char name[32];
        std::snprintf(name, sizeof(name), "seq_%03d", i);
        SuiteEntry e;
        e.sequence_path = (std::filesystem::path(out_dir) / (std::string(name) + ".airt")).string();
        e.labels_path =
            (std::filesystem::path(out_dir) / (std::string(name) + ".labels.json")).string();
        write_sequence(seq, e.sequence_path);
        write_labels(labels, e.labels_path);
        entries.push_back(std::move(e));
    }
    return entries;
}

}  // namespace airt
