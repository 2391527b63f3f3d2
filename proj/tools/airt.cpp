// Command-line surface for the thermography toolkit:
//   synth | reduce | detect | eval | bench
// Exit codes: 0 ok, 1 usage/unexpected, 2 format, 3 numeric, 4 transport.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "airt/adapter.hpp"
#include "airt/bench.hpp"
#include "airt/detect.hpp"
#include "airt/heatsim.hpp"
#include "airt/metrics.hpp"
#include "airt/reducers.hpp"
#include "airt/seqio.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

airt::RunConfig load_config(const std::string& path) {
    if (path.empty()) {
        airt::RunConfig cfg;
        return cfg;
    }
    json j;
    try {
        j = json::parse(airt::detail::read_file(path));
    } catch (const json::parse_error& e) {
        throw airt::format_error("config is not valid JSON: " + std::string(e.what()));
    }
    return airt::RunConfig::from_json(j);
}

void apply_backend_flags(airt::BackendConfig& backend, const std::string& backend_name,
                         const std::string& endpoint) {
    if (backend_name == "mock") backend.kind = airt::BackendKind::mock;
    if (backend_name == "http") backend.kind = airt::BackendKind::http;
    if (!endpoint.empty()) {
        backend.endpoint_url = endpoint;
        backend.kind = airt::BackendKind::http;
    }
    if (const char* env = std::getenv("AIRT_ENDPOINT"); env && *env) {
        backend.endpoint_url = env;
        backend.kind = airt::BackendKind::http;
    }
}

json detection_to_json(const airt::Detection& d) {
    json j{{"bbox", airt::bbox_to_json(d.box)},
           {"confidence", d.confidence},
           {"backend_id", d.backend_id},
           {"latency_s", d.latency_s}};
    if (d.support > 0.0) j["support"] = d.support;
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    airt::detail::write_file(path, text);
}

int cmd_synth(const std::string& scenario_path, const std::string& out_dir,
              const airt::RunConfig& cfg, std::optional<uint64_t> seed) {
    airt::SuiteParams params = cfg.suite;
    std::vector<airt::SlabSpec> explicit_specs;
    if (!scenario_path.empty()) {
        json j;
        try {
            j = json::parse(airt::detail::read_file(scenario_path));
        } catch (const json::parse_error& e) {
            throw airt::format_error("scenario is not valid JSON: " + std::string(e.what()));
        }
        airt::detail::reject_unknown_keys(
            j, {"schema_version", "n_sequences", "seed", "noise_std", "nonuniformity", "sequences"},
            "");
        if (!j.contains("schema_version"))
            throw airt::format_error("missing required key at /schema_version");
        params.n_sequences = j.value("n_sequences", params.n_sequences);
        params.seed = j.value("seed", params.seed);
        params.noise_std = j.value("noise_std", params.noise_std);
        params.nonuniformity = j.value("nonuniformity", params.nonuniformity);
        if (j.contains("sequences"))
            for (size_t i = 0; i < j["sequences"].size(); ++i)
                explicit_specs.push_back(
                    airt::slab_spec_from_json(j["sequences"][i], "/sequences/" + std::to_string(i)));
    }
    if (seed) params.seed = *seed;

    fs::create_directories(out_dir);
    std::vector<airt::SuiteEntry> entries;
    if (!explicit_specs.empty()) {
        for (size_t i = 0; i < explicit_specs.size(); ++i) {
            auto [seq, labels] = airt::simulate(explicit_specs[i]);
            char name[32];
            std::snprintf(name, sizeof(name), "seq_%03zu", i);
            airt::SuiteEntry e;
            e.sequence_path = (fs::path(out_dir) / (std::string(name) + ".airt")).string();
            e.labels_path = (fs::path(out_dir) / (std::string(name) + ".labels.json")).string();
            airt::write_sequence(seq, e.sequence_path);
            airt::write_labels(labels, e.labels_path);
            entries.push_back(std::move(e));
        }
    } else {
        entries = airt::make_benchmark_suite(params, out_dir);
    }

    json manifest{{"seed", params.seed}, {"count", entries.size()}};
    for (const auto& e : entries)
        manifest["sequences"].push_back(
            {{"sequence", e.sequence_path}, {"labels", e.labels_path}});
    const std::string manifest_path = (fs::path(out_dir) / "manifest.json").string();
    write_text(manifest_path, manifest.dump(2) + "\n");
    std::cout << manifest_path << "\n";
    return 0;
}

int cmd_reduce(const std::string& seq_path, const std::string& method,
               const std::string& pooling_name, const std::string& labels_path,
               const airt::RunConfig& cfg, const std::string& out_dir, bool save_stack) {
    const airt::InspectionSequence seq = airt::read_sequence(seq_path);
    fs::create_directories(out_dir);
    const std::string stem = fs::path(seq_path).stem().string();

    airt::Image2D selected;
    json provenance{{"source", seq_path}, {"method", method}};
    std::optional<airt::RoiLabels> labels;
    if (!labels_path.empty()) labels = airt::read_labels(labels_path);

    if (method == "raw") {
        if (!labels) throw airt::format_error("reduce raw requires --labels");
        const auto r = airt::reduce_raw(seq, *labels);
        selected = r.selected_image();
        provenance["selected_frame"] = r.selected;
        for (const auto& [k, v] : r.params) provenance["params"][k] = v;
    } else if (method == "tsr") {
        const auto r = airt::reduce_tsr(seq, cfg.tsr_degree);
        selected = r.selected_image();
        provenance["selected_index"] = r.selected;
        for (const auto& [k, v] : r.params) provenance["params"][k] = v;
    } else if (method == "pct") {
        const auto r = airt::reduce_pct(seq, cfg.pct_components, labels ? &*labels : nullptr);
        selected = r.selected_image();
        provenance["selected_index"] = r.selected;
        for (const auto& [k, v] : r.params) provenance["params"][k] = v;
    } else if (method == "adapter") {
        const airt::PoolOp op = airt::pool_op_from_string(pooling_name);
        const airt::StandardizedSequence std_seq = airt::standardize(seq);
        auto [model, history] = airt::train(std_seq, cfg.train);
        const airt::LatentStack stack = airt::latent_stack(model, std_seq);
        const airt::AlignedImage img = airt::pool(stack, op);
        selected = img.pixels;
        for (const auto& [k, v] : img.provenance) provenance["params"][k] = v;
        provenance["seed"] = cfg.train.seed;
        if (!history.empty()) {
            provenance["loss_first"] = history.front();
            provenance["loss_last"] = history.back();
        }
        if (save_stack) {
            json stack_files = json::array();
            for (size_t c = 0; c < stack.images.size(); ++c) {
                const std::string path =
                    (fs::path(out_dir) / (stem + "_latent" + std::to_string(c) + ".aimg")).string();
                airt::write_aligned_image(stack.images[c], path);
                stack_files.push_back(path);
            }
            provenance["latent_stack"] = stack_files;
        }
        airt::save_model(model, (fs::path(out_dir) / (stem + "_adapter.avlm")).string());
    } else {
        throw airt::format_error("unknown method: " + method);
    }

    const std::string base = (fs::path(out_dir) / (stem + "_" + method)).string();
    airt::write_aligned_image(selected, base + ".aimg");
    airt::write_pgm(selected, base + ".pgm");
    write_text(base + ".provenance.json", provenance.dump(2) + "\n");
    std::cout << base + ".aimg" << "\n";
    return 0;
}

int cmd_detect(const std::vector<std::string>& image_paths, const airt::RunConfig& cfg, bool nms,
               const std::string& out_path) {
    json result;
    if (nms) {
        std::vector<airt::Image2D> images;
        for (const auto& p : image_paths) images.push_back(airt::read_aligned_image(p));
        result = detection_to_json(airt::nms_ensemble(images, cfg.backend, cfg.nms_iou_thresh));
    } else {
        if (image_paths.size() != 1)
            throw airt::format_error("detect expects exactly one image unless --nms is given");
        const airt::Image2D img = airt::read_aligned_image(image_paths[0]);
        result = detection_to_json(airt::detect(img, cfg.backend));
    }
    const std::string text = result.dump(2) + "\n";
    if (!out_path.empty()) write_text(out_path, text);
    std::cout << text;
    return 0;
}

int cmd_eval(const std::string& img_path, const std::string& pred_path,
             const std::string& labels_path, const std::string& out_path) {
    const airt::Image2D img = airt::read_aligned_image(img_path);
    json pred_json;
    try {
        pred_json = json::parse(airt::detail::read_file(pred_path));
    } catch (const json::parse_error& e) {
        throw airt::format_error("prediction is not valid JSON: " + std::string(e.what()));
    }
    const airt::BBox pred = airt::bbox_from_json(pred_json.at("bbox"));
    const airt::RoiLabels labels = airt::read_labels(labels_path);
    const airt::MetricBundle m = airt::evaluate(img, pred, labels);
    const std::string text = m.to_json().dump(2) + "\n";
    if (!out_path.empty()) write_text(out_path, text);
    std::cout << text;
    return 0;
}

int cmd_bench(const std::string& manifest_path, const airt::RunConfig& cfg,
              const std::string& out_dir) {
    json manifest;
    try {
        manifest = json::parse(airt::detail::read_file(manifest_path));
    } catch (const json::parse_error& e) {
        throw airt::format_error("manifest is not valid JSON: " + std::string(e.what()));
    }
    std::vector<airt::SuiteEntry> entries;
    for (const auto& e : manifest.at("sequences"))
        entries.push_back({e.at("sequence").get<std::string>(), e.at("labels").get<std::string>()});

    fs::create_directories(out_dir);
    std::vector<std::pair<std::string, airt::Image2D>> gallery;
    const airt::BenchmarkReport report = airt::run_benchmark(entries, cfg, &gallery);

    write_text((fs::path(out_dir) / "report.json").string(), report.to_json().dump(2) + "\n");
    fs::create_directories(fs::path(out_dir) / "gallery");
    for (const auto& [name, img] : gallery)
        airt::write_pgm(img, (fs::path(out_dir) / "gallery" / (name + ".pgm")).string());

    std::cout << (fs::path(out_dir) / "report.json").string() << "\n";
    const size_t failed = report.failed_rows();
    if (failed * 10 > report.rows.size()) {
        std::cerr << "bench: " << failed << "/" << report.rows.size() << " rows failed\n";
        return 3;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Thermographic NDT toolkit: synthesis, reduction, detection, evaluation"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", method = "adapter", pooling = "avg";
    std::string backend_name, endpoint, labels_path, out_path;
    std::optional<uint64_t> seed;
    bool nms = false, save_stack = false;

    app.add_option("--config", config_path, "RunConfig JSON path")->envname("");
    app.add_option("--seed", seed, "override the config seed");

    auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark suite");
    std::string scenario_path;
    synth->add_option("--scenario", scenario_path, "scenario JSON (defaults mirror the suite)");
    synth->add_option("--out", out_dir, "output directory");

    auto* reduce = app.add_subcommand("reduce", "compress a sequence to a single image");
    std::string seq_path;
    reduce->add_option("sequence", seq_path, "input .airt")->required();
    reduce->add_option("--method", method, "raw|tsr|pct|adapter");
    reduce->add_option("--pooling", pooling, "avg|max|pca (adapter only)");
    reduce->add_option("--labels", labels_path, "labels JSON (raw selection, pct selection)");
    reduce->add_option("--out", out_dir, "output directory");
    reduce->add_flag("--save-stack", save_stack, "also write the latent images (adapter)");

    auto* det = app.add_subcommand("detect", "localize a defect on an aligned image");
    std::vector<std::string> image_paths;
    det->add_option("images", image_paths, ".aimg image(s); several with --nms")->required();
    det->add_option("--backend", backend_name, "mock|http");
    det->add_option("--endpoint", endpoint, "http endpoint URL");
    det->add_flag("--nms", nms, "NMS ensemble over the given images");
    det->add_option("--out", out_path, "write detection JSON here too");

    auto* ev = app.add_subcommand("eval", "score a prediction against labels");
    std::string eval_img, pred_path, eval_labels;
    ev->add_option("image", eval_img, "image .aimg")->required();
    ev->add_option("prediction", pred_path, "detection JSON")->required();
    ev->add_option("labels", eval_labels, "labels JSON")->required();
    ev->add_option("--out", out_path, "write metrics JSON here too");

    auto* bench = app.add_subcommand("bench", "run the full benchmark over a manifest");
    std::string manifest_path;
    bench->add_option("manifest", manifest_path, "suite manifest JSON")->required();
    bench->add_option("--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        airt::RunConfig cfg = load_config(config_path);
        if (seed) {
            cfg.train.seed = *seed;
            cfg.suite.seed = *seed;
        }
        apply_backend_flags(cfg.backend, backend_name, endpoint);

        if (synth->parsed()) return cmd_synth(scenario_path, out_dir, cfg, seed);
        if (reduce->parsed())
            return cmd_reduce(seq_path, method, pooling, labels_path, cfg, out_dir, save_stack);
        if (det->parsed()) return cmd_detect(image_paths, cfg, nms, out_path);
        if (ev->parsed()) return cmd_eval(eval_img, pred_path, eval_labels, out_path);
        if (bench->parsed()) return cmd_bench(manifest_path, cfg, out_dir);
    } catch (const airt::format_error& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 2;
    } catch (const airt::numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const airt::protocol_error& e) {
        std::cerr << "protocol error: " << e.what() << "\n";
        if (!e.payload.empty()) std::cerr << "payload: " << e.payload << "\n";
        return 4;
    } catch (const airt::transport_error& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
