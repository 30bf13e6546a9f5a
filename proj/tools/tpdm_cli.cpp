// Command-line front end: phantom | train | reconstruct | generate |
// evaluate.  Every command is a pure function of (config, input files,
// --seed); progress goes to standard error, machine-readable output to
// files and standard output.

#include <array>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "tpdm/config.hpp"
#include "tpdm/errors.hpp"
#include "tpdm/metrics.hpp"
#include "tpdm/phantom.hpp"
#include "tpdm/sampler.hpp"
#include "tpdm/score.hpp"
#include "tpdm/thread_pool.hpp"
#include "tpdm/volume.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 1;
    std::string out = ".";
};

std::string index_name(const char* stem, int k, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%03d.%s", stem, k, ext);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw tpdm::io_error("cannot open for writing: " + path.string());
    out << text;
    if (!out)
        throw tpdm::io_error("short write: " + path.string());
}

void write_manifest(const fs::path& path, const json& manifest) {
    write_text(path, manifest.dump(2) + "\n");
}

struct Models {
    std::unique_ptr<tpdm::ScoreModel> primary;
    std::unique_ptr<tpdm::ScoreModel> auxiliary;
};

Models build_models(const tpdm::ModelSpec& spec) {
    Models m;
    if (spec.kind == tpdm::ModelSpec::Kind::Analytic) {
        const tpdm::NoiseSchedule sched(spec.sigma_min, spec.sigma_max, 2000);
        m.primary = std::make_unique<tpdm::AnalyticGaussianScore>(
            spec.mu, spec.tau, sched);
        m.auxiliary = std::make_unique<tpdm::AnalyticGaussianScore>(
            spec.mu, spec.tau, sched);
    } else {
        auto p = tpdm::load_checkpoint(spec.primary_ckpt);
        auto a = tpdm::load_checkpoint(spec.auxiliary_ckpt);
        m.primary =
            std::make_unique<tpdm::NeuralScore>(std::move(p.first));
        m.auxiliary =
            std::make_unique<tpdm::NeuralScore>(std::move(a.first));
    }
    return m;
}

// Central plane of the volume perpendicular to the given axis (1-based).
tpdm::Slice2D central_plane(const tpdm::Volume3D& v, int axis) {
    tpdm::Slice2D s;
    if (axis == 1) {
        s = tpdm::Slice2D(v.d2, v.d3);
        const int a = v.d1 / 2;
        for (int b = 0; b < v.d2; ++b)
            for (int c = 0; c < v.d3; ++c)
                s.at(b, c) = v.at(a, b, c);
    } else if (axis == 2) {
        s = tpdm::Slice2D(v.d1, v.d3);
        const int b = v.d2 / 2;
        for (int a = 0; a < v.d1; ++a)
            for (int c = 0; c < v.d3; ++c)
                s.at(a, c) = v.at(a, b, c);
    } else {
        s = tpdm::Slice2D(v.d1, v.d2);
        const int c = v.d3 / 2;
        for (int a = 0; a < v.d1; ++a)
            for (int b = 0; b < v.d2; ++b)
                s.at(a, b) = v.at(a, b, c);
    }
    return s;
}

int cmd_phantom(const json& cfgj, const Common& common) {
    tpdm::PhantomCmd cmd = tpdm::parse_phantom_cmd(cfgj);
    if (common.seed_set)
        cmd.seed = common.seed;
    const fs::path out(common.out);
    json manifest;
    manifest["kind"] = "phantom";
    manifest["shape"] = cmd.shape;
    manifest["count"] = cmd.count;
    manifest["n_ellipsoids"] = cmd.n_ellipsoids;
    manifest["seed"] = cmd.seed;
    json entries = json::array();
    for (int k = 0; k < cmd.count; ++k) {
        tpdm::PhantomSpec spec;
        spec.d1 = cmd.shape[0];
        spec.d2 = cmd.shape[1];
        spec.d3 = cmd.shape[2];
        spec.n_ellipsoids = cmd.n_ellipsoids;
        spec.seed = cmd.seed + static_cast<std::uint64_t>(k);
        const tpdm::Volume3D vol = tpdm::make_phantom(spec);
        const std::string vol_name = index_name("phantom", k, "vol");
        tpdm::save_volume(vol, out / vol_name);
        json entry;
        entry["phantom"] = vol_name;
        entry["seed"] = spec.seed;
        if (cmd.task) {
            const tpdm::SimulatedMeasurement sim =
                tpdm::simulate_measurement(vol, *cmd.task);
            const std::string meas_name = index_name("meas", k, "stack");
            tpdm::save_stack(sim.Y, out / meas_name);
            entry["measurements"] = meas_name;
            entry["task"] = sim.manifest;
        }
        entries.push_back(entry);
        std::cerr << "[phantom] wrote " << vol_name << "\n";
    }
    manifest["volumes"] = entries;
    if (cmd.task)
        manifest["task"] = tpdm::task_to_json(*cmd.task);
    write_manifest(out / "manifest.json", manifest);
    return 0;
}

int cmd_train(const json& cfgj, const Common& common) {
    tpdm::TrainCmd cmd = tpdm::parse_train_cmd(cfgj);
    if (common.seed_set)
        cmd.seed = common.seed;
    const fs::path out(common.out);

    std::vector<tpdm::Volume3D> volumes;
    volumes.reserve(cmd.data.size());
    for (const auto& p : cmd.data)
        volumes.push_back(tpdm::load_volume(p));
    auto [primary_ds, auxiliary_ds] = tpdm::build_slice_datasets(volumes);
    std::cerr << "[train] " << volumes.size() << " volumes -> "
              << primary_ds.size() << " primary / " << auxiliary_ds.size()
              << " auxiliary slices\n";

    const auto train_family = [&](const std::string& name,
                                  const std::vector<tpdm::Slice2D>& dataset,
                                  std::uint64_t seed) {
        const fs::path ckpt_path = out / ("model_" + name + ".ckpt");
        std::optional<tpdm::NeuralScore> model;
        int start = 0;
        double prev_final_loss = 0.0;
        if (cmd.resume) {
            auto loaded = tpdm::load_checkpoint(ckpt_path);
            if (loaded.first.hidden_channels() != cmd.hidden_channels)
                throw tpdm::config_error(
                    "resume: checkpoint hidden_channels mismatch");
            const tpdm::NoiseSchedule& s = loaded.first.schedule();
            if (s.sigma_min != cmd.sigma_min || s.sigma_max != cmd.sigma_max)
                throw tpdm::config_error(
                    "resume: checkpoint noise schedule mismatch");
            start = loaded.second.iterations;
            prev_final_loss = loaded.second.final_loss;
            model.emplace(std::move(loaded.first));
        } else {
            model.emplace(
                tpdm::NoiseSchedule(cmd.sigma_min, cmd.sigma_max,
                                    cmd.schedule_N),
                seed, cmd.hidden_channels);
        }
        const int todo = std::max(0, cmd.iterations - start);
        tpdm::TrainConfig tc;
        tc.batch_size = cmd.batch_size;
        tc.iterations = todo;
        tc.lr = cmd.lr;
        tc.seed = seed;
        tc.start_iteration = start;
        const int report_every = std::max(1, todo / 20);
        tc.on_iteration = [&](int it, double loss) {
            if (it % report_every == 0 || it == start + todo)
                std::cerr << "[train " << name << "] iter " << it << "/"
                          << cmd.iterations << " loss " << loss << "\n";
        };
        const tpdm::TrainResult res = tpdm::train(*model, dataset, tc);
        tpdm::CheckpointMeta meta;
        meta.iterations = start + todo;
        meta.batch_size = cmd.batch_size;
        meta.lr = cmd.lr;
        meta.seed = seed;
        meta.final_loss = res.loss_trace.empty() ? prev_final_loss
                                                 : res.loss_trace.back();
        meta.dataset_slices = static_cast<std::int64_t>(dataset.size());
        tpdm::save_checkpoint(*model, meta, ckpt_path);
        tpdm::save_loss_csv(res.loss_trace, start,
                            out / ("loss_" + name + ".csv"));
        std::cerr << "[train " << name << "] wrote " << ckpt_path.string()
                  << " (" << meta.iterations << " iterations)\n";
    };

    if (cmd.family == "primary" || cmd.family == "both")
        train_family("primary", primary_ds, cmd.seed);
    if (cmd.family == "auxiliary" || cmd.family == "both")
        train_family("auxiliary", auxiliary_ds, cmd.seed + 1);
    return 0;
}

int cmd_reconstruct(const json& cfgj, const Common& common) {
    tpdm::ReconstructCmd cmd = tpdm::parse_reconstruct_cmd(cfgj);
    if (common.seed_set)
        cmd.sampler.seed = common.seed;
    const fs::path out(common.out);

    const tpdm::MeasurementStack Y = tpdm::load_stack(cmd.measurements);
    const tpdm::OperatorHandle op = tpdm::build_operator(cmd.task, cmd.shape);
    const Models models = build_models(cmd.model);

    std::cerr << "[reconstruct] N=" << cmd.sampler.N << " K=" << cmd.sampler.K
              << " lambda=" << cmd.sampler.lambda << "\n";
    const auto t0 = std::chrono::steady_clock::now();
    tpdm::RunResult res = tpdm::solve_inverse(Y, op, *models.primary,
                                              *models.auxiliary, cmd.shape,
                                              cmd.sampler);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::cerr << "[reconstruct] done in " << secs << " s\n";

    tpdm::save_volume(res.X, out / "reconstruction.vol");
    json manifest = res.manifest;
    manifest["run_id"] = cmd.run_id;
    manifest["task"] = tpdm::task_to_json(cmd.task);
    manifest["measurements"] = cmd.measurements.string();

    if (cmd.ground_truth) {
        const tpdm::Volume3D gt = tpdm::load_volume(*cmd.ground_truth);
        const tpdm::MetricReport rep = tpdm::evaluate_metrics(res.X, gt);
        write_text(out / "metrics.json", rep.to_json(cmd.run_id) + "\n");
        write_text(out / "metrics.csv", tpdm::MetricReport::csv_header() +
                                            "\n" + rep.to_csv_row(cmd.run_id) +
                                            "\n");
        manifest["metrics"] = json::parse(rep.to_json(cmd.run_id));
    }
    write_manifest(out / "manifest.json", manifest);
    return 0;
}

int cmd_generate(const json& cfgj, const Common& common) {
    tpdm::GenerateCmd cmd = tpdm::parse_generate_cmd(cfgj);
    if (common.seed_set)
        cmd.sampler.seed = common.seed;
    const fs::path out(common.out);
    const Models models = build_models(cmd.model);

    std::cerr << "[generate] shape " << cmd.shape[0] << "x" << cmd.shape[1]
              << "x" << cmd.shape[2] << " N=" << cmd.sampler.N << "\n";
    tpdm::RunResult res = tpdm::generate(*models.primary, *models.auxiliary,
                                         cmd.shape, cmd.sampler);
    tpdm::save_volume(res.X, out / "sample.vol");
    write_manifest(out / "manifest.json", res.manifest);
    if (cmd.export_pgm) {
        const tpdm::Volume3D norm = tpdm::normalize(res.X);
        for (int axis = 1; axis <= 3; ++axis)
            tpdm::save_pgm(central_plane(norm, axis),
                           out / ("slice_axis" + std::to_string(axis) +
                                  ".pgm"));
    }
    return 0;
}

int cmd_evaluate(const json& cfgj, const Common& common) {
    const tpdm::EvaluateCmd cmd = tpdm::parse_evaluate_cmd(cfgj);
    const fs::path out(common.out);
    const tpdm::Volume3D x = tpdm::load_volume(cmd.volume);
    const tpdm::Volume3D ref = tpdm::load_volume(cmd.reference);
    const tpdm::MetricReport rep =
        tpdm::evaluate_metrics(x, ref, cmd.data_range);
    const std::string js = rep.to_json(cmd.run_id);
    write_text(out / "metrics.json", js + "\n");
    write_text(out / "metrics.csv", tpdm::MetricReport::csv_header() + "\n" +
                                        rep.to_csv_row(cmd.run_id) + "\n");
    std::cout << js << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Perpendicular 2D diffusion models for 3D inverse problems"};
    app.require_subcommand(1);

    Common common;
    const char* names[] = {"phantom", "train", "reconstruct", "generate",
                           "evaluate"};
    const char* descs[] = {
        "generate synthetic volumes and simulated measurements",
        "train the primary/auxiliary score models",
        "solve an inverse problem from a measurement stack",
        "draw an unconditional 3D sample",
        "compute PSNR/SSIM between two volumes"};
    for (int k = 0; k < 5; ++k) {
        CLI::App* sub = app.add_subcommand(names[k], descs[k]);
        sub->add_option("--config", common.config, "JSON run configuration")
            ->required();
        sub->add_option("--seed", common.seed,
                        "override the seed in the config");
        sub->add_option("--threads", common.threads, "worker thread cap")
            ->check(CLI::PositiveNumber);
        sub->add_option("--out", common.out, "output directory");
    }
    CLI11_PARSE(app, argc, argv);

    CLI::App* active = app.get_subcommands().front();
    common.seed_set = active->count("--seed") > 0;

    try {
        tpdm::set_global_threads(common.threads);
        std::filesystem::create_directories(common.out);
        const json cfgj = tpdm::load_json_file(common.config);
        const std::string name = active->get_name();
        if (name == "phantom")
            return cmd_phantom(cfgj, common);
        if (name == "train")
            return cmd_train(cfgj, common);
        if (name == "reconstruct")
            return cmd_reconstruct(cfgj, common);
        if (name == "generate")
            return cmd_generate(cfgj, common);
        return cmd_evaluate(cfgj, common);
    } catch (const tpdm::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const tpdm::io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const tpdm::divergence_error& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 4;
    } catch (const tpdm::dim_error& e) {
        std::cerr << "shape error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
