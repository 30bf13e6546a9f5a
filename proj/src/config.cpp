#include "tpdm/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "tpdm/errors.hpp"

namespace tpdm {

namespace {

using nlohmann::json;

std::string joinp(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

const json& require_key(const json& obj, const std::string& path,
                        const std::string& key) {
    const auto it = obj.find(key);
    if (it == obj.end())
        throw config_error("missing required key " + joinp(path, key));
    return *it;
}

void require_object(const json& v, const std::string& path) {
    if (!v.is_object())
        throw config_error(path + " must be a JSON object");
}

double as_number(const json& v, const std::string& path) {
    if (!v.is_number())
        throw config_error(path + " must be a number");
    return v.get<double>();
}

int as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer())
        throw config_error(path + " must be an integer");
    return v.get<int>();
}

std::uint64_t as_u64(const json& v, const std::string& path) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        throw config_error(path + " must be a non-negative integer");
    return v.get<std::uint64_t>();
}

bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean())
        throw config_error(path + " must be a boolean");
    return v.get<bool>();
}

std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string())
        throw config_error(path + " must be a string");
    return v.get<std::string>();
}

std::array<int, 3> as_shape(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 3)
        throw config_error(path + " must be an array of 3 integers");
    std::array<int, 3> out{};
    for (int k = 0; k < 3; ++k) {
        out[static_cast<std::size_t>(k)] =
            as_int(v[static_cast<std::size_t>(k)],
                   path + "[" + std::to_string(k) + "]");
        if (out[static_cast<std::size_t>(k)] <= 0)
            throw config_error(path + " entries must be positive");
    }
    return out;
}

// Optional typed getters with defaults.
double opt_number(const json& obj, const std::string& path,
                  const std::string& key, double def) {
    const auto it = obj.find(key);
    return it == obj.end() ? def : as_number(*it, joinp(path, key));
}

int opt_int(const json& obj, const std::string& path, const std::string& key,
            int def) {
    const auto it = obj.find(key);
    return it == obj.end() ? def : as_int(*it, joinp(path, key));
}

std::uint64_t opt_u64(const json& obj, const std::string& path,
                      const std::string& key, std::uint64_t def) {
    const auto it = obj.find(key);
    return it == obj.end() ? def : as_u64(*it, joinp(path, key));
}

bool opt_bool(const json& obj, const std::string& path, const std::string& key,
              bool def) {
    const auto it = obj.find(key);
    return it == obj.end() ? def : as_bool(*it, joinp(path, key));
}

std::string opt_string(const json& obj, const std::string& path,
                       const std::string& key, const std::string& def) {
    const auto it = obj.find(key);
    return it == obj.end() ? def : as_string(*it, joinp(path, key));
}

} // namespace

nlohmann::json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw io_error("cannot open config file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw config_error("malformed JSON in " + path.string() + ": " +
                           e.what());
    }
    if (!j.is_object())
        throw config_error("config root in " + path.string() +
                           " must be a JSON object");
    return j;
}

void reject_unknown_keys(const nlohmann::json& obj, const std::string& path,
                         const std::vector<std::string>& allowed) {
    require_object(obj, path.empty() ? "config" : path);
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) ==
            allowed.end())
            throw config_error("unknown key " + joinp(path, it.key()));
    }
}

TaskSpec parse_task_spec(const nlohmann::json& j, const std::string& path) {
    require_object(j, path);
    const std::string kind = as_string(require_key(j, path, "kind"),
                                       joinp(path, "kind"));
    TaskSpec task;
    if (kind == "zsr") {
        task.kind = TaskKind::Zsr;
        reject_unknown_keys(j, path, {"kind", "merge_size", "noise_sigma"});
        task.merge_size = opt_int(j, path, "merge_size", task.merge_size);
        if (task.merge_size < 1)
            throw config_error(joinp(path, "merge_size") + " must be >= 1");
    } else if (kind == "csmri") {
        task.kind = TaskKind::Csmri;
        reject_unknown_keys(j, path,
                            {"kind", "R", "center_frac", "mask_seed",
                             "per_slice_mask", "noise_sigma"});
        task.R = opt_number(j, path, "R", task.R);
        task.center_frac = opt_number(j, path, "center_frac", task.center_frac);
        task.mask_seed = opt_u64(j, path, "mask_seed", task.mask_seed);
        task.per_slice_mask =
            opt_bool(j, path, "per_slice_mask", task.per_slice_mask);
        if (task.R < 1.0)
            throw config_error(joinp(path, "R") + " must be >= 1");
        if (task.center_frac < 0.0 || task.center_frac > 1.0)
            throw config_error(joinp(path, "center_frac") +
                               " must be in [0, 1]");
    } else if (kind == "svct") {
        task.kind = TaskKind::Svct;
        reject_unknown_keys(j, path, {"kind", "n_angles", "noise_sigma"});
        task.n_angles = opt_int(j, path, "n_angles", task.n_angles);
        if (task.n_angles < 1)
            throw config_error(joinp(path, "n_angles") + " must be >= 1");
    } else {
        throw config_error(joinp(path, "kind") +
                           " must be one of zsr|csmri|svct, got \"" + kind +
                           "\"");
    }
    task.noise_sigma = opt_number(j, path, "noise_sigma", 0.0);
    if (task.noise_sigma < 0.0)
        throw config_error(joinp(path, "noise_sigma") + " must be >= 0");
    return task;
}

SamplerConfig parse_sampler_config(const nlohmann::json& j,
                                   const std::string& path) {
    require_object(j, path);
    reject_unknown_keys(j, path,
                        {"N", "K", "lambda", "corrector_steps",
                         "corrector_snr", "seed", "guidance_mode",
                         "normalize_residual", "check_every"});
    SamplerConfig cfg;
    cfg.N = opt_int(j, path, "N", cfg.N);
    const auto kit = j.find("K");
    if (kit != j.end()) {
        if (kit->is_string()) {
            if (kit->get<std::string>() != "inf")
                throw config_error(joinp(path, "K") +
                                   " string form must be \"inf\"");
            cfg.K = std::numeric_limits<double>::infinity();
        } else {
            cfg.K = as_number(*kit, joinp(path, "K"));
        }
    }
    cfg.lambda = opt_number(j, path, "lambda", cfg.lambda);
    cfg.corrector_steps =
        opt_int(j, path, "corrector_steps", cfg.corrector_steps);
    cfg.corrector_snr = opt_number(j, path, "corrector_snr", cfg.corrector_snr);
    cfg.seed = opt_u64(j, path, "seed", cfg.seed);
    const std::string mode =
        opt_string(j, path, "guidance_mode", "exact_vjp");
    if (mode == "exact_vjp")
        cfg.guidance_mode = GuidanceMode::ExactVJP;
    else if (mode == "identity")
        cfg.guidance_mode = GuidanceMode::IdentityJacobian;
    else
        throw config_error(joinp(path, "guidance_mode") +
                           " must be exact_vjp|identity");
    cfg.normalize_residual =
        opt_bool(j, path, "normalize_residual", cfg.normalize_residual);
    cfg.check_every = opt_int(j, path, "check_every", cfg.check_every);
    return cfg;
}

ModelSpec parse_model_spec(const nlohmann::json& j, const std::string& path) {
    require_object(j, path);
    const std::string kind = as_string(require_key(j, path, "kind"),
                                       joinp(path, "kind"));
    ModelSpec spec;
    if (kind == "neural") {
        spec.kind = ModelSpec::Kind::Neural;
        reject_unknown_keys(j, path, {"kind", "primary", "auxiliary"});
        spec.primary_ckpt = as_string(require_key(j, path, "primary"),
                                      joinp(path, "primary"));
        spec.auxiliary_ckpt = as_string(require_key(j, path, "auxiliary"),
                                        joinp(path, "auxiliary"));
    } else if (kind == "analytic") {
        spec.kind = ModelSpec::Kind::Analytic;
        reject_unknown_keys(j, path,
                            {"kind", "mu", "tau", "sigma_min", "sigma_max"});
        spec.mu = opt_number(j, path, "mu", spec.mu);
        spec.tau = opt_number(j, path, "tau", spec.tau);
        spec.sigma_min = opt_number(j, path, "sigma_min", spec.sigma_min);
        spec.sigma_max = opt_number(j, path, "sigma_max", spec.sigma_max);
        if (!(spec.tau > 0.0))
            throw config_error(joinp(path, "tau") + " must be > 0");
    } else {
        throw config_error(joinp(path, "kind") +
                           " must be neural|analytic, got \"" + kind + "\"");
    }
    return spec;
}

PhantomCmd parse_phantom_cmd(const nlohmann::json& j) {
    reject_unknown_keys(j, "",
                        {"shape", "count", "n_ellipsoids", "seed", "task"});
    PhantomCmd cmd;
    if (j.contains("shape"))
        cmd.shape = as_shape(j.at("shape"), "shape");
    cmd.count = opt_int(j, "", "count", cmd.count);
    if (cmd.count < 1)
        throw config_error("count must be >= 1");
    cmd.n_ellipsoids = opt_int(j, "", "n_ellipsoids", cmd.n_ellipsoids);
    if (cmd.n_ellipsoids < 0)
        throw config_error("n_ellipsoids must be >= 0");
    cmd.seed = opt_u64(j, "", "seed", cmd.seed);
    if (j.contains("task"))
        cmd.task = parse_task_spec(j.at("task"), "task");
    return cmd;
}

TrainCmd parse_train_cmd(const nlohmann::json& j) {
    reject_unknown_keys(j, "",
                        {"data", "family", "iterations", "batch_size", "lr",
                         "hidden_channels", "seed", "sigma_min", "sigma_max",
                         "schedule_N", "resume"});
    TrainCmd cmd;
    const json& data = require_key(j, "", "data");
    if (data.is_string()) {
        // A directory: every *.vol file inside, sorted by name.
        const std::filesystem::path dir = data.get<std::string>();
        if (!std::filesystem::is_directory(dir))
            throw io_error("data directory not found: " + dir.string());
        for (const auto& entry : std::filesystem::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".vol")
                cmd.data.push_back(entry.path());
        std::sort(cmd.data.begin(), cmd.data.end());
    } else if (data.is_array()) {
        for (std::size_t k = 0; k < data.size(); ++k)
            cmd.data.emplace_back(as_string(
                data[k], "data[" + std::to_string(k) + "]"));
    } else {
        throw config_error("data must be a directory path or array of paths");
    }
    if (cmd.data.empty())
        throw io_error("train: no input volumes found");
    cmd.family = opt_string(j, "", "family", cmd.family);
    if (cmd.family != "primary" && cmd.family != "auxiliary" &&
        cmd.family != "both")
        throw config_error("family must be primary|auxiliary|both");
    cmd.iterations = opt_int(j, "", "iterations", cmd.iterations);
    if (cmd.iterations < 0)
        throw config_error("iterations must be >= 0");
    cmd.batch_size = opt_int(j, "", "batch_size", cmd.batch_size);
    if (cmd.batch_size < 1)
        throw config_error("batch_size must be >= 1");
    cmd.lr = opt_number(j, "", "lr", cmd.lr);
    if (!(cmd.lr > 0.0))
        throw config_error("lr must be > 0");
    cmd.hidden_channels = opt_int(j, "", "hidden_channels", cmd.hidden_channels);
    if (cmd.hidden_channels < 1)
        throw config_error("hidden_channels must be >= 1");
    cmd.seed = opt_u64(j, "", "seed", cmd.seed);
    cmd.sigma_min = opt_number(j, "", "sigma_min", cmd.sigma_min);
    cmd.sigma_max = opt_number(j, "", "sigma_max", cmd.sigma_max);
    cmd.schedule_N = opt_int(j, "", "schedule_N", cmd.schedule_N);
    cmd.resume = opt_bool(j, "", "resume", cmd.resume);
    return cmd;
}

ReconstructCmd parse_reconstruct_cmd(const nlohmann::json& j) {
    reject_unknown_keys(j, "",
                        {"measurements", "task", "model", "sampler", "shape",
                         "ground_truth", "run_id"});
    ReconstructCmd cmd;
    cmd.measurements =
        as_string(require_key(j, "", "measurements"), "measurements");
    cmd.task = parse_task_spec(require_key(j, "", "task"), "task");
    cmd.model = parse_model_spec(require_key(j, "", "model"), "model");
    if (j.contains("sampler"))
        cmd.sampler = parse_sampler_config(j.at("sampler"), "sampler");
    cmd.shape = as_shape(require_key(j, "", "shape"), "shape");
    if (j.contains("ground_truth"))
        cmd.ground_truth = std::filesystem::path(
            as_string(j.at("ground_truth"), "ground_truth"));
    cmd.run_id = opt_string(j, "", "run_id", cmd.run_id);
    return cmd;
}

GenerateCmd parse_generate_cmd(const nlohmann::json& j) {
    reject_unknown_keys(j, "", {"shape", "model", "sampler", "export_pgm"});
    GenerateCmd cmd;
    cmd.shape = as_shape(require_key(j, "", "shape"), "shape");
    cmd.model = parse_model_spec(require_key(j, "", "model"), "model");
    if (j.contains("sampler"))
        cmd.sampler = parse_sampler_config(j.at("sampler"), "sampler");
    cmd.sampler.lambda = 0.0; // unconditional by definition
    cmd.export_pgm = opt_bool(j, "", "export_pgm", cmd.export_pgm);
    return cmd;
}

EvaluateCmd parse_evaluate_cmd(const nlohmann::json& j) {
    reject_unknown_keys(j, "",
                        {"volume", "reference", "data_range", "run_id"});
    EvaluateCmd cmd;
    cmd.volume = as_string(require_key(j, "", "volume"), "volume");
    cmd.reference = as_string(require_key(j, "", "reference"), "reference");
    cmd.data_range = opt_number(j, "", "data_range", cmd.data_range);
    if (!(cmd.data_range > 0.0))
        throw config_error("data_range must be > 0");
    cmd.run_id = opt_string(j, "", "run_id", cmd.run_id);
    return cmd;
}

} // namespace tpdm
