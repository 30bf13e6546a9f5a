#pragma once

// JSON run-configuration parsing for the command-line tool.  Parsing is
// strict: unknown keys, wrong types, and out-of-range values raise
// config_error naming the offending JSON path.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "tpdm/phantom.hpp"
#include "tpdm/sampler.hpp"

namespace tpdm {

// Reads and parses a JSON document; io_error when unreadable,
// config_error on malformed JSON.
nlohmann::json load_json_file(const std::filesystem::path& path);

// Throws config_error naming `path`.`key` for any key not in `allowed`.
void reject_unknown_keys(const nlohmann::json& obj, const std::string& path,
                         const std::vector<std::string>& allowed);

// Score-model source: trained checkpoints or the analytic Gaussian
// oracle (used for end-to-end verification without training).
struct ModelSpec {
    enum class Kind { Neural, Analytic };
    Kind kind = Kind::Analytic;
    // neural
    std::filesystem::path primary_ckpt;
    std::filesystem::path auxiliary_ckpt;
    // analytic
    double mu = 0.5;
    double tau = 0.1;
    double sigma_min = 0.01;
    double sigma_max = 378.0;
};

struct PhantomCmd {
    std::array<int, 3> shape{32, 32, 32};
    int count = 1;
    int n_ellipsoids = 6;
    std::uint64_t seed = 0;
    std::optional<TaskSpec> task;
};

struct TrainCmd {
    std::vector<std::filesystem::path> data;
    std::string family = "both"; // "primary" | "auxiliary" | "both"
    int iterations = 1000;
    int batch_size = 8;
    double lr = 2e-4;
    int hidden_channels = 32;
    std::uint64_t seed = 0;
    double sigma_min = 0.01;
    double sigma_max = 378.0;
    int schedule_N = 2000;
    bool resume = false;
};

struct ReconstructCmd {
    std::filesystem::path measurements;
    TaskSpec task;
    ModelSpec model;
    SamplerConfig sampler;
    std::array<int, 3> shape{};
    std::optional<std::filesystem::path> ground_truth;
    std::string run_id = "recon";
};

struct GenerateCmd {
    std::array<int, 3> shape{};
    ModelSpec model;
    SamplerConfig sampler;
    bool export_pgm = false;
};

struct EvaluateCmd {
    std::filesystem::path volume;
    std::filesystem::path reference;
    double data_range = 1.0;
    std::string run_id = "eval";
};

PhantomCmd parse_phantom_cmd(const nlohmann::json& j);
TrainCmd parse_train_cmd(const nlohmann::json& j);
ReconstructCmd parse_reconstruct_cmd(const nlohmann::json& j);
GenerateCmd parse_generate_cmd(const nlohmann::json& j);
EvaluateCmd parse_evaluate_cmd(const nlohmann::json& j);

// Shared sub-object parsers (path is the JSON location for messages).
TaskSpec parse_task_spec(const nlohmann::json& j, const std::string& path);
SamplerConfig parse_sampler_config(const nlohmann::json& j,
                                   const std::string& path);
ModelSpec parse_model_spec(const nlohmann::json& j, const std::string& path);

} // namespace tpdm
