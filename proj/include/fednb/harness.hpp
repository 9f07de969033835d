#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fednb/dataset.hpp"
#include "fednb/message.hpp"
#include "fednb/model.hpp"
#include "fednb/protocol.hpp"

namespace fednb {

// Everything one benchmark run needs; a serialized config plus the dataset
// file reproduces the run exactly (in-process transport).
struct ExperimentConfig {
    std::filesystem::path dataset_path;
    std::string label_column;  // header name or zero-based index
    std::uint32_t num_sites = 3;
    SplitPlan split_plan;                      // 50:50 x 10 by default
    NoiseDescriptor noise;                     // ratio 0.25 of sample variance
    std::string transport = "in-process";      // or "tcp"
    std::string scheme_id = kRsaSchemeId;
    bool records_mode = false;
    bool perturbed_test = false;  // study flag: also disguise test values
    std::filesystem::path out_path;  // empty = stdout

    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
};

struct RepeatResult {
    std::uint32_t index = 0;
    double acc_perturbed = 0.0;
    double acc_baseline = 0.0;
};

struct ExperimentReport {
    nlohmann::json config_echo;
    std::vector<RepeatResult> repeats;
    bool has_perturbed = true;  // false for baseline-only runs
    double mean_perturbed = 0.0, std_perturbed = 0.0;
    double mean_baseline = 0.0, std_baseline = 0.0;
    std::int64_t timing_ms = 0;

    // timing_ms is wall clock and excluded when comparing runs for
    // reproducibility; pass include_timing=false for that.
    nlohmann::json to_json(bool include_timing = true) const;
    std::string to_table() const;
};

// Fraction of test rows the model labels correctly; test values are original
// (unperturbed) unless a perturbed view is passed in.
double evaluate_accuracy(const GaussianNBModel& model, const Table& table,
                         std::span<const std::uint64_t> test_ids);

// One full benchmark: per split, run the protocol session for the disguised
// distributed model, fit the plaintext baseline on the same split, score both
// on the held-out rows.
ExperimentReport run_experiment(const ExperimentConfig& config);
ExperimentReport run_experiment_on(const Table& table, const ExperimentConfig& config);

// Plaintext-only column (no sessions, no noise).
ExperimentReport run_baseline(const ExperimentConfig& config);
ExperimentReport run_baseline_on(const Table& table, const ExperimentConfig& config);

// One report per ratio; seeds are shared so every ratio sees identical splits.
std::vector<ExperimentReport> sweep_noise(const ExperimentConfig& config,
                                          std::span<const double> ratios);
std::vector<ExperimentReport> sweep_noise_on(const Table& table, const ExperimentConfig& config,
                                             std::span<const double> ratios);

}  // namespace fednb
