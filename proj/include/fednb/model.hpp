#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fednb/dataset.hpp"
#include "fednb/perturb.hpp"

namespace fednb {

// Per-attribute, per-class sufficient statistics over (possibly perturbed)
// training values: count, sample mean, (n-1)-denominator sample variance, and
// the declared noise variance that went into the column.
struct ClassConditionalStats {
    std::string attribute_name;
    std::string class_label;
    std::uint64_t n = 0;
    double mean = 0.0;
    double sample_variance = 0.0;
    double noise_variance = 0.0;
};

struct GaussianParams {
    double mu_hat = 0.0;
    double var_hat = 0.0;
};

// Base of the positive-variance floor. The effective floor per cell is
// floor_base * (1 + mu_hat^2), so the clamp scales with the attribute.
inline constexpr double kDefaultVarianceFloor = 1e-9;

struct GaussianNBModel {
    struct Attribute {
        std::string name;
        std::map<std::string, GaussianParams> per_class;
    };

    std::vector<std::string> class_labels;  // lexicographically sorted
    std::map<std::string, double> priors;
    std::vector<Attribute> attributes;  // assembly input order
    double variance_floor = kDefaultVarianceFloor;

    nlohmann::json to_json() const;
    // Canonical form: sorted keys, round-trip float formatting. This exact
    // byte string is the Model message payload.
    std::string to_canonical_json() const;
    static GaussianNBModel from_json(const nlohmann::json& j);
};

// One entry per class present in `labels`, ordered lexicographically by label.
// Throws InsufficientClassData when any class has fewer than 2 rows.
std::vector<ClassConditionalStats> compute_stats(const PerturbedColumn& column,
                                                 std::span<const std::string> labels);

// mu_hat = perturbed mean (noise is mean-zero); var_hat = max(S^2 - sigma_R^2, floor).
GaussianParams correct_variance(const ClassConditionalStats& stats, double floor);

// Builds the full model from per-(attribute, class) statistics. `stats` may
// arrive in any interleaving; attributes keep first-appearance order. Throws
// InconsistentCounts when an n_j disagrees with class_counts, MissingCell when
// an (attribute, class) pair is absent or duplicated.
GaussianNBModel assemble_model(std::span<const ClassConditionalStats> stats,
                               const std::map<std::string, std::uint64_t>& class_counts,
                               double floor_base = kDefaultVarianceFloor);

struct Classification {
    std::string label;
    std::map<std::string, double> log_scores;
};

// log_scores[c] = ln prior_c + sum_i [ -0.5 ln(2 pi var_ic) - (x_i - mu_ic)^2 / (2 var_ic) ];
// returns the argmax label, ties broken toward the lexicographically smaller.
Classification classify(const GaussianNBModel& model,
                        const std::map<std::string, double>& instance);

// Plaintext oracle: the identical estimator with sigma_R^2 = 0 on centralized
// unperturbed data.
GaussianNBModel baseline_fit(const Table& table, std::span<const std::uint64_t> train_ids,
                             double floor_base = kDefaultVarianceFloor);

}  // namespace fednb
