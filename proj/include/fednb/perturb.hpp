#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fednb/error.hpp"

namespace fednb {

enum class NoiseFamily { Gaussian, Uniform };

std::string to_string(NoiseFamily family);
NoiseFamily noise_family_from_string(const std::string& text);

// Additive-noise contract: zero-mean noise of known variance per attribute.
// A single-entry variance list is shared across all attributes.
struct NoiseSpec {
    NoiseFamily family = NoiseFamily::Gaussian;
    std::vector<double> variances{0.0};
    std::uint64_t seed = 0;

    double variance_for(std::size_t attribute_index) const;
    void validate() const;  // throws InvalidVariance
};

struct PerturbedColumn {
    std::string attribute_name;
    std::vector<double> values;
    double noise_variance = 0.0;
};

// w[t] = x[t] + r[t], r i.i.d. from the spec's family with mean 0 and variance
// sigma_R^2. The noise stream is keyed by (spec.seed, attribute_index), so the
// same draw is reproduced for the same (seed, attribute, position) and adding
// attributes never shifts another attribute's noise. With variance 0 the input
// is copied bit-for-bit.
PerturbedColumn perturb_column(std::span<const double> x, const NoiseSpec& spec,
                               std::size_t attribute_index, std::string attribute_name = {});

// How sigma_R^2 is chosen for a column.
struct VarianceMode {
    enum class Kind { Absolute, RatioOfSampleVariance };
    Kind kind = Kind::RatioOfSampleVariance;
    double value = 0.25;

    static VarianceMode absolute(double v) { return {Kind::Absolute, v}; }
    static VarianceMode ratio(double rho) { return {Kind::RatioOfSampleVariance, rho}; }
};

std::string to_string(VarianceMode::Kind kind);
VarianceMode::Kind variance_kind_from_string(const std::string& text);

double sample_mean(std::span<const double> x);
// (n-1)-denominator sample variance.
double sample_variance(std::span<const double> x);

// Absolute(v) -> v; Ratio(rho) -> rho * sample_variance(x). A constant column
// under Ratio resolves to 0, which is legal but defeats perturbation, so the
// caller is warned through *degenerate when provided.
double resolve_variance(const VarianceMode& mode, std::span<const double> x,
                        bool* degenerate = nullptr);

}  // namespace fednb
