#include "fednb/perturb.hpp"

#include <cmath>

#include "fednb/rng.hpp"

namespace fednb {

std::string to_string(NoiseFamily family) {
    return family == NoiseFamily::Gaussian ? "gaussian" : "uniform";
}

NoiseFamily noise_family_from_string(const std::string& text) {
    if (text == "gaussian") return NoiseFamily::Gaussian;
    if (text == "uniform") return NoiseFamily::Uniform;
    throw Error("unknown noise family '" + text + "'");
}

std::string to_string(VarianceMode::Kind kind) {
    return kind == VarianceMode::Kind::Absolute ? "absolute" : "ratio";
}

VarianceMode::Kind variance_kind_from_string(const std::string& text) {
    if (text == "absolute") return VarianceMode::Kind::Absolute;
    if (text == "ratio") return VarianceMode::Kind::RatioOfSampleVariance;
    throw Error("unknown variance mode '" + text + "'");
}

double NoiseSpec::variance_for(std::size_t attribute_index) const {
    if (variances.empty()) throw InvalidVariance("noise spec has no variance");
    if (variances.size() == 1) return variances.front();
    if (attribute_index >= variances.size())
        throw InvalidVariance("no variance for attribute index " + std::to_string(attribute_index));
    return variances[attribute_index];
}

void NoiseSpec::validate() const {
    if (variances.empty()) throw InvalidVariance("noise spec has no variance");
    for (double v : variances)
        if (!(v >= 0.0)) throw InvalidVariance("negative noise variance " + std::to_string(v));
}

PerturbedColumn perturb_column(std::span<const double> x, const NoiseSpec& spec,
                               std::size_t attribute_index, std::string attribute_name) {
    spec.validate();
    const double variance = spec.variance_for(attribute_index);

    PerturbedColumn out;
    out.attribute_name = std::move(attribute_name);
    out.noise_variance = variance;
    out.values.reserve(x.size());

    if (variance == 0.0) {
        // Bitwise identity; even x + 0.0 would disturb a -0.0 input.
        out.values.assign(x.begin(), x.end());
        return out;
    }

    Xoshiro256pp rng(derive_stream_seed(spec.seed, attribute_index));
    if (spec.family == NoiseFamily::Gaussian) {
        const double sigma = std::sqrt(variance);
        for (double value : x) out.values.push_back(value + sigma * rng.normal());
    } else {
        // Symmetric interval [-sqrt(3v), +sqrt(3v)]: mean 0, variance v.
        const double half_width = std::sqrt(3.0 * variance);
        for (double value : x)
            out.values.push_back(value + half_width * (2.0 * rng.uniform01() - 1.0));
    }
    return out;
}

double sample_mean(std::span<const double> x) {
    double sum = 0.0;
    for (double v : x) sum += v;
    return sum / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
    if (x.size() < 2) throw Error("sample variance needs at least 2 values");
    const double mean = sample_mean(x);
    double sum_sq = 0.0;
    for (double v : x) {
        const double d = v - mean;
        sum_sq += d * d;
    }
    return sum_sq / static_cast<double>(x.size() - 1);
}

double resolve_variance(const VarianceMode& mode, std::span<const double> x, bool* degenerate) {
    if (degenerate) *degenerate = false;
    if (mode.kind == VarianceMode::Kind::Absolute) {
        if (!(mode.value >= 0.0)) throw InvalidVariance("negative absolute variance");
        return mode.value;
    }
    if (!(mode.value >= 0.0)) throw InvalidVariance("negative variance ratio");
    if (x.size() < 2) throw Error("ratio mode needs at least 2 values");
    const double resolved = mode.value * sample_variance(x);
    if (resolved == 0.0 && mode.value > 0.0 && degenerate) *degenerate = true;
    return resolved;
}

}  // namespace fednb
