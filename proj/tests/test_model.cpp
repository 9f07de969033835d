#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "fednb/model.hpp"
#include "fednb/rng.hpp"
#include "testutil.hpp"

using namespace fednb;

namespace {

PerturbedColumn column_of(std::string name, std::vector<double> values, double noise_variance = 0.0) {
    PerturbedColumn c;
    c.attribute_name = std::move(name);
    c.values = std::move(values);
    c.noise_variance = noise_variance;
    return c;
}

}  // namespace

TEST_CASE("compute_stats: hand-evaluated single class") {
    const std::vector<std::string> labels = {"a", "a", "a"};
    const auto stats = compute_stats(column_of("x", {1.0, 2.0, 3.0}), labels);
    REQUIRE(stats.size() == 1);
    CHECK(stats[0].n == 3);
    CHECK(stats[0].mean == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(stats[0].sample_variance == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("compute_stats: constant column has zero variance") {
    const std::vector<std::string> labels = {"a", "a", "a", "a"};
    const auto stats = compute_stats(column_of("x", {5.0, 5.0, 5.0, 5.0}), labels);
    CHECK(stats[0].mean == 5.0);
    CHECK(stats[0].sample_variance == 0.0);
}

TEST_CASE("compute_stats: two classes, hand-evaluated") {
    const std::vector<std::string> labels = {"a", "a", "b", "b"};
    const auto stats = compute_stats(column_of("x", {0.0, 2.0, 10.0, 12.0}, 0.25), labels);
    REQUIRE(stats.size() == 2);
    CHECK(stats[0].class_label == "a");
    CHECK(stats[0].n == 2);
    CHECK(stats[0].mean == doctest::Approx(1.0));
    CHECK(stats[0].sample_variance == doctest::Approx(2.0));
    CHECK(stats[0].noise_variance == 0.25);
    CHECK(stats[1].class_label == "b");
    CHECK(stats[1].n == 2);
    CHECK(stats[1].mean == doctest::Approx(11.0));
    CHECK(stats[1].sample_variance == doctest::Approx(2.0));
}

TEST_CASE("compute_stats: a one-row class is insufficient") {
    const std::vector<std::string> labels = {"a", "a", "b"};
    CHECK_THROWS_AS(compute_stats(column_of("x", {1.0, 2.0, 3.0}), labels), InsufficientClassData);
}

TEST_CASE("correct_variance: subtraction and clamp") {
    ClassConditionalStats s;
    s.mean = 4.0;

    s.sample_variance = 1.0;
    s.noise_variance = 0.0;
    CHECK(correct_variance(s, 1e-9).var_hat == 1.0);
    CHECK(correct_variance(s, 1e-9).mu_hat == 4.0);

    s.sample_variance = 3.0;
    s.noise_variance = 0.5;
    CHECK(correct_variance(s, 1e-9).var_hat == doctest::Approx(2.5).epsilon(1e-15));

    s.sample_variance = 0.3;
    s.noise_variance = 0.5;
    CHECK(correct_variance(s, 1e-9).var_hat == 1e-9);
}

TEST_CASE("assemble_model: priors from counts") {
    std::vector<ClassConditionalStats> stats;
    for (const auto& [label, n, mean] :
         std::vector<std::tuple<std::string, std::uint64_t, double>>{{"a", 3, 1.0}, {"b", 1, 9.0}}) {
        ClassConditionalStats s;
        s.attribute_name = "x";
        s.class_label = label;
        s.n = n;
        s.mean = mean;
        s.sample_variance = 1.0;
        stats.push_back(s);
    }
    // n=1 for class b is fine at assembly; compute_stats is the gatekeeper.
    const auto model = assemble_model(stats, {{"a", 3}, {"b", 1}});
    CHECK(model.priors.at("a") == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(model.priors.at("b") == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(model.class_labels == std::vector<std::string>{"a", "b"});
}

TEST_CASE("assemble_model: single class degenerates to prior 1.0") {
    ClassConditionalStats s;
    s.attribute_name = "x";
    s.class_label = "only";
    s.n = 4;
    s.mean = 0.0;
    s.sample_variance = 1.0;
    const auto model = assemble_model(std::vector{s}, {{"only", 4}});
    CHECK(model.priors.at("only") == 1.0);
}

TEST_CASE("assemble_model: count mismatch and missing cells are rejected") {
    ClassConditionalStats s;
    s.attribute_name = "x";
    s.class_label = "a";
    s.n = 5;
    s.sample_variance = 1.0;
    CHECK_THROWS_AS(assemble_model(std::vector{s}, {{"a", 6}}), InconsistentCounts);
    CHECK_THROWS_AS(assemble_model(std::vector{s}, {{"a", 5}, {"b", 2}}), MissingCell);

    // duplicated cell
    std::vector<ClassConditionalStats> twice = {s, s};
    CHECK_THROWS_AS(assemble_model(twice, {{"a", 5}}), MissingCell);
}

TEST_CASE("assemble_model applies the scaled variance floor") {
    ClassConditionalStats s;
    s.attribute_name = "x";
    s.class_label = "a";
    s.n = 2;
    s.mean = 3.0;
    s.sample_variance = 0.1;
    s.noise_variance = 0.5;  // corrected estimate is negative
    const auto model = assemble_model(std::vector{s}, {{"a", 2}}, 1e-9);
    CHECK(model.attributes[0].per_class.at("a").var_hat ==
          doctest::Approx(1e-9 * (1.0 + 9.0)).epsilon(1e-12));
}

TEST_CASE("classify: hand-evaluated two-Gaussian case") {
    GaussianNBModel model;
    model.class_labels = {"far", "near"};
    model.priors = {{"far", 0.5}, {"near", 0.5}};
    model.attributes = {{"x", {{"far", {10.0, 1.0}}, {"near", {0.0, 1.0}}}}};
    model.variance_floor = 1e-9;

    const auto result = classify(model, {{"x", 1.0}});
    CHECK(result.label == "near");
    // ln 0.5 - 0.5 ln(2 pi) - d^2/2, d = 1 and d = -9
    const double base = std::log(0.5) - 0.5 * std::log(2.0 * 3.14159265358979323846);
    CHECK(result.log_scores.at("near") == doctest::Approx(base - 0.5).epsilon(1e-12));
    CHECK(result.log_scores.at("far") == doctest::Approx(base - 40.5).epsilon(1e-12));
}

TEST_CASE("classify: single-class model always answers that class") {
    GaussianNBModel model;
    model.class_labels = {"a"};
    model.priors = {{"a", 1.0}};
    model.attributes = {{"x", {{"a", {0.0, 1.0}}}}};
    for (double x : {-5.0, 0.0, 17.0}) CHECK(classify(model, {{"x", x}}).label == "a");
}

TEST_CASE("classify: exact tie goes to the lexicographically smaller label") {
    GaussianNBModel model;
    model.class_labels = {"a", "b"};
    model.priors = {{"a", 0.5}, {"b", 0.5}};
    model.attributes = {{"x", {{"a", {-1.0, 1.0}}, {"b", {1.0, 1.0}}}}};
    const auto result = classify(model, {{"x", 0.0}});
    CHECK(result.log_scores.at("a") == result.log_scores.at("b"));
    CHECK(result.label == "a");
}

TEST_CASE("classify: missing attribute is an error") {
    GaussianNBModel model;
    model.class_labels = {"a"};
    model.priors = {{"a", 1.0}};
    model.attributes = {{"x", {{"a", {0.0, 1.0}}}}};
    CHECK_THROWS_AS(classify(model, {{"y", 1.0}}), MissingAttribute);
}

TEST_CASE("classification is invariant under a constant shift of log scores") {
    const Table t = testutil::make_blob_table(6, 60, 3);
    std::vector<std::uint64_t> ids(t.rows.size());
    std::iota(ids.begin(), ids.end(), 0);
    const auto model = baseline_fit(t, ids);

    for (std::size_t i = 0; i < 20; ++i) {
        std::map<std::string, double> instance;
        for (std::size_t a = 0; a < t.attribute_names.size(); ++a)
            instance[t.attribute_names[a]] = t.rows[i].values[a];
        const auto result = classify(model, instance);

        std::string shifted_best;
        double best = -1e300;
        for (const auto& label : model.class_labels) {
            const double shifted = result.log_scores.at(label) + 123.456;
            if (shifted > best) {
                best = shifted;
                shifted_best = label;
            }
        }
        CHECK(shifted_best == result.label);
    }
}

TEST_CASE("baseline_fit: 4-row single-attribute toy matches hand computation") {
    Table t;
    t.attribute_names = {"x"};
    t.rows = {{0, {1.0}, "a"}, {1, {2.0}, "a"}, {2, {10.0}, "b"}, {3, {12.0}, "b"}};
    const std::vector<std::uint64_t> train = {0, 1, 2, 3};
    const auto model = baseline_fit(t, train);

    CHECK(model.priors.at("a") == doctest::Approx(0.5));
    const auto& pa = model.attributes[0].per_class.at("a");
    CHECK(pa.mu_hat == doctest::Approx(1.5));
    CHECK(pa.var_hat == doctest::Approx(0.5));
    const auto& pb = model.attributes[0].per_class.at("b");
    CHECK(pb.mu_hat == doctest::Approx(11.0));
    CHECK(pb.var_hat == doctest::Approx(2.0));
}

TEST_CASE("zero-noise perturbed pipeline equals the baseline exactly") {
    const Table t = testutil::make_blob_table(44, 80, 4);
    std::vector<std::uint64_t> train;
    for (std::uint64_t i = 0; i < 40; ++i) train.push_back(i);

    std::vector<std::string> labels;
    std::map<std::string, std::uint64_t> counts;
    for (auto id : train) {
        labels.push_back(t.rows[id].class_label);
        ++counts[t.rows[id].class_label];
    }
    std::vector<ClassConditionalStats> stats;
    for (std::size_t a = 0; a < t.attribute_names.size(); ++a) {
        PerturbedColumn col;
        col.attribute_name = t.attribute_names[a];
        col.noise_variance = 0.0;
        for (auto id : train) col.values.push_back(t.rows[id].values[a]);
        NoiseSpec spec;
        spec.variances = {0.0};
        const auto perturbed = perturb_column(col.values, spec, a, col.attribute_name);
        const auto s = compute_stats(perturbed, labels);
        stats.insert(stats.end(), s.begin(), s.end());
    }
    const auto via_pipeline = assemble_model(stats, counts);
    const auto via_baseline = baseline_fit(t, train);

    CHECK(via_pipeline.to_canonical_json() == via_baseline.to_canonical_json());
    for (std::uint64_t id = 40; id < 80; ++id) {
        std::map<std::string, double> instance;
        for (std::size_t a = 0; a < t.attribute_names.size(); ++a)
            instance[t.attribute_names[a]] = t.rows[id].values[a];
        CHECK(classify(via_pipeline, instance).log_scores ==
              classify(via_baseline, instance).log_scores);
    }
}

TEST_CASE("estimator unbiasedness: frozen Monte Carlo intervals") {
    // X ~ N(5, 4), noise variance 1, n = 10000 per trial, 200 trials.
    Xoshiro256pp data_rng(20240501);
    const std::size_t n = 10000;
    const int trials = 200;

    double sum_corrected = 0.0, sum_mean = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        std::vector<double> x(n);
        for (auto& v : x) v = 5.0 + 2.0 * data_rng.normal();
        NoiseSpec spec;
        spec.variances = {1.0};
        spec.seed = 900 + trial;
        const auto w = perturb_column(x, spec, 0);
        sum_mean += sample_mean(w.values);
        sum_corrected += sample_variance(w.values) - 1.0;
    }
    const double mean_corrected = sum_corrected / trials;
    const double mean_of_means = sum_mean / trials;
    CHECK(mean_corrected >= 3.8);
    CHECK(mean_corrected <= 4.2);
    CHECK(mean_of_means >= 4.95);
    CHECK(mean_of_means <= 5.05);
}

TEST_CASE("log-space scores match the brute-force posterior within 1e-9") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const Table t = testutil::make_blob_table(seed, 50, 3);
        std::vector<std::uint64_t> ids(t.rows.size());
        std::iota(ids.begin(), ids.end(), 0);
        const auto model = baseline_fit(t, ids);

        for (std::size_t i = 0; i < 25; ++i) {
            std::map<std::string, double> instance;
            for (std::size_t a = 0; a < t.attribute_names.size(); ++a)
                instance[t.attribute_names[a]] = t.rows[i].values[a];
            const auto result = classify(model, instance);
            const auto oracle = testutil::oracle_posterior(model, instance);

            // normalize exp(log_scores)
            double total = 0.0;
            std::map<std::string, double> softmax;
            for (const auto& [label, score] : result.log_scores) {
                softmax[label] = std::exp(score);
                total += softmax[label];
            }
            for (auto& [label, p] : softmax) {
                p /= total;
                CHECK(std::fabs(p - oracle.at(label)) <= 1e-9);
            }
        }
    }
}

TEST_CASE("priors of fitted models sum to one within 1e-12") {
    for (std::uint64_t seed : {5u, 6u, 7u, 8u}) {
        const Table t = testutil::make_blob_table(seed, 64, 2);
        std::vector<std::uint64_t> ids(t.rows.size());
        std::iota(ids.begin(), ids.end(), 0);
        const auto model = baseline_fit(t, ids);
        double total = 0.0;
        for (const auto& [label, p] : model.priors) total += p;
        CHECK(std::fabs(total - 1.0) <= 1e-12);
    }
}

TEST_CASE("model JSON round-trips canonically") {
    const Table t = testutil::make_blob_table(77, 30, 3);
    std::vector<std::uint64_t> ids(t.rows.size());
    std::iota(ids.begin(), ids.end(), 0);
    const auto model = baseline_fit(t, ids);
    const auto round_tripped = GaussianNBModel::from_json(nlohmann::json::parse(model.to_canonical_json()));
    CHECK(round_tripped.to_canonical_json() == model.to_canonical_json());
}
