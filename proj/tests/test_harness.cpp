#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include <nlohmann/json.hpp>

#include "fednb/harness.hpp"
#include "testutil.hpp"

using namespace fednb;

namespace {

ExperimentConfig fixture_config(std::uint32_t repeats = 4) {
    ExperimentConfig config;
    config.dataset_path = testutil::fixture("synthetic.csv");
    config.label_column = "outcome";
    config.num_sites = 3;
    config.split_plan.seed = 42;
    config.split_plan.repeats = repeats;
    config.noise.mode = VarianceMode::ratio(0.25);
    config.noise.seed = 43;
    config.scheme_id = kNullSchemeId;
    return config;
}

}  // namespace

TEST_CASE("accuracy is exactly correct/total on a hand-counted toy set") {
    // model: single attribute, class means far apart, so predictions are
    // readable off the values
    GaussianNBModel model;
    model.class_labels = {"hi", "lo"};
    model.priors = {{"hi", 0.5}, {"lo", 0.5}};
    model.attributes = {{"x", {{"hi", {10.0, 1.0}}, {"lo", {0.0, 1.0}}}}};

    Table table;
    table.attribute_names = {"x"};
    // boundary sits at x = 5: predictions lo lo lo lo hi hi hi hi lo hi,
    // truths below -> rows 3 and 7 miss, 8 of 10 match
    table.rows = {{0, {0.1}, "lo"},  {1, {-0.5}, "lo"}, {2, {1.2}, "lo"}, {3, {2.0}, "hi"},
                  {4, {9.0}, "hi"},  {5, {10.5}, "hi"}, {6, {8.2}, "hi"}, {7, {11.0}, "lo"},
                  {8, {3.0}, "lo"},  {9, {7.0}, "hi"}};
    std::vector<std::uint64_t> ids(10);
    std::iota(ids.begin(), ids.end(), 0);
    CHECK(evaluate_accuracy(model, table, ids) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("zero noise makes the perturbed column equal the baseline column") {
    const Table table = load_csv(testutil::fixture("synthetic.csv"), std::string("outcome"));
    ExperimentConfig config = fixture_config(3);
    config.noise.mode = VarianceMode::ratio(0.0);
    const auto report = run_experiment_on(table, config);
    REQUIRE(report.repeats.size() == 3);
    for (const auto& r : report.repeats) CHECK(r.acc_perturbed == r.acc_baseline);
}

TEST_CASE("identical config and dataset give a byte-identical report") {
    const Table table = load_csv(testutil::fixture("synthetic.csv"), std::string("outcome"));
    const auto config = fixture_config(3);
    const auto a = run_experiment_on(table, config);
    const auto b = run_experiment_on(table, config);
    CHECK(a.to_json(false).dump() == b.to_json(false).dump());
}

TEST_CASE("baseline column matches an independent centralized implementation") {
    const Table table = load_csv(testutil::fixture("synthetic.csv"), std::string("outcome"));
    const auto config = fixture_config(4);
    const auto report = run_experiment_on(table, config);
    const auto splits = generate_splits(table.rows.size(), config.split_plan);
    for (const auto& r : report.repeats) {
        const testutil::OracleNB oracle(table, splits[r.index].train_ids);
        CHECK(r.acc_baseline ==
              doctest::Approx(oracle.accuracy(table, splits[r.index].test_ids)).epsilon(1e-12));
    }
}

TEST_CASE("sweep over [0] reduces to the zero-noise run; empty sweep is empty") {
    const Table table = load_csv(testutil::fixture("synthetic.csv"), std::string("outcome"));
    const auto config = fixture_config(2);

    const double zero = 0.0;
    const auto reports = sweep_noise_on(table, config, std::span(&zero, 1));
    REQUIRE(reports.size() == 1);
    for (const auto& r : reports[0].repeats) CHECK(r.acc_perturbed == r.acc_baseline);

    const auto none = sweep_noise_on(table, config, {});
    CHECK(none.empty());
}

TEST_CASE("sweep shares splits across ratios (baseline column constant)") {
    const Table table = load_csv(testutil::fixture("synthetic.csv"), std::string("outcome"));
    const auto config = fixture_config(3);
    const std::vector<double> ratios = {0.0, 0.5};
    const auto reports = sweep_noise_on(table, config, ratios);
    REQUIRE(reports.size() == 2);
    for (std::size_t r = 0; r < reports[0].repeats.size(); ++r)
        CHECK(reports[0].repeats[r].acc_baseline == reports[1].repeats[r].acc_baseline);
}

TEST_CASE("accuracy decays gently as the noise ratio grows") {
    const Table table = load_csv(testutil::fixture("synthetic.csv"), std::string("outcome"));
    const auto config = fixture_config(10);
    const std::vector<double> ratios = {0.0, 0.25, 1.0, 4.0};
    const auto reports = sweep_noise_on(table, config, ratios);
    for (std::size_t i = 1; i < reports.size(); ++i)
        CHECK(reports[i].mean_perturbed <= reports[i - 1].mean_perturbed + 0.02);
}

TEST_CASE("records mode reproduces the stats-mode report exactly") {
    const Table table = load_csv(testutil::fixture("synthetic.csv"), std::string("outcome"));
    auto config = fixture_config(2);
    const auto stats_report = run_experiment_on(table, config);
    config.records_mode = true;
    const auto records_report = run_experiment_on(table, config);
    for (std::size_t r = 0; r < stats_report.repeats.size(); ++r) {
        CHECK(stats_report.repeats[r].acc_perturbed == records_report.repeats[r].acc_perturbed);
        CHECK(stats_report.repeats[r].acc_baseline == records_report.repeats[r].acc_baseline);
    }
}

TEST_CASE("perturbed-test study flag stays in range and changes the numbers") {
    const Table table = load_csv(testutil::fixture("synthetic.csv"), std::string("outcome"));
    auto config = fixture_config(2);
    config.perturbed_test = true;
    const auto report = run_experiment_on(table, config);
    for (const auto& r : report.repeats) {
        CHECK(r.acc_perturbed >= 0.0);
        CHECK(r.acc_perturbed <= 1.0);
    }
}

TEST_CASE("baseline-only run reports a single column") {
    const Table table = load_csv(testutil::fixture("synthetic.csv"), std::string("outcome"));
    const auto report = run_baseline_on(table, fixture_config(3));
    CHECK_FALSE(report.has_perturbed);
    const auto j = report.to_json();
    CHECK(!j.at("repeats")[0].contains("acc_perturbed"));
    CHECK(j.at("summary").contains("baseline"));
    CHECK(!j.at("summary").contains("perturbed"));
}

TEST_CASE("config JSON round-trips") {
    auto config = fixture_config(7);
    config.records_mode = true;
    config.transport = "tcp";
    config.out_path = "report.json";
    const auto back = ExperimentConfig::from_json(config.to_json());
    CHECK(back.to_json().dump() == config.to_json().dump());
}

TEST_CASE("tcp transport reproduces the in-process report") {
    const Table table = load_csv(testutil::fixture("synthetic.csv"), std::string("outcome"));
    auto config = fixture_config(2);
    const auto in_proc = run_experiment_on(table, config);
    config.transport = "tcp";
    const auto tcp = run_experiment_on(table, config);
    // timing differs, everything else must not
    CHECK(in_proc.to_json(false).dump() != tcp.to_json(false).dump());  // config echo differs
    for (std::size_t r = 0; r < in_proc.repeats.size(); ++r) {
        CHECK(in_proc.repeats[r].acc_perturbed == tcp.repeats[r].acc_perturbed);
        CHECK(in_proc.repeats[r].acc_baseline == tcp.repeats[r].acc_baseline);
    }
}

TEST_CASE("report JSON carries config, repeats, summary and timing") {
    const Table table = load_csv(testutil::fixture("synthetic.csv"), std::string("outcome"));
    const auto report = run_experiment_on(table, fixture_config(2));
    const auto j = report.to_json();
    CHECK(j.contains("config"));
    CHECK(j.at("repeats").size() == 2);
    CHECK(j.at("summary").at("perturbed").contains("mean"));
    CHECK(j.contains("timing_ms"));
    CHECK(!report.to_json(false).contains("timing_ms"));
    CHECK(report.to_table().find("mean") != std::string::npos);
}

TEST_CASE("10x10-fold cross-validation switch produces folds x repeats results") {
    const Table table = load_csv(testutil::fixture("synthetic.csv"), std::string("outcome"));
    auto config = fixture_config(2);
    config.split_plan.scheme = SplitPlan::Scheme::KFold;
    config.split_plan.folds = 5;
    const auto report = run_experiment_on(table, config);
    CHECK(report.repeats.size() == 10);  // 2 repetitions x 5 folds
}
