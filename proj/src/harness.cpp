#include "fednb/harness.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "fednb/rng.hpp"
#include "fednb/transport.hpp"

namespace fednb {

using nlohmann::json;

json ExperimentConfig::to_json() const {
    return json{{"dataset_path", dataset_path.string()},
                {"label_column", label_column},
                {"num_sites", num_sites},
                {"split_plan",
                 {{"seed", split_plan.seed},
                  {"train_fraction", split_plan.train_fraction},
                  {"repeats", split_plan.repeats},
                  {"scheme", split_plan.scheme == SplitPlan::Scheme::KFold ? "kfold" : "holdout"},
                  {"folds", split_plan.folds}}},
                {"noise",
                 {{"family", to_string(noise.family)},
                  {"mode", to_string(noise.mode.kind)},
                  {"value", noise.mode.value},
                  {"seed", noise.seed}}},
                {"transport", transport},
                {"scheme_id", scheme_id},
                {"records_mode", records_mode},
                {"perturbed_test", perturbed_test},
                {"out_path", out_path.string()}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig config;
    config.dataset_path = j.at("dataset_path").get<std::string>();
    config.label_column = j.at("label_column").get<std::string>();
    config.num_sites = j.value("num_sites", 3u);
    if (j.contains("split_plan")) {
        const auto& plan = j.at("split_plan");
        config.split_plan.seed = plan.value("seed", std::uint64_t{0});
        config.split_plan.train_fraction = plan.value("train_fraction", 0.5);
        config.split_plan.repeats = plan.value("repeats", 10u);
        config.split_plan.scheme = plan.value("scheme", std::string("holdout")) == "kfold"
                                       ? SplitPlan::Scheme::KFold
                                       : SplitPlan::Scheme::Holdout;
        config.split_plan.folds = plan.value("folds", 10u);
    }
    if (j.contains("noise")) {
        const auto& noise = j.at("noise");
        config.noise.family = noise_family_from_string(noise.value("family", std::string("gaussian")));
        config.noise.mode.kind = variance_kind_from_string(noise.value("mode", std::string("ratio")));
        config.noise.mode.value = noise.value("value", 0.25);
        config.noise.seed = noise.value("seed", std::uint64_t{0});
    }
    config.transport = j.value("transport", std::string("in-process"));
    config.scheme_id = j.value("scheme_id", std::string(kRsaSchemeId));
    config.records_mode = j.value("records_mode", false);
    config.perturbed_test = j.value("perturbed_test", false);
    config.out_path = j.value("out_path", std::string());
    return config;
}

namespace {

struct Summary {
    double mean = 0.0;
    double stddev = 0.0;
};

Summary summarize(const std::vector<double>& xs) {
    Summary s;
    if (xs.empty()) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double sq = 0.0;
        for (double x : xs) sq += (x - s.mean) * (x - s.mean);
        s.stddev = std::sqrt(sq / static_cast<double>(xs.size() - 1));
    }
    return s;
}

// Test rows presented to the model, as attribute_name -> value maps. With
// perturbed_test the held-out values are disguised too: per attribute, the
// noise variance is re-resolved on the train column (what the sites did) and
// the stream is keyed off a tag disjoint from every site's train streams.
std::vector<std::map<std::string, double>> test_instances(const Table& table, const Split& split,
                                                          const ExperimentConfig& config) {
    std::vector<std::map<std::string, double>> instances(split.test_ids.size());
    for (std::size_t a = 0; a < table.attribute_names.size(); ++a) {
        std::vector<double> column;
        column.reserve(split.test_ids.size());
        for (std::uint64_t id : split.test_ids) column.push_back(table.rows.at(id).values.at(a));

        if (config.perturbed_test) {
            std::vector<double> train_column;
            train_column.reserve(split.train_ids.size());
            for (std::uint64_t id : split.train_ids)
                train_column.push_back(table.rows.at(id).values.at(a));
            NoiseSpec spec;
            spec.family = config.noise.family;
            spec.variances = {resolve_variance(config.noise.mode, train_column)};
            spec.seed = derive_stream_seed(config.noise.seed, 0x7E57000000000000ULL + a);
            column = perturb_column(column, spec, a).values;
        }
        for (std::size_t i = 0; i < column.size(); ++i)
            instances[i][table.attribute_names[a]] = column[i];
    }
    return instances;
}

GaussianNBModel run_one_session(const std::vector<PartitionedTable>& fragments,
                                const SessionConfig& session, const ExperimentConfig& config) {
    PartyOptions party_options;
    party_options.scheme_id = config.scheme_id;
    party_options.records_mode = config.records_mode;

    std::vector<Party> parties;
    parties.reserve(fragments.size());
    for (const auto& fragment : fragments) parties.emplace_back(fragment, party_options);

    Coordinator coordinator(session);

    if (config.transport == "tcp") {
        TcpCoordinatorServer server("127.0.0.1", 0);
        std::vector<std::thread> threads;
        std::vector<std::exception_ptr> failures(parties.size());
        for (std::size_t i = 0; i < parties.size(); ++i) {
            threads.emplace_back([&, i] {
                try {
                    run_tcp_party(parties[i], "127.0.0.1", server.port());
                } catch (...) {
                    failures[i] = std::current_exception();
                }
            });
        }
        GaussianNBModel model;
        std::exception_ptr coordinator_failure;
        try {
            model = server.run(coordinator, parties.size(), 30000);
        } catch (...) {
            coordinator_failure = std::current_exception();
        }
        for (auto& thread : threads) thread.join();
        if (coordinator_failure) std::rethrow_exception(coordinator_failure);
        for (const auto& failure : failures)
            if (failure) std::rethrow_exception(failure);
        return model;
    }

    if (config.transport != "in-process")
        throw Error("unknown transport '" + config.transport + "'");
    InProcessNetwork network;
    return run_session(coordinator, parties, network);
}

}  // namespace

double evaluate_accuracy(const GaussianNBModel& model, const Table& table,
                         std::span<const std::uint64_t> test_ids) {
    if (test_ids.empty()) throw Error("empty test set");
    std::size_t correct = 0;
    for (std::uint64_t id : test_ids) {
        const Row& row = table.rows.at(id);
        std::map<std::string, double> instance;
        for (std::size_t a = 0; a < table.attribute_names.size(); ++a)
            instance[table.attribute_names[a]] = row.values.at(a);
        if (classify(model, instance).label == row.class_label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test_ids.size());
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
    Table table = load_csv(config.dataset_path, parse_label_selector(config.label_column));
    return run_experiment_on(table, config);
}

ExperimentReport run_experiment_on(const Table& table, const ExperimentConfig& config) {
    const auto start_time = std::chrono::steady_clock::now();

    const auto fragments = partition_vertical(table, config.num_sites);
    const auto splits = generate_splits(table.rows.size(), config.split_plan);

    ExperimentReport report;
    report.config_echo = config.to_json();

    std::vector<double> perturbed_accs, baseline_accs;
    for (std::uint32_t repeat = 0; repeat < splits.size(); ++repeat) {
        SessionConfig session;
        session.session_id = "s" + std::to_string(config.split_plan.seed) + "-r" + std::to_string(repeat);
        session.min_sites = config.num_sites;
        session.split_plan = config.split_plan;
        session.repeat_index = repeat;
        session.noise = config.noise;
        session.scheme_id = config.scheme_id;

        GaussianNBModel distributed;
        try {
            distributed = run_one_session(fragments, session, config);
        } catch (SessionError& e) {
            throw SessionError("repeat " + std::to_string(repeat) + ": " + e.what(), e.trace());
        }
        const GaussianNBModel baseline = baseline_fit(table, splits[repeat].train_ids);

        const auto instances = test_instances(table, splits[repeat], config);
        std::size_t correct_distributed = 0, correct_baseline = 0;
        for (std::size_t i = 0; i < instances.size(); ++i) {
            const auto& truth = table.rows.at(splits[repeat].test_ids[i]).class_label;
            if (classify(distributed, instances[i]).label == truth) ++correct_distributed;
            if (classify(baseline, instances[i]).label == truth) ++correct_baseline;
        }
        RepeatResult result;
        result.index = repeat;
        result.acc_perturbed =
            static_cast<double>(correct_distributed) / static_cast<double>(instances.size());
        result.acc_baseline =
            static_cast<double>(correct_baseline) / static_cast<double>(instances.size());
        report.repeats.push_back(result);
        perturbed_accs.push_back(result.acc_perturbed);
        baseline_accs.push_back(result.acc_baseline);
    }

    const Summary perturbed = summarize(perturbed_accs);
    const Summary baseline = summarize(baseline_accs);
    report.mean_perturbed = perturbed.mean;
    report.std_perturbed = perturbed.stddev;
    report.mean_baseline = baseline.mean;
    report.std_baseline = baseline.stddev;
    report.timing_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start_time)
                           .count();
    return report;
}

ExperimentReport run_baseline(const ExperimentConfig& config) {
    Table table = load_csv(config.dataset_path, parse_label_selector(config.label_column));
    return run_baseline_on(table, config);
}

ExperimentReport run_baseline_on(const Table& table, const ExperimentConfig& config) {
    const auto start_time = std::chrono::steady_clock::now();
    const auto splits = generate_splits(table.rows.size(), config.split_plan);

    ExperimentReport report;
    report.config_echo = config.to_json();
    report.has_perturbed = false;

    std::vector<double> baseline_accs;
    for (std::uint32_t repeat = 0; repeat < splits.size(); ++repeat) {
        const GaussianNBModel model = baseline_fit(table, splits[repeat].train_ids);
        RepeatResult result;
        result.index = repeat;
        result.acc_baseline = evaluate_accuracy(model, table, splits[repeat].test_ids);
        report.repeats.push_back(result);
        baseline_accs.push_back(result.acc_baseline);
    }
    const Summary baseline = summarize(baseline_accs);
    report.mean_baseline = baseline.mean;
    report.std_baseline = baseline.stddev;
    report.timing_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start_time)
                           .count();
    return report;
}

std::vector<ExperimentReport> sweep_noise(const ExperimentConfig& config,
                                          std::span<const double> ratios) {
    Table table = load_csv(config.dataset_path, parse_label_selector(config.label_column));
    return sweep_noise_on(table, config, ratios);
}

std::vector<ExperimentReport> sweep_noise_on(const Table& table, const ExperimentConfig& config,
                                             std::span<const double> ratios) {
    std::vector<ExperimentReport> reports;
    reports.reserve(ratios.size());
    for (double ratio : ratios) {
        ExperimentConfig swept = config;
        swept.noise.mode = VarianceMode::ratio(ratio);
        reports.push_back(run_experiment_on(table, swept));
    }
    return reports;
}

json ExperimentReport::to_json(bool include_timing) const {
    json repeats_json = json::array();
    for (const auto& r : repeats) {
        json entry{{"index", r.index}, {"acc_baseline", r.acc_baseline}};
        if (has_perturbed) entry["acc_perturbed"] = r.acc_perturbed;
        repeats_json.push_back(entry);
    }
    json summary{{"baseline", {{"mean", mean_baseline}, {"std", std_baseline}}}};
    if (has_perturbed) summary["perturbed"] = {{"mean", mean_perturbed}, {"std", std_perturbed}};
    json out{{"config", config_echo}, {"repeats", repeats_json}, {"summary", summary}};
    if (include_timing) out["timing_ms"] = timing_ms;
    return out;
}

std::string ExperimentReport::to_table() const {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4);
    out << std::setw(8) << "repeat";
    if (has_perturbed) out << std::setw(12) << "perturbed";
    out << std::setw(12) << "baseline" << '\n';
    for (const auto& r : repeats) {
        out << std::setw(8) << r.index;
        if (has_perturbed) out << std::setw(12) << r.acc_perturbed;
        out << std::setw(12) << r.acc_baseline << '\n';
    }
    out << std::setw(8) << "mean";
    if (has_perturbed) out << std::setw(12) << mean_perturbed;
    out << std::setw(12) << mean_baseline << '\n';
    out << std::setw(8) << "std";
    if (has_perturbed) out << std::setw(12) << std_perturbed;
    out << std::setw(12) << std_baseline << '\n';
    return out.str();
}

}  // namespace fednb
