// Command-line front end: benchmark experiments over the in-process carrier
// plus real coordinator/party roles over TCP.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fednb/harness.hpp"
#include "fednb/transport.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitProtocol = 3;

std::string resolve_scheme(const std::string& name) {
    if (name == "rsa") return fednb::kRsaSchemeId;
    if (name == "null") return fednb::kNullSchemeId;
    return name;
}

std::pair<std::string, std::uint16_t> parse_host_port(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos)
        throw CLI::ValidationError("address", "expected HOST:PORT, got '" + text + "'");
    const std::string host = text.substr(0, colon);
    const int port = std::stoi(text.substr(colon + 1));
    if (port < 0 || port > 65535) throw CLI::ValidationError("address", "port out of range");
    return {host, static_cast<std::uint16_t>(port)};
}

void write_or_print(const json& doc, const std::string& out_path, const std::string& table) {
    if (out_path.empty()) {
        std::cout << doc.dump(2) << '\n';
        if (!table.empty()) std::cerr << table;
    } else {
        std::ofstream out(out_path);
        if (!out) throw fednb::Error("cannot write '" + out_path + "'");
        out << doc.dump(2) << '\n';
        if (!table.empty()) std::cout << table;
    }
}

struct ExperimentFlags {
    std::string dataset, label, config_path, out_path;
    std::uint32_t sites = 3;
    std::uint64_t seed = 42;
    std::uint64_t noise_seed = 0;
    bool noise_seed_set = false;
    std::uint32_t repeats = 10;
    double fraction = 0.5;
    bool cross_validation = false;
    std::uint32_t folds = 10;
    double noise_ratio = 0.25;
    bool noise_ratio_set = false;
    double noise_abs = 0.0;
    bool noise_abs_set = false;
    std::string family = "gaussian";
    std::string transport = "in-process";
    std::string scheme = "rsa";
    bool records_mode = false;
    bool perturbed_test = false;
};

void add_experiment_options(CLI::App* cmd, ExperimentFlags& flags) {
    cmd->add_option("--dataset", flags.dataset, "CSV dataset path");
    cmd->add_option("--label", flags.label, "label column (name or zero-based index)");
    cmd->add_option("--config", flags.config_path, "experiment config JSON (flags override)");
    cmd->add_option("--sites", flags.sites, "number of vertical fragments");
    cmd->add_option("--seed", flags.seed, "split seed");
    cmd->add_option("--noise-seed", flags.noise_seed, "noise seed (default: split seed + 1)")
        ->each([&](const std::string&) { flags.noise_seed_set = true; });
    cmd->add_option("--repeats", flags.repeats, "holdout repetitions");
    cmd->add_option("--fraction", flags.fraction, "train fraction");
    cmd->add_flag("--cv", flags.cross_validation, "repeated k-fold cross-validation instead of holdout");
    cmd->add_option("--folds", flags.folds, "folds for --cv");
    cmd->add_option("--noise-ratio", flags.noise_ratio,
                    "noise variance as a ratio of per-attribute sample variance")
        ->each([&](const std::string&) { flags.noise_ratio_set = true; });
    cmd->add_option("--noise-abs", flags.noise_abs, "absolute noise variance")
        ->each([&](const std::string&) { flags.noise_abs_set = true; });
    cmd->add_option("--family", flags.family, "noise family: gaussian|uniform");
    cmd->add_option("--transport", flags.transport, "in-process|tcp");
    cmd->add_option("--scheme", flags.scheme, "envelope scheme: rsa|null");
    cmd->add_flag("--records-mode", flags.records_mode,
                  "sites send perturbed records; coordinator computes the statistics");
    cmd->add_flag("--perturbed-test", flags.perturbed_test, "also disguise test values (study flag)");
    cmd->add_option("--out", flags.out_path, "write report JSON here instead of stdout");
}

fednb::ExperimentConfig build_config(const CLI::App* cmd, const ExperimentFlags& flags) {
    fednb::ExperimentConfig config;
    if (!flags.config_path.empty()) {
        std::ifstream in(flags.config_path);
        if (!in) throw fednb::Error("cannot open config '" + flags.config_path + "'");
        config = fednb::ExperimentConfig::from_json(json::parse(in));
    }
    auto given = [&](const std::string& name) { return cmd->count(name) > 0; };

    if (given("--dataset")) config.dataset_path = flags.dataset;
    if (given("--label")) config.label_column = flags.label;
    if (given("--sites")) config.num_sites = flags.sites;
    if (given("--seed") || flags.config_path.empty()) config.split_plan.seed = flags.seed;
    if (given("--repeats")) config.split_plan.repeats = flags.repeats;
    if (given("--fraction")) config.split_plan.train_fraction = flags.fraction;
    if (given("--cv"))
        config.split_plan.scheme =
            flags.cross_validation ? fednb::SplitPlan::Scheme::KFold : fednb::SplitPlan::Scheme::Holdout;
    if (given("--folds")) config.split_plan.folds = flags.folds;
    if (flags.noise_abs_set)
        config.noise.mode = fednb::VarianceMode::absolute(flags.noise_abs);
    else if (flags.noise_ratio_set)
        config.noise.mode = fednb::VarianceMode::ratio(flags.noise_ratio);
    if (given("--family")) config.noise.family = fednb::noise_family_from_string(flags.family);
    if (flags.noise_seed_set)
        config.noise.seed = flags.noise_seed;
    else if (flags.config_path.empty())
        config.noise.seed = config.split_plan.seed + 1;
    if (given("--transport")) config.transport = flags.transport;
    if (given("--scheme")) config.scheme_id = resolve_scheme(flags.scheme);
    if (given("--records-mode")) config.records_mode = flags.records_mode;
    if (given("--perturbed-test")) config.perturbed_test = flags.perturbed_test;

    if (given("--out")) config.out_path = flags.out_path;

    if (config.dataset_path.empty()) throw CLI::ValidationError("--dataset", "required");
    if (config.label_column.empty()) throw CLI::ValidationError("--label", "required");
    return config;
}

std::vector<double> parse_ratio_list(const std::string& text) {
    std::vector<double> ratios;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) ratios.push_back(std::stod(item));
    }
    return ratios;
}

fednb::SessionConfig session_from_flags(const ExperimentFlags& flags, std::uint32_t min_sites,
                                        std::uint32_t repeat_index, const std::string& session_id) {
    fednb::SessionConfig session;
    session.session_id = session_id;
    session.min_sites = min_sites;
    session.split_plan.seed = flags.seed;
    session.split_plan.train_fraction = flags.fraction;
    session.split_plan.repeats = flags.repeats;
    if (flags.cross_validation) {
        session.split_plan.scheme = fednb::SplitPlan::Scheme::KFold;
        session.split_plan.folds = flags.folds;
    }
    session.repeat_index = repeat_index;
    session.noise.family = fednb::noise_family_from_string(flags.family);
    session.noise.mode = flags.noise_abs_set ? fednb::VarianceMode::absolute(flags.noise_abs)
                                             : fednb::VarianceMode::ratio(flags.noise_ratio);
    session.noise.seed = flags.noise_seed_set ? flags.noise_seed : flags.seed + 1;
    session.scheme_id = resolve_scheme(flags.scheme);
    return session;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Privacy-preserving federated Gaussian Naive Bayes over vertical fragments"};
    app.require_subcommand(1);

    // run / sweep / baseline
    ExperimentFlags run_flags, sweep_flags, baseline_flags;
    CLI::App* run_cmd = app.add_subcommand("run", "full experiment: distributed+perturbed vs baseline");
    add_experiment_options(run_cmd, run_flags);
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "experiment per noise ratio, shared splits");
    add_experiment_options(sweep_cmd, sweep_flags);
    std::string ratio_text = "0,0.1,0.25,0.5,1.0";
    sweep_cmd->add_option("--ratios", ratio_text, "comma-separated noise ratios");
    CLI::App* baseline_cmd = app.add_subcommand("baseline", "plaintext centralized run only");
    add_experiment_options(baseline_cmd, baseline_flags);

    // partition
    std::string part_dataset, part_label, part_out_dir = ".";
    std::uint32_t part_sites = 3;
    CLI::App* partition_cmd = app.add_subcommand("partition", "write vertical fragment CSVs");
    partition_cmd->add_option("--dataset", part_dataset)->required();
    partition_cmd->add_option("--label", part_label)->required();
    partition_cmd->add_option("--sites", part_sites);
    partition_cmd->add_option("--out-dir", part_out_dir);

    // coordinator
    ExperimentFlags coord_flags;
    std::string listen_addr = "127.0.0.1:7700";
    std::uint32_t coord_min_sites = 3, coord_repeat_index = 0;
    int coord_timeout_ms = 30000;
    std::string coord_session_id = "tcp-session";
    CLI::App* coordinator_cmd = app.add_subcommand("coordinator", "trusted-third-party role over TCP");
    coordinator_cmd->add_option("--listen", listen_addr, "HOST:PORT (port 0 = ephemeral)");
    coordinator_cmd->add_option("--min-sites", coord_min_sites);
    coordinator_cmd->add_option("--repeat-index", coord_repeat_index);
    coordinator_cmd->add_option("--timeout-ms", coord_timeout_ms);
    coordinator_cmd->add_option("--session-id", coord_session_id);
    coordinator_cmd->add_option("--seed", coord_flags.seed);
    coordinator_cmd->add_option("--noise-seed", coord_flags.noise_seed)
        ->each([&](const std::string&) { coord_flags.noise_seed_set = true; });
    coordinator_cmd->add_option("--repeats", coord_flags.repeats);
    coordinator_cmd->add_option("--fraction", coord_flags.fraction);
    coordinator_cmd->add_option("--noise-ratio", coord_flags.noise_ratio)
        ->each([&](const std::string&) { coord_flags.noise_ratio_set = true; });
    coordinator_cmd->add_option("--noise-abs", coord_flags.noise_abs)
        ->each([&](const std::string&) { coord_flags.noise_abs_set = true; });
    coordinator_cmd->add_option("--family", coord_flags.family);
    coordinator_cmd->add_option("--scheme", coord_flags.scheme);
    std::string coord_out;
    coordinator_cmd->add_option("--out", coord_out, "write the broadcast model JSON here");

    // party
    std::string connect_addr, fragment_path, party_scheme = "rsa", party_out;
    std::uint32_t party_site_id = 0;
    int party_timeout_ms = 30000;
    bool party_records = false;
    CLI::App* party_cmd = app.add_subcommand("party", "data-site role over TCP");
    party_cmd->add_option("--connect", connect_addr, "coordinator HOST:PORT")->required();
    party_cmd->add_option("--fragment", fragment_path, "fragment CSV (row_id, attrs..., label)")
        ->required();
    party_cmd->add_option("--site-id", party_site_id)->required();
    party_cmd->add_option("--scheme", party_scheme);
    party_cmd->add_flag("--records-mode", party_records);
    party_cmd->add_option("--timeout-ms", party_timeout_ms);
    party_cmd->add_option("--out", party_out, "write the received model JSON here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            const auto config = build_config(run_cmd, run_flags);
            const auto report = fednb::run_experiment(config);
            write_or_print(report.to_json(), config.out_path.string(), report.to_table());
        } else if (sweep_cmd->parsed()) {
            const auto config = build_config(sweep_cmd, sweep_flags);
            const auto ratios = parse_ratio_list(ratio_text);
            const auto reports = fednb::sweep_noise(config, ratios);
            json out = json::array();
            std::string tables;
            for (std::size_t i = 0; i < reports.size(); ++i) {
                out.push_back({{"ratio", ratios[i]}, {"report", reports[i].to_json()}});
                tables += "ratio " + std::to_string(ratios[i]) + "\n" + reports[i].to_table() + "\n";
            }
            write_or_print(out, config.out_path.string(), tables);
        } else if (baseline_cmd->parsed()) {
            const auto config = build_config(baseline_cmd, baseline_flags);
            const auto report = fednb::run_baseline(config);
            write_or_print(report.to_json(), config.out_path.string(), report.to_table());
        } else if (partition_cmd->parsed()) {
            const auto table =
                fednb::load_csv(part_dataset, fednb::parse_label_selector(part_label));
            const auto fragments = fednb::partition_vertical(table, part_sites);
            for (const auto& fragment : fragments) {
                const auto path = std::filesystem::path(part_out_dir) /
                                  ("fragment-" + std::to_string(fragment.site_id) + ".csv");
                fednb::write_fragment_csv(fragment, table.label_name, path);
                std::cout << path.string() << ": " << fragment.attribute_names.size()
                          << " attribute(s), " << fragment.rows.size() << " row(s)\n";
            }
        } else if (coordinator_cmd->parsed()) {
            const auto [host, port] = parse_host_port(listen_addr);
            auto session = session_from_flags(coord_flags, coord_min_sites, coord_repeat_index,
                                              coord_session_id);
            fednb::Coordinator coordinator(session);
            fednb::TcpCoordinatorServer server(host, port);
            std::cerr << "listening on " << host << ":" << server.port() << ", waiting for "
                      << coord_min_sites << " site(s)\n";
            const auto model = server.run(coordinator, coord_min_sites, coord_timeout_ms);
            write_or_print(nlohmann::json::parse(model.to_canonical_json()), coord_out, "");
        } else if (party_cmd->parsed()) {
            const auto [host, port] = parse_host_port(connect_addr);
            fednb::PartyOptions options;
            options.scheme_id = resolve_scheme(party_scheme);
            options.records_mode = party_records;
            fednb::Party party(fednb::load_fragment_csv(fragment_path, party_site_id), options);
            const auto model = fednb::run_tcp_party(party, host, port, party_timeout_ms);
            write_or_print(nlohmann::json::parse(model.to_canonical_json()), party_out, "");
        }
    } catch (const CLI::Error& e) {
        std::cerr << e.what() << '\n';
        return kExitUsage;
    } catch (const fednb::ParseError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const fednb::SchemaError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const fednb::EmptyDataset& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const fednb::TooManySites& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const fednb::DegenerateSplit& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const fednb::InvalidVariance& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const fednb::InsufficientClassData& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const fednb::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitProtocol;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitProtocol;
    }
    return kExitOk;
}
