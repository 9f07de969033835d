#include "fednb/protocol.hpp"

#include <algorithm>
#include <cstring>

#include <nlohmann/json.hpp>

#include "fednb/perturb.hpp"
#include "fednb/rng.hpp"
#include "fednb/transport.hpp"

namespace fednb {

using nlohmann::json;

std::string to_string(CoordinatorPhase phase) {
    switch (phase) {
        case CoordinatorPhase::Broadcasting: return "broadcasting";
        case CoordinatorPhase::CollectingReady: return "collecting-ready";
        case CoordinatorPhase::CollectingStats: return "collecting-stats";
        case CoordinatorPhase::Done: return "done";
        case CoordinatorPhase::Aborted: return "aborted";
    }
    return "?";
}

std::string to_string(PartyPhase phase) {
    switch (phase) {
        case PartyPhase::Idle: return "idle";
        case PartyPhase::SentReady: return "sent-ready";
        case PartyPhase::SentStats: return "sent-stats";
        case PartyPhase::HasModel: return "has-model";
        case PartyPhase::Aborted: return "aborted";
    }
    return "?";
}

// --- StatsPayload ---

json StatsPayload::to_json() const {
    if (records_mode) {
        json columns_json = json::array();
        for (const auto& column : columns)
            columns_json.push_back({{"attribute", column.attribute_name},
                                    {"noise_variance", column.noise_variance},
                                    {"values", column.values}});
        return json{{"mode", "records"},
                    {"site_id", site_id},
                    {"labels", labels},
                    {"columns", columns_json}};
    }
    json stats_json = json::array();
    for (const auto& cell : attribute_stats)
        stats_json.push_back({{"attribute", cell.attribute_name},
                              {"class", cell.class_label},
                              {"n", cell.n},
                              {"mean", cell.mean},
                              {"s2", cell.sample_variance},
                              {"noise_variance", cell.noise_variance}});
    return json{{"mode", "stats"},
                {"site_id", site_id},
                {"class_counts", class_counts},
                {"stats", stats_json}};
}

std::string StatsPayload::to_canonical_json() const { return to_json().dump(); }

StatsPayload StatsPayload::from_json(const json& j) {
    StatsPayload payload;
    payload.site_id = j.at("site_id").get<std::uint32_t>();
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "records") {
        payload.records_mode = true;
        payload.labels = j.at("labels").get<std::vector<std::string>>();
        for (const auto& column_json : j.at("columns")) {
            PerturbedColumn column;
            column.attribute_name = column_json.at("attribute").get<std::string>();
            column.noise_variance = column_json.at("noise_variance").get<double>();
            column.values = column_json.at("values").get<std::vector<double>>();
            payload.columns.push_back(std::move(column));
        }
    } else if (mode == "stats") {
        payload.class_counts = j.at("class_counts").get<std::map<std::string, std::uint64_t>>();
        for (const auto& cell_json : j.at("stats")) {
            ClassConditionalStats cell;
            cell.attribute_name = cell_json.at("attribute").get<std::string>();
            cell.class_label = cell_json.at("class").get<std::string>();
            cell.n = cell_json.at("n").get<std::uint64_t>();
            cell.mean = cell_json.at("mean").get<double>();
            cell.sample_variance = cell_json.at("s2").get<double>();
            cell.noise_variance = cell_json.at("noise_variance").get<double>();
            payload.attribute_stats.push_back(std::move(cell));
        }
    } else {
        throw ProtocolViolation("unknown stats payload mode '" + mode + "'");
    }
    return payload;
}

// --- Coordinator ---

Coordinator::Coordinator(SessionConfig config) : config_(std::move(config)) {}

std::vector<Outgoing> Coordinator::abort(const std::string& reason) {
    phase_ = CoordinatorPhase::Aborted;
    abort_reason_ = reason;
    return {Outgoing{Outgoing::Dest::AllParties, 0, AbortMsg{config_.session_id, reason}}};
}

std::vector<Outgoing> Coordinator::step(const Event& event) {
    if (phase_ == CoordinatorPhase::Done || phase_ == CoordinatorPhase::Aborted) return {};

    if (std::holds_alternative<TimeoutEvent>(event))
        return abort("timeout while " + to_string(phase_));

    if (std::holds_alternative<StartTrigger>(event)) {
        if (phase_ != CoordinatorPhase::Broadcasting)
            return abort("protocol violation: start trigger while " + to_string(phase_));
        keys_ = scheme_by_id(config_.scheme_id).generate_keypair(config_.key_bits);
        phase_ = CoordinatorPhase::CollectingReady;
        return {Outgoing{Outgoing::Dest::AllParties, 0,
                         InitMsg{config_.session_id, config_.protocol_version, config_.min_sites}}};
    }

    const ProtocolMessage& msg = std::get<MsgEvent>(event).msg;

    if (const auto* abort_msg = std::get_if<AbortMsg>(&msg)) {
        // A party pulled out; relay so everyone stops.
        phase_ = CoordinatorPhase::Aborted;
        abort_reason_ = "aborted by a site: " + abort_msg->reason;
        return {Outgoing{Outgoing::Dest::AllParties, 0,
                         AbortMsg{config_.session_id, abort_reason_}}};
    }

    switch (phase_) {
        case CoordinatorPhase::CollectingReady:
            if (const auto* ready = std::get_if<ReadyMsg>(&msg)) return on_ready(*ready);
            return abort("protocol violation: " + message_type(msg) + " while collecting ready");
        case CoordinatorPhase::CollectingStats:
            if (const auto* stats = std::get_if<StatsMsg>(&msg)) return on_stats(*stats);
            if (const auto* ready = std::get_if<ReadyMsg>(&msg)) {
                // Enrollment closed at min_sites; a latecomer's Ready is not
                // a violation, it is just too late.
                if (!std::binary_search(roster_.begin(), roster_.end(), ready->site_id)) return {};
            }
            return abort("protocol violation: " + message_type(msg) + " while collecting stats");
        default:
            return abort("protocol violation: " + message_type(msg) + " while " + to_string(phase_));
    }
}

std::vector<Outgoing> Coordinator::on_ready(const ReadyMsg& msg) {
    if (site_keys_.count(msg.site_id))
        return abort("duplicate ready from site " + std::to_string(msg.site_id));
    site_keys_[msg.site_id] = msg.site_public_key;
    if (site_keys_.size() < config_.min_sites) return {};

    roster_.clear();
    for (const auto& [site, key] : site_keys_) roster_.push_back(site);
    phase_ = CoordinatorPhase::CollectingStats;

    StartMsg start;
    start.session_id = config_.session_id;
    start.coordinator_public_key = keys_.public_part;
    start.split_plan = config_.split_plan;
    start.repeat_index = config_.repeat_index;
    start.noise = config_.noise;
    start.roster = roster_;
    return {Outgoing{Outgoing::Dest::AllParties, 0, std::move(start)}};
}

std::vector<Outgoing> Coordinator::on_stats(const StatsMsg& msg) {
    if (!std::binary_search(roster_.begin(), roster_.end(), msg.site_id))
        return abort("stats from unrostered site " + std::to_string(msg.site_id));
    if (stats_.count(msg.site_id))
        return abort("duplicate stats from site " + std::to_string(msg.site_id));
    if (msg.envelope.scheme_id != config_.scheme_id)
        return abort("unexpected envelope scheme '" + msg.envelope.scheme_id + "'");
    if (msg.envelope.sender_id != std::to_string(msg.site_id))
        return abort("envelope sender '" + msg.envelope.sender_id + "' does not match site " +
                     std::to_string(msg.site_id));

    StatsPayload payload;
    try {
        const auto bytes = scheme_by_id(config_.scheme_id)
                               .open(msg.envelope, keys_.private_part, site_keys_.at(msg.site_id));
        payload = StatsPayload::from_json(json::parse(bytes.begin(), bytes.end()));
    } catch (const EnvelopeError& e) {
        return abort(std::string("envelope error: ") + e.what());
    } catch (const json::exception& e) {
        return abort(std::string("bad stats payload: ") + e.what());
    }
    if (payload.site_id != msg.site_id)
        return abort("stats payload claims site " + std::to_string(payload.site_id) +
                     " inside a message from site " + std::to_string(msg.site_id));

    // Records mode: derive counts and statistics here.
    if (payload.records_mode) {
        for (const auto& label : payload.labels) ++payload.class_counts[label];
        try {
            for (const auto& column : payload.columns) {
                auto stats = compute_stats(column, payload.labels);
                payload.attribute_stats.insert(payload.attribute_stats.end(), stats.begin(), stats.end());
            }
        } catch (const Error& e) {
            return abort(std::string("cannot compute stats from site records: ") + e.what());
        }
    }

    // Every site holds every row's label, so the counts must agree exactly.
    if (!stats_.empty()) {
        const StatsPayload& reference = stats_.begin()->second;
        if (payload.class_counts != reference.class_counts)
            return abort("class counts from site " + std::to_string(msg.site_id) +
                         " disagree with site " + std::to_string(stats_.begin()->first));
        if (payload.records_mode && reference.records_mode && payload.labels != reference.labels)
            return abort("label sequence from site " + std::to_string(msg.site_id) +
                         " disagrees with site " + std::to_string(stats_.begin()->first));
    }
    for (const auto& [other_site, other] : stats_) {
        for (const auto& cell : payload.attribute_stats) {
            const bool clash = std::any_of(
                other.attribute_stats.begin(), other.attribute_stats.end(),
                [&](const auto& c) { return c.attribute_name == cell.attribute_name; });
            if (clash)
                return abort("attribute '" + cell.attribute_name + "' claimed by both site " +
                             std::to_string(other_site) + " and site " + std::to_string(msg.site_id));
        }
    }

    stats_[msg.site_id] = std::move(payload);
    if (stats_.size() < roster_.size()) return {};
    return finish();
}

std::vector<Outgoing> Coordinator::finish() {
    // std::map iteration gives ascending site ids, so the assembled attribute
    // order reproduces the original table order for block partitions and is
    // independent of arrival order.
    std::vector<ClassConditionalStats> all_stats;
    for (const auto& [site, payload] : stats_)
        all_stats.insert(all_stats.end(), payload.attribute_stats.begin(), payload.attribute_stats.end());

    GaussianNBModel model;
    try {
        model = assemble_model(all_stats, stats_.begin()->second.class_counts, config_.variance_floor);
    } catch (const Error& e) {
        return abort(std::string("cannot assemble model: ") + e.what());
    }
    model_ = model;
    phase_ = CoordinatorPhase::Done;
    return {Outgoing{Outgoing::Dest::AllParties, 0,
                     ModelMsg{config_.session_id, model.to_canonical_json()}}};
}

// --- Party ---

Party::Party(PartitionedTable fragment, PartyOptions options)
    : fragment_(std::move(fragment)), options_(std::move(options)) {}

std::vector<Outgoing> Party::abort(const std::string& reason) {
    phase_ = PartyPhase::Aborted;
    abort_reason_ = reason;
    return {Outgoing{Outgoing::Dest::Coordinator, 0, AbortMsg{session_id_, reason}}};
}

std::vector<Outgoing> Party::step(const Event& event) {
    if (phase_ == PartyPhase::HasModel || phase_ == PartyPhase::Aborted) return {};

    if (std::holds_alternative<TimeoutEvent>(event))
        return abort("timeout while " + to_string(phase_));
    if (std::holds_alternative<StartTrigger>(event))
        return abort("protocol violation: start trigger on a party");

    const ProtocolMessage& msg = std::get<MsgEvent>(event).msg;

    if (const auto* abort_msg = std::get_if<AbortMsg>(&msg)) {
        phase_ = PartyPhase::Aborted;
        abort_reason_ = abort_msg->reason;
        return {};
    }

    switch (phase_) {
        case PartyPhase::Idle: {
            const auto* init = std::get_if<InitMsg>(&msg);
            if (!init) return abort("protocol violation: " + message_type(msg) + " while idle");
            if (init->protocol_version != 1)
                return abort("unsupported protocol version " + std::to_string(init->protocol_version));
            session_id_ = init->session_id;
            keys_ = scheme_by_id(options_.scheme_id).generate_keypair(options_.key_bits);
            phase_ = PartyPhase::SentReady;
            return {Outgoing{Outgoing::Dest::Coordinator, 0,
                             ReadyMsg{fragment_.site_id, keys_.public_part}}};
        }
        case PartyPhase::SentReady: {
            const auto* start = std::get_if<StartMsg>(&msg);
            if (!start) return abort("protocol violation: " + message_type(msg) + " after ready");
            if (start->session_id != session_id_)
                return abort("start for foreign session '" + start->session_id + "'");
            return on_start(*start);
        }
        case PartyPhase::SentStats: {
            const auto* model_msg = std::get_if<ModelMsg>(&msg);
            if (!model_msg) return abort("protocol violation: " + message_type(msg) + " after stats");
            if (model_msg->session_id != session_id_)
                return abort("model for foreign session '" + model_msg->session_id + "'");
            try {
                model_ = GaussianNBModel::from_json(json::parse(model_msg->model_json));
            } catch (const json::exception& e) {
                return abort(std::string("unreadable model: ") + e.what());
            }
            phase_ = PartyPhase::HasModel;
            return {};
        }
        default:
            return abort("protocol violation: " + message_type(msg) + " while " + to_string(phase_));
    }
}

std::vector<Outgoing> Party::on_start(const StartMsg& msg) {
    if (!std::count(msg.roster.begin(), msg.roster.end(), fragment_.site_id)) {
        // Not selected; stand down without disturbing the session.
        phase_ = PartyPhase::Aborted;
        abort_reason_ = "excluded from roster";
        return {};
    }

    StatsPayload payload;
    payload.site_id = fragment_.site_id;
    payload.records_mode = options_.records_mode;
    try {
        const auto splits = generate_splits(fragment_.rows.size(), msg.split_plan);
        if (msg.repeat_index >= splits.size())
            return abort("repeat index " + std::to_string(msg.repeat_index) + " beyond plan");
        const Split& split = splits[msg.repeat_index];

        std::vector<std::string> labels;
        labels.reserve(split.train_ids.size());
        for (std::uint64_t id : split.train_ids) {
            const auto& label = fragment_.rows.at(id).class_label;
            labels.push_back(label);
            ++payload.class_counts[label];
        }

        // Only training rows, only perturbed values, leave this site.
        const std::uint64_t site_noise_seed = derive_stream_seed(msg.noise.seed, fragment_.site_id);
        for (std::size_t a = 0; a < fragment_.attribute_names.size(); ++a) {
            std::vector<double> x;
            x.reserve(split.train_ids.size());
            for (std::uint64_t id : split.train_ids) x.push_back(fragment_.rows.at(id).values.at(a));

            NoiseSpec spec;
            spec.family = msg.noise.family;
            spec.variances = {resolve_variance(msg.noise.mode, x)};
            spec.seed = site_noise_seed;
            PerturbedColumn column = perturb_column(x, spec, a, fragment_.attribute_names[a]);

            if (options_.records_mode) {
                payload.columns.push_back(std::move(column));
            } else {
                auto stats = compute_stats(column, labels);
                payload.attribute_stats.insert(payload.attribute_stats.end(), stats.begin(),
                                               stats.end());
            }
        }
        if (options_.records_mode) {
            payload.labels = std::move(labels);
            payload.class_counts.clear();  // coordinator derives them
        }
    } catch (const Error& e) {
        return abort(std::string("fit error: ") + e.what());
    }

    const std::string body = payload.to_canonical_json();
    SealedEnvelope envelope;
    try {
        envelope = scheme_by_id(options_.scheme_id)
                       .seal(std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()),
                             msg.coordinator_public_key, keys_.private_part,
                             std::to_string(fragment_.site_id));
    } catch (const Error& e) {
        return abort(std::string("cannot seal stats: ") + e.what());
    }

    phase_ = PartyPhase::SentStats;
    return {Outgoing{Outgoing::Dest::Coordinator, 0, StatsMsg{fragment_.site_id, std::move(envelope)}}};
}

// --- SessionTrace / run_session ---

std::vector<std::string> SessionTrace::emission_types() const {
    std::vector<std::string> types;
    types.reserve(emissions.size());
    for (const auto& emission : emissions) types.push_back(message_type(decode_frame(emission.frame)));
    return types;
}

bool SessionTrace::contains(std::string_view needle) const {
    for (const auto& emission : emissions) {
        auto it = std::search(emission.frame.begin(), emission.frame.end(), needle.begin(), needle.end());
        if (it != emission.frame.end()) return true;
    }
    return false;
}

SessionError::SessionError(const std::string& what, SessionTrace trace)
    : Error([&] {
          std::string text = what + "; trace:";
          for (const auto& type : trace.emission_types()) text += " " + type;
          return text;
      }()),
      trace_(std::move(trace)) {}

GaussianNBModel run_session(Coordinator& coordinator, std::span<Party> parties,
                            InProcessNetwork& network, SessionTrace* trace) {
    SessionTrace local_trace;
    if (!trace) trace = &local_trace;

    network.ensure_node(coordinator_node_id());
    for (const auto& party : parties) network.ensure_node(party_node_id(party.site_id()));

    auto dispatch = [&](const std::string& from, const std::vector<Outgoing>& outs) {
        for (const auto& out : outs) {
            const auto frame = encode_frame(out.msg);
            trace->emissions.push_back({from, frame});
            std::vector<std::string> destinations;
            switch (out.dest) {
                case Outgoing::Dest::Coordinator:
                    destinations.push_back(coordinator_node_id());
                    break;
                case Outgoing::Dest::Site:
                    destinations.push_back(party_node_id(out.site_id));
                    break;
                case Outgoing::Dest::AllParties:
                    for (const auto& party : parties)
                        destinations.push_back(party_node_id(party.site_id()));
                    break;
            }
            for (const auto& to : destinations) {
                trace->deliveries.push_back({from, to, frame});
                network.send(from, to, frame);
            }
        }
    };

    dispatch(coordinator_node_id(), coordinator.step(StartTrigger{}));

    while (auto delivery = network.next_delivery()) {
        const MsgEvent event{decode_frame(delivery->frame)};
        if (delivery->to == coordinator_node_id()) {
            dispatch(delivery->to, coordinator.step(event));
        } else {
            for (auto& party : parties) {
                if (party_node_id(party.site_id()) == delivery->to) {
                    dispatch(delivery->to, party.step(event));
                    break;
                }
            }
        }
    }

    if (coordinator.phase() == CoordinatorPhase::Aborted)
        throw SessionError("session aborted: " + coordinator.abort_reason(), *trace);
    if (coordinator.phase() != CoordinatorPhase::Done)
        throw SessionError("session stalled while " + to_string(coordinator.phase()), *trace);
    for (const auto& party : parties) {
        const bool rostered = std::count(coordinator.roster().begin(), coordinator.roster().end(),
                                         party.site_id()) > 0;
        if (rostered && party.phase() != PartyPhase::HasModel)
            throw SessionError("site " + std::to_string(party.site_id()) + " finished " +
                                   to_string(party.phase()) + " without the model",
                               *trace);
    }
    return *coordinator.model();
}

}  // namespace fednb
