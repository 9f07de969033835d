#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "fednb/dataset.hpp"
#include "fednb/envelope.hpp"
#include "fednb/message.hpp"
#include "fednb/model.hpp"

namespace fednb {

// What a site contributes: its train-split class counts plus, per owned
// attribute, either the class-conditional statistics (stats mode) or the raw
// perturbed training column (records mode, coordinator computes the stats).
struct StatsPayload {
    std::uint32_t site_id = 0;
    bool records_mode = false;

    // stats mode
    std::map<std::string, std::uint64_t> class_counts;
    std::vector<ClassConditionalStats> attribute_stats;

    // records mode
    std::vector<std::string> labels;  // train order
    std::vector<PerturbedColumn> columns;

    nlohmann::json to_json() const;
    std::string to_canonical_json() const;
    static StatsPayload from_json(const nlohmann::json& j);
};

// Where a state machine wants a message to go. The transport maps this onto
// channels; parties only ever talk to the coordinator.
struct Outgoing {
    enum class Dest { Coordinator, AllParties, Site };
    Dest dest = Dest::Coordinator;
    std::uint32_t site_id = 0;  // Dest::Site only
    ProtocolMessage msg;
};

struct StartTrigger {};
struct TimeoutEvent {};
struct MsgEvent {
    ProtocolMessage msg;
};
using Event = std::variant<StartTrigger, MsgEvent, TimeoutEvent>;

struct SessionConfig {
    std::string session_id = "session";
    std::uint32_t protocol_version = 1;
    std::uint32_t min_sites = 1;
    SplitPlan split_plan;
    std::uint32_t repeat_index = 0;
    NoiseDescriptor noise;
    std::string scheme_id = kRsaSchemeId;
    unsigned key_bits = kMinRsaBits;
    double variance_floor = kDefaultVarianceFloor;
};

enum class CoordinatorPhase { Broadcasting, CollectingReady, CollectingStats, Done, Aborted };
enum class PartyPhase { Idle, SentReady, SentStats, HasModel, Aborted };

std::string to_string(CoordinatorPhase phase);
std::string to_string(PartyPhase phase);

// Trusted-third-party role. A pure event reducer: each step consumes one
// event and returns the messages to emit. Protocol-level failures never
// throw; they emit Abort and park the machine in Aborted.
class Coordinator {
public:
    explicit Coordinator(SessionConfig config);

    std::vector<Outgoing> step(const Event& event);

    CoordinatorPhase phase() const { return phase_; }
    const std::optional<GaussianNBModel>& model() const { return model_; }
    const std::string& abort_reason() const { return abort_reason_; }
    const std::vector<std::uint32_t>& roster() const { return roster_; }
    const SessionConfig& config() const { return config_; }

private:
    std::vector<Outgoing> abort(const std::string& reason);
    std::vector<Outgoing> on_ready(const ReadyMsg& msg);
    std::vector<Outgoing> on_stats(const StatsMsg& msg);
    std::vector<Outgoing> finish();

    SessionConfig config_;
    CoordinatorPhase phase_ = CoordinatorPhase::Broadcasting;
    KeyPair keys_;
    std::map<std::uint32_t, std::vector<std::uint8_t>> site_keys_;
    std::vector<std::uint32_t> roster_;  // ascending site ids
    std::map<std::uint32_t, StatsPayload> stats_;
    std::optional<GaussianNBModel> model_;
    std::string abort_reason_;
};

struct PartyOptions {
    std::string scheme_id = kRsaSchemeId;
    unsigned key_bits = kMinRsaBits;
    bool records_mode = false;
};

// Data-holding site role. On Init it answers Ready with a fresh public key;
// on Start it derives the shared split, perturbs its own columns, and sends
// the sealed statistics; on Model it stores the broadcast classifier.
class Party {
public:
    Party(PartitionedTable fragment, PartyOptions options = {});

    std::vector<Outgoing> step(const Event& event);

    PartyPhase phase() const { return phase_; }
    std::uint32_t site_id() const { return fragment_.site_id; }
    const std::optional<GaussianNBModel>& model() const { return model_; }
    const std::string& abort_reason() const { return abort_reason_; }

private:
    std::vector<Outgoing> abort(const std::string& reason);
    std::vector<Outgoing> on_start(const StartMsg& msg);

    PartitionedTable fragment_;
    PartyOptions options_;
    PartyPhase phase_ = PartyPhase::Idle;
    std::string session_id_;
    KeyPair keys_;
    std::optional<GaussianNBModel> model_;
    std::string abort_reason_;
};

// Every logical emission and every per-destination delivery of one session,
// in order. The emission list is the protocol transcript; the delivery list
// feeds replay.
struct SessionTrace {
    struct Emission {
        std::string from;
        std::vector<std::uint8_t> frame;
    };
    struct Delivery {
        std::string from;
        std::string to;
        std::vector<std::uint8_t> frame;
    };

    std::vector<Emission> emissions;
    std::vector<Delivery> deliveries;

    std::vector<std::string> emission_types() const;
    // Does any frame contain `needle` as a byte substring?
    bool contains(std::string_view needle) const;
};

class SessionError : public Error {
public:
    SessionError(const std::string& what, SessionTrace trace);
    const SessionTrace& trace() const { return trace_; }

private:
    SessionTrace trace_;
};

class InProcessNetwork;

inline std::string coordinator_node_id() { return "coordinator"; }
inline std::string party_node_id(std::uint32_t site_id) { return "site-" + std::to_string(site_id); }

// Drives coordinator and parties over the deterministic in-process carrier
// until the coordinator is Done and every rostered party holds the model.
// Throws SessionError (trace attached) when any machine aborts.
GaussianNBModel run_session(Coordinator& coordinator, std::span<Party> parties,
                            InProcessNetwork& network, SessionTrace* trace = nullptr);

}  // namespace fednb
