#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "fednb/dataset.hpp"
#include "fednb/envelope.hpp"
#include "fednb/perturb.hpp"

namespace fednb {

// Wire format: 4-byte big-endian payload length, then the UTF-8 canonical
// JSON body whose top-level "type" field names the variant (lowercase).
// Frames above 64 MiB are a protocol violation.

struct InitMsg {
    std::string session_id;
    std::uint32_t protocol_version = 1;
    std::uint32_t min_sites = 1;
};

struct ReadyMsg {
    std::uint32_t site_id = 0;
    std::vector<std::uint8_t> site_public_key;
};

// The noise contract every site applies to its own columns. `seed` is the
// shared base; each site derives independent per-attribute streams from it.
struct NoiseDescriptor {
    NoiseFamily family = NoiseFamily::Gaussian;
    VarianceMode mode = VarianceMode::ratio(0.25);
    std::uint64_t seed = 0;
};

struct StartMsg {
    std::string session_id;
    std::vector<std::uint8_t> coordinator_public_key;
    SplitPlan split_plan;
    std::uint32_t repeat_index = 0;  // which of the plan's splits this session trains
    NoiseDescriptor noise;
    std::vector<std::uint32_t> roster;
};

struct StatsMsg {
    std::uint32_t site_id = 0;
    SealedEnvelope envelope;  // payload: canonical StatsPayload JSON
};

struct ModelMsg {
    std::string session_id;
    std::string model_json;  // canonical GaussianNBModel document
};

struct AbortMsg {
    std::string session_id;
    std::string reason;
};

using ProtocolMessage = std::variant<InitMsg, ReadyMsg, StartMsg, StatsMsg, ModelMsg, AbortMsg>;

// "init", "ready", "start", "stats", "model" or "abort".
std::string message_type(const ProtocolMessage& msg);

nlohmann::json message_to_json(const ProtocolMessage& msg);
ProtocolMessage message_from_json(const nlohmann::json& j);

inline constexpr std::size_t kMaxFrameBytes = 64ull << 20;

std::vector<std::uint8_t> encode_frame(const ProtocolMessage& msg);
// Expects exactly one whole frame (prefix included).
ProtocolMessage decode_frame(std::span<const std::uint8_t> frame);
// Prepends the length prefix to an already-serialized body.
std::vector<std::uint8_t> wrap_frame(std::span<const std::uint8_t> payload);

// Incremental deframer for stream transports. feed() bytes as they arrive,
// poll next_payload() for completed JSON bodies.
class FrameDecoder {
public:
    void feed(std::span<const std::uint8_t> bytes);
    std::optional<std::vector<std::uint8_t>> next_payload();
    // Bytes buffered toward an incomplete frame.
    std::size_t pending_bytes() const { return buffer_.size(); }

private:
    std::vector<std::uint8_t> buffer_;
};

}  // namespace fednb
