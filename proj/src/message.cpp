#include "fednb/message.hpp"

#include <nlohmann/json.hpp>

#include "fednb/base64.hpp"
#include "fednb/error.hpp"

namespace fednb {

using nlohmann::json;

namespace {

json split_plan_to_json(const SplitPlan& plan) {
    json j{{"seed", plan.seed},
           {"train_fraction", plan.train_fraction},
           {"repeats", plan.repeats},
           {"scheme", plan.scheme == SplitPlan::Scheme::KFold ? "kfold" : "holdout"}};
    if (plan.scheme == SplitPlan::Scheme::KFold) j["folds"] = plan.folds;
    return j;
}

SplitPlan split_plan_from_json(const json& j) {
    SplitPlan plan;
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.train_fraction = j.at("train_fraction").get<double>();
    plan.repeats = j.at("repeats").get<std::uint32_t>();
    const std::string scheme = j.value("scheme", "holdout");
    if (scheme == "kfold") {
        plan.scheme = SplitPlan::Scheme::KFold;
        plan.folds = j.at("folds").get<std::uint32_t>();
    } else if (scheme == "holdout") {
        plan.scheme = SplitPlan::Scheme::Holdout;
    } else {
        throw ProtocolViolation("unknown split scheme '" + scheme + "'");
    }
    return plan;
}

json noise_to_json(const NoiseDescriptor& noise) {
    return json{{"family", to_string(noise.family)},
                {"mode", to_string(noise.mode.kind)},
                {"value", noise.mode.value},
                {"seed", noise.seed}};
}

NoiseDescriptor noise_from_json(const json& j) {
    NoiseDescriptor noise;
    noise.family = noise_family_from_string(j.at("family").get<std::string>());
    noise.mode.kind = variance_kind_from_string(j.at("mode").get<std::string>());
    noise.mode.value = j.at("value").get<double>();
    noise.seed = j.at("seed").get<std::uint64_t>();
    return noise;
}

}  // namespace

std::string message_type(const ProtocolMessage& msg) {
    static constexpr const char* names[] = {"init", "ready", "start", "stats", "model", "abort"};
    return names[msg.index()];
}

json message_to_json(const ProtocolMessage& msg) {
    json j;
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, InitMsg>) {
                j = json{{"type", "init"},
                         {"session_id", m.session_id},
                         {"protocol_version", m.protocol_version},
                         {"min_sites", m.min_sites}};
            } else if constexpr (std::is_same_v<T, ReadyMsg>) {
                j = json{{"type", "ready"},
                         {"site_id", m.site_id},
                         {"site_public_key", base64_encode(m.site_public_key)}};
            } else if constexpr (std::is_same_v<T, StartMsg>) {
                j = json{{"type", "start"},
                         {"session_id", m.session_id},
                         {"coordinator_public_key", base64_encode(m.coordinator_public_key)},
                         {"split_plan", split_plan_to_json(m.split_plan)},
                         {"repeat_index", m.repeat_index},
                         {"noise", noise_to_json(m.noise)},
                         {"roster", m.roster}};
            } else if constexpr (std::is_same_v<T, StatsMsg>) {
                j = json{{"type", "stats"}, {"site_id", m.site_id}, {"envelope", m.envelope.to_json()}};
            } else if constexpr (std::is_same_v<T, ModelMsg>) {
                j = json{{"type", "model"},
                         {"session_id", m.session_id},
                         {"model", json::parse(m.model_json)}};
            } else {
                j = json{{"type", "abort"}, {"session_id", m.session_id}, {"reason", m.reason}};
            }
        },
        msg);
    return j;
}

ProtocolMessage message_from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "init") {
        InitMsg m;
        m.session_id = j.at("session_id").get<std::string>();
        m.protocol_version = j.at("protocol_version").get<std::uint32_t>();
        m.min_sites = j.at("min_sites").get<std::uint32_t>();
        return m;
    }
    if (type == "ready") {
        ReadyMsg m;
        m.site_id = j.at("site_id").get<std::uint32_t>();
        m.site_public_key = base64_decode(j.at("site_public_key").get<std::string>());
        return m;
    }
    if (type == "start") {
        StartMsg m;
        m.session_id = j.at("session_id").get<std::string>();
        m.coordinator_public_key = base64_decode(j.at("coordinator_public_key").get<std::string>());
        m.split_plan = split_plan_from_json(j.at("split_plan"));
        m.repeat_index = j.at("repeat_index").get<std::uint32_t>();
        m.noise = noise_from_json(j.at("noise"));
        m.roster = j.at("roster").get<std::vector<std::uint32_t>>();
        return m;
    }
    if (type == "stats") {
        StatsMsg m;
        m.site_id = j.at("site_id").get<std::uint32_t>();
        m.envelope = SealedEnvelope::from_json(j.at("envelope"));
        return m;
    }
    if (type == "model") {
        ModelMsg m;
        m.session_id = j.at("session_id").get<std::string>();
        m.model_json = j.at("model").dump();
        return m;
    }
    if (type == "abort") {
        AbortMsg m;
        m.session_id = j.at("session_id").get<std::string>();
        m.reason = j.at("reason").get<std::string>();
        return m;
    }
    throw ProtocolViolation("unknown message type '" + type + "'");
}

std::vector<std::uint8_t> wrap_frame(std::span<const std::uint8_t> payload) {
    if (payload.size() > kMaxFrameBytes)
        throw ProtocolViolation("frame of " + std::to_string(payload.size()) +
                                " bytes exceeds the 64 MiB cap");
    std::vector<std::uint8_t> frame;
    frame.reserve(4 + payload.size());
    const auto len = static_cast<std::uint32_t>(payload.size());
    frame.push_back(static_cast<std::uint8_t>(len >> 24));
    frame.push_back(static_cast<std::uint8_t>(len >> 16));
    frame.push_back(static_cast<std::uint8_t>(len >> 8));
    frame.push_back(static_cast<std::uint8_t>(len));
    frame.insert(frame.end(), payload.begin(), payload.end());
    return frame;
}

std::vector<std::uint8_t> encode_frame(const ProtocolMessage& msg) {
    const std::string body = message_to_json(msg).dump();
    return wrap_frame(std::span(reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
}

ProtocolMessage decode_frame(std::span<const std::uint8_t> frame) {
    if (frame.size() < 4) throw FramingError("frame shorter than the length prefix");
    const std::size_t len = (static_cast<std::size_t>(frame[0]) << 24) |
                            (static_cast<std::size_t>(frame[1]) << 16) |
                            (static_cast<std::size_t>(frame[2]) << 8) | frame[3];
    if (len > kMaxFrameBytes) throw ProtocolViolation("frame length above the 64 MiB cap");
    if (frame.size() != 4 + len) throw FramingError("length prefix inconsistent with frame size");
    try {
        return message_from_json(json::parse(frame.begin() + 4, frame.end()));
    } catch (const json::exception& e) {
        throw FramingError(std::string("frame body is not valid message JSON: ") + e.what());
    }
}

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) {
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<std::vector<std::uint8_t>> FrameDecoder::next_payload() {
    if (buffer_.size() < 4) return std::nullopt;
    const std::size_t len = (static_cast<std::size_t>(buffer_[0]) << 24) |
                            (static_cast<std::size_t>(buffer_[1]) << 16) |
                            (static_cast<std::size_t>(buffer_[2]) << 8) | buffer_[3];
    if (len > kMaxFrameBytes) throw ProtocolViolation("frame length above the 64 MiB cap");
    if (buffer_.size() < 4 + len) return std::nullopt;
    std::vector<std::uint8_t> payload(buffer_.begin() + 4, buffer_.begin() + 4 + len);
    buffer_.erase(buffer_.begin(), buffer_.begin() + 4 + len);
    return payload;
}

}  // namespace fednb
