#include "entlink/qkd/messages.hpp"

#include <stdexcept>

#include "entlink/errors.hpp"

namespace entlink::qkd {
namespace {

using nlohmann::json;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

json body_of(const Payload& p) {
    return std::visit(
        overloaded{
            [](const BasisReveal& m) { return json{{"ids", m.ids}, {"bases", to_bitstring(m.bases)}}; },
            [](const SampleIndices& m) { return json{{"fraction", m.fraction}, {"indices", m.indices}}; },
            [](const SampleBits& m) { return json{{"bits", to_bitstring(m.bits)}}; },
            [](const ParityRequest& m) {
                json ranges = json::array();
                for (const auto& r : m.query.ranges) ranges.push_back({r.begin, r.end});
                return json{{"pass", m.query.pass}, {"seed", m.query.seed}, {"ranges", ranges}};
            },
            [](const ParityResponse& m) { return json{{"parities", to_bitstring(m.parities)}}; },
            [](const HashSeed& m) { return json{{"purpose", m.purpose}, {"seed", m.seed}}; },
            [](const Confirmation& m) {
                json j{{"stage", m.stage}, {"accept", m.accept}};
                if (m.stage == "qber") {
                    j["errors"] = m.errors;
                    j["sample"] = m.sample;
                }
                if (!m.hash.empty()) j["hash"] = m.hash;
                if (m.stage == "verify") j["final_length"] = m.final_length;
                return j;
            },
            [](const Abort& m) { return json{{"stage", m.stage}, {"reason", m.reason}}; },
        },
        p);
}

Payload payload_from(std::string_view type, const json& b) {
    if (type == "BasisReveal") {
        return BasisReveal{b.at("ids").get<std::vector<std::uint64_t>>(),
                           from_bitstring(b.at("bases").get<std::string>())};
    }
    if (type == "SampleIndices") {
        return SampleIndices{b.at("fraction").get<double>(),
                             b.at("indices").get<std::vector<std::uint64_t>>()};
    }
    if (type == "SampleBits") {
        return SampleBits{from_bitstring(b.at("bits").get<std::string>())};
    }
    if (type == "ParityRequest") {
        ParityRequest m;
        m.query.pass = b.at("pass").get<int>();
        m.query.seed = b.at("seed").get<std::uint64_t>();
        for (const auto& r : b.at("ranges")) {
            m.query.ranges.push_back({r.at(0).get<std::size_t>(), r.at(1).get<std::size_t>()});
        }
        return m;
    }
    if (type == "ParityResponse") {
        return ParityResponse{from_bitstring(b.at("parities").get<std::string>())};
    }
    if (type == "HashSeed") {
        return HashSeed{b.at("purpose").get<std::string>(), b.at("seed").get<std::uint64_t>()};
    }
    if (type == "Confirmation") {
        Confirmation m;
        m.stage = b.at("stage").get<std::string>();
        m.accept = b.at("accept").get<bool>();
        m.errors = b.value("errors", std::uint64_t{0});
        m.sample = b.value("sample", std::uint64_t{0});
        m.hash = b.value("hash", std::string{});
        m.final_length = b.value("final_length", std::uint64_t{0});
        return m;
    }
    if (type == "Abort") {
        return Abort{b.at("stage").get<std::string>(), b.at("reason").get<std::string>()};
    }
    throw ValidationError("unknown message type: " + std::string(type));
}

}  // namespace

std::string_view payload_type(const Payload& payload) {
    static constexpr std::string_view names[] = {"BasisReveal",    "SampleIndices", "SampleBits",
                                                 "ParityRequest",  "ParityResponse", "HashSeed",
                                                 "Confirmation",   "Abort"};
    return names[payload.index()];
}

json to_json(const ProtocolMessage& message) {
    return json{{"session", message.session},
                {"seq", message.seq},
                {"type", payload_type(message.payload)},
                {"body", body_of(message.payload)}};
}

ProtocolMessage message_from_json(const json& j) {
    try {
        ProtocolMessage m;
        m.session = j.at("session").get<std::string>();
        m.seq = j.at("seq").get<std::uint64_t>();
        m.payload = payload_from(j.at("type").get<std::string>(), j.at("body"));
        return m;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed protocol message: ") + e.what());
    }
}

std::uint64_t disclosed_key_bits(const ProtocolMessage& message) {
    return std::visit(overloaded{
                          [](const SampleBits& m) -> std::uint64_t { return m.bits.size(); },
                          [](const ParityResponse& m) -> std::uint64_t { return m.parities.size(); },
                          [](const Confirmation& m) -> std::uint64_t { return m.hash.empty() ? 0 : 64; },
                          [](const auto&) -> std::uint64_t { return 0; },
                      },
                      message.payload);
}

std::string encode_frame(const ProtocolMessage& message) {
    const std::string body = to_json(message).dump();
    if (body.size() > 0xffffffffULL) {
        throw std::length_error("protocol frame too large");
    }
    const auto len = static_cast<std::uint32_t>(body.size());
    std::string frame;
    frame.reserve(4 + body.size());
    for (int shift = 24; shift >= 0; shift -= 8) {
        frame.push_back(static_cast<char>((len >> shift) & 0xff));
    }
    frame += body;
    return frame;
}

ProtocolMessage decode_frame(std::string_view frame) {
    if (frame.size() < 4) {
        throw ValidationError("truncated frame header");
    }
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) {
        len = (len << 8) | static_cast<unsigned char>(frame[static_cast<std::size_t>(i)]);
    }
    if (frame.size() != 4 + static_cast<std::size_t>(len)) {
        throw ValidationError("frame length does not match its header");
    }
    json j;
    try {
        j = json::parse(frame.substr(4));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("frame is not valid JSON: ") + e.what());
    }
    return message_from_json(j);
}

}  // namespace entlink::qkd
