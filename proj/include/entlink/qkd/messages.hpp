#pragma once

// Classical-channel messages and their wire encoding: each frame is a 4-byte
// big-endian length followed by a JSON object {session, seq, type, body}.

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "entlink/qkd/bits.hpp"
#include "entlink/qkd/cascade.hpp"

namespace entlink::qkd {

/// Bob -> Alice carries the coincidence ids and his bases; Alice's answer
/// carries her bases only.
struct BasisReveal {
    std::vector<std::uint64_t> ids;
    Bits bases;
};

/// Bob's request carries the fraction; Alice's answer the chosen positions.
struct SampleIndices {
    double fraction = 0.0;
    std::vector<std::uint64_t> indices;
};

struct SampleBits {
    Bits bits;
};

struct ParityRequest {
    ParityQuery query;
};

struct ParityResponse {
    Bits parities;
};

struct HashSeed {
    std::string purpose;  // "confirm" or "privacy"
    std::uint64_t seed = 0;
};

/// Stage acknowledgements. Only `hash` carries key-derived bits.
struct Confirmation {
    std::string stage;  // "qber", "reconciled", "confirm", "verify"
    bool accept = true;
    std::uint64_t errors = 0;
    std::uint64_t sample = 0;
    std::string hash;  // 16 hex digits when present
    std::uint64_t final_length = 0;
};

struct Abort {
    std::string stage;
    std::string reason;
};

using Payload = std::variant<BasisReveal, SampleIndices, SampleBits, ParityRequest, ParityResponse,
                             HashSeed, Confirmation, Abort>;

struct ProtocolMessage {
    std::string session;
    std::uint64_t seq = 0;
    Payload payload;
};

std::string_view payload_type(const Payload& payload);

nlohmann::json to_json(const ProtocolMessage& message);
ProtocolMessage message_from_json(const nlohmann::json& j);

/// Number of bits derived from the key that the message discloses.
std::uint64_t disclosed_key_bits(const ProtocolMessage& message);

std::string encode_frame(const ProtocolMessage& message);
/// Parses one complete frame (length prefix included).
ProtocolMessage decode_frame(std::string_view frame);

}  // namespace entlink::qkd
