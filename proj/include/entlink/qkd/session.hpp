#pragma once

// Key distillation from coincidence records: balancing, the standalone
// pipeline steps, and full two-party sessions under a chosen placement.

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "entlink/coincidence.hpp"
#include "entlink/qkd/parties.hpp"

namespace entlink::qkd {

struct BalanceResult {
    std::vector<CoincidenceRecord> records;  // original order preserved
    DetectorCounts alice_before{};
    DetectorCounts bob_before{};
    DetectorCounts alice_after{};
    DetectorCounts bob_after{};
};

/// Randomly discards records of over-represented detectors so every detector
/// of a receiver keeps as many records as its least-populated one; Alice's
/// detectors first, then Bob's on what remains.
BalanceResult balance_and_count(std::span<const CoincidenceRecord> records, std::uint64_t seed);

/// Splits records into each party's local view; ids are the record ordinals.
std::pair<std::vector<LocalRecord>, std::vector<LocalRecord>> local_views(
    std::span<const CoincidenceRecord> records);

struct SiftResult {
    KeyBlock alice;
    KeyBlock bob;
    std::vector<std::uint64_t> kept_ids;
};

/// Same-basis positions with Bob's bits inverted. Throws ProtocolAbort
/// ("sift") if the two views do not list the same ids.
SiftResult sift(std::span<const LocalRecord> alice, std::span<const LocalRecord> bob);

struct QberEstimate {
    double qber = 0.0;
    std::uint64_t errors = 0;
    std::uint64_t sample = 0;
};

/// Discloses round(fraction * n) positions chosen from `seed`, removes them
/// from both blocks and charges them to leaked_bits. Throws ProtocolAbort
/// ("qber") on an empty sample.
QberEstimate estimate_qber(KeyBlock& alice, KeyBlock& bob, double sample_fraction, std::uint64_t seed);

/// Cascade with Alice's parities computed locally. Throws ProtocolAbort
/// ("qber") when qber exceeds abort_qber.
CascadeStats reconcile(const KeyBlock& alice, KeyBlock& bob, double qber, std::uint64_t seed,
                       const CascadeParams& params = {}, double abort_qber = 0.11);

/// Final-length bound and Toeplitz compression of a reconciled block.
KeyBlock privacy_amplify(const KeyBlock& key, std::uint64_t leakage, double qber, double epsilon,
                         std::uint64_t seed, MarginMode margin = MarginMode::security_bound);

enum class Placement { lockstep, threads, processes };

struct ProtocolRun {
    PartyOutcome alice;
    PartyOutcome bob;
    std::vector<nlohmann::json> transcript;  // as seen at Bob's endpoint
    std::vector<ProtocolMessage> messages;
};

/// Optional hook applied to every message Bob receives.
using Tamper = std::function<void(ProtocolMessage&)>;

/// Runs both parties on their local views. Party seeds are derived from
/// `seed` ("alice", "bob"), so all placements produce the same transcript.
ProtocolRun run_protocol(std::vector<LocalRecord> alice_view, std::vector<LocalRecord> bob_view,
                         const ProtocolParams& params, std::uint64_t seed,
                         Placement placement = Placement::lockstep, const Tamper& tamper = {});

struct SessionConfig {
    ProtocolParams protocol{};
    std::uint64_t seed = 0;
    Placement placement = Placement::lockstep;
};

/// Stage lengths of one session.
struct SessionLedger {
    std::uint64_t coincidences = 0;
    std::uint64_t balanced = 0;
    std::uint64_t sifted = 0;
    std::uint64_t sample = 0;
    std::uint64_t sample_errors = 0;
    std::uint64_t reconciled = 0;
    std::uint64_t leakage_ec = 0;
    std::uint64_t leakage_confirm = 0;
    std::uint64_t after_leakage = 0;  // reconciled minus disclosed parities and hash
    std::uint64_t final_bits = 0;
    std::uint64_t corrections = 0;
    double qber = 0.0;
    double duration = 0.0;
    bool keys_match = false;
    bool confirmed = false;
    std::optional<AbortInfo> abort;

    [[nodiscard]] double sift_fraction() const;
    [[nodiscard]] double key_rate() const;
};

nlohmann::json to_json(const SessionLedger& ledger);

struct SessionResult {
    SessionLedger ledger;
    ProtocolRun run;
    std::uint64_t audited_leakage = 0;  // key bits found in the transcript
};

/// balance_and_count, then the two-party protocol.
SessionResult run_session(std::span<const CoincidenceRecord> records, double duration,
                          const SessionConfig& config, const Tamper& tamper = {});

}  // namespace entlink::qkd
