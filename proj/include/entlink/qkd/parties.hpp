#pragma once

// The two protocol parties. Bob drives the session; Alice only answers, so
// the same objects run in one thread, two threads or two processes.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "entlink/polarization.hpp"
#include "entlink/qkd/bits.hpp"
#include "entlink/qkd/cascade.hpp"
#include "entlink/qkd/transport.hpp"

namespace entlink::qkd {

/// What one party knows about one coincidence: the shared id plus its own
/// basis and outcome.
struct LocalRecord {
    std::uint64_t id = 0;
    int basis = 0;
    Outcome outcome = Outcome::plus;

    friend bool operator==(const LocalRecord&, const LocalRecord&) = default;
};

enum class MarginMode {
    security_bound,  // n (1 - h2(q)) - leakage - 2 log2(1/eps)
    half,            // (n - leakage) / 2
};

struct ProtocolParams {
    std::string session = "entlink";
    double sample_fraction = 0.1;
    double epsilon = 1e-6;
    double abort_qber = 0.11;
    CascadeParams cascade{};
    MarginMode margin = MarginMode::security_bound;
};

struct AbortInfo {
    std::string stage;
    std::string reason;
};

/// A session stopped by one of the parties; `stage` names the step.
class ProtocolAbort : public std::runtime_error {
public:
    ProtocolAbort(std::string stage, const std::string& reason)
        : std::runtime_error(stage + ": " + reason), stage_(std::move(stage)), reason_(reason) {}
    [[nodiscard]] const std::string& stage() const { return stage_; }
    [[nodiscard]] const std::string& reason() const { return reason_; }

private:
    std::string stage_;
    std::string reason_;
};

/// Per-party view of a finished (or aborted) session.
struct PartyOutcome {
    KeyBlock key;  // final key, or the last stage reached on abort
    std::uint64_t sifted = 0;
    std::uint64_t sample = 0;
    std::uint64_t sample_errors = 0;
    std::uint64_t reconciled = 0;
    std::uint64_t leakage_ec = 0;
    std::uint64_t leakage_confirm = 0;
    std::uint64_t final_length = 0;
    std::uint64_t corrections = 0;
    double qber = 0.0;
    bool confirmed = false;
    std::optional<AbortInfo> abort;
};

/// Sifted key bit: plus -> 0, minus -> 1; Bob stores the complement so the
/// singlet's anti-correlation becomes agreement.
std::uint8_t key_bit(Outcome outcome, bool invert);

/// Sorted sample positions: round(fraction * n) positions drawn without
/// replacement.
std::vector<std::uint64_t> choose_sample(std::size_t n, double fraction, std::uint64_t seed);

/// Removes the given sorted positions.
Bits remove_positions(const Bits& bits, const std::vector<std::uint64_t>& positions);

std::uint64_t final_length_for(const ProtocolParams& params, std::uint64_t n, double qber,
                               std::uint64_t leakage);

class AliceParty final : public Responder {
public:
    AliceParty(std::vector<LocalRecord> view, ProtocolParams params, std::uint64_t seed);

    std::vector<ProtocolMessage> handle(const ProtocolMessage& message) override;
    [[nodiscard]] bool finished() const override { return finished_; }
    [[nodiscard]] const PartyOutcome& outcome() const { return outcome_; }

private:
    ProtocolMessage make(Payload payload);
    std::vector<ProtocolMessage> abort(std::string stage, std::string reason);

    std::vector<LocalRecord> view_;
    ProtocolParams params_;
    std::uint64_t seed_;
    std::uint64_t seq_ = 0;
    bool finished_ = false;
    PartyOutcome outcome_;
};

class BobParty {
public:
    BobParty(std::vector<LocalRecord> view, ProtocolParams params, std::uint64_t seed);

    /// Runs the whole session over `channel`. Aborts are reported in the
    /// outcome, never thrown; transport failures propagate.
    PartyOutcome run(Channel& channel);

private:
    ProtocolMessage make(Payload payload);
    void steps(Channel& channel);

    std::vector<LocalRecord> view_;
    ProtocolParams params_;
    std::uint64_t seed_;
    std::uint64_t seq_ = 0;
    PartyOutcome outcome_;
};

}  // namespace entlink::qkd
