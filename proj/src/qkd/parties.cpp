#include "entlink/qkd/parties.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "entlink/errors.hpp"
#include "entlink/qkd/privacy.hpp"
#include "entlink/random.hpp"

namespace entlink::qkd {
namespace {

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void check_fraction(double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw ValidationError("sample_fraction must lie in (0, 1)");
    }
}

// Raised inside BobParty when Alice has already aborted.
struct PeerAbort {
    AbortInfo info;
};

template <class T>
T expect(Channel& channel, const std::string& session) {
    ProtocolMessage m = channel.receive();
    if (m.session != session) {
        throw ProtocolAbort("protocol", "message for another session");
    }
    if (auto* a = std::get_if<Abort>(&m.payload)) {
        throw PeerAbort{{a->stage, a->reason}};
    }
    if (auto* t = std::get_if<T>(&m.payload)) {
        return std::move(*t);
    }
    throw ProtocolAbort("protocol", "unexpected " + std::string(payload_type(m.payload)));
}

}  // namespace

std::uint8_t key_bit(Outcome outcome, bool invert) {
    const std::uint8_t b = outcome == Outcome::plus ? 0 : 1;
    return invert ? b ^ 1 : b;
}

std::vector<std::uint64_t> choose_sample(std::size_t n, double fraction, std::uint64_t seed) {
    check_fraction(fraction);
    const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    std::vector<std::uint64_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    Rng rng(seed);
    for (std::size_t i = 0; i < k; ++i) {
        std::swap(pool[i], pool[i + rng.below(n - i)]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

Bits remove_positions(const Bits& bits, const std::vector<std::uint64_t>& positions) {
    Bits out;
    out.reserve(bits.size());
    std::size_t p = 0;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (p < positions.size() && positions[p] == i) {
            ++p;
            continue;
        }
        out.push_back(bits[i]);
    }
    if (p != positions.size()) {
        throw ValidationError("sample positions out of range or unsorted");
    }
    return out;
}

std::uint64_t final_length_for(const ProtocolParams& params, std::uint64_t n, double qber,
                               std::uint64_t leakage) {
    return params.margin == MarginMode::half ? half_margin_length(n, leakage)
                                             : final_key_length(n, qber, leakage, params.epsilon);
}

// ---- Alice -----------------------------------------------------------------

AliceParty::AliceParty(std::vector<LocalRecord> view, ProtocolParams params, std::uint64_t seed)
    : view_(std::move(view)), params_(std::move(params)), seed_(seed) {
    outcome_.key.stage = KeyStage::raw;
}

ProtocolMessage AliceParty::make(Payload payload) {
    return ProtocolMessage{params_.session, seq_++, std::move(payload)};
}

std::vector<ProtocolMessage> AliceParty::abort(std::string stage, std::string reason) {
    outcome_.abort = AbortInfo{stage, reason};
    finished_ = true;
    return {make(Abort{std::move(stage), std::move(reason)})};
}

std::vector<ProtocolMessage> AliceParty::handle(const ProtocolMessage& message) {
    if (finished_) {
        return {};
    }
    if (message.session != params_.session) {
        return abort("protocol", "message for another session");
    }
    KeyBlock& key = outcome_.key;
    std::vector<ProtocolMessage> out;

    if (const auto* reveal = std::get_if<BasisReveal>(&message.payload)) {
        if (key.stage != KeyStage::raw) return abort("sift", "repeated basis reveal");
        bool same_ids = reveal->ids.size() == view_.size() && reveal->bases.size() == view_.size();
        for (std::size_t i = 0; same_ids && i < view_.size(); ++i) {
            same_ids = reveal->ids[i] == view_[i].id;
        }
        if (!same_ids) return abort("sift", "coincidence identifiers differ");
        BasisReveal mine;
        for (std::size_t i = 0; i < view_.size(); ++i) {
            mine.bases.push_back(static_cast<std::uint8_t>(view_[i].basis));
            if (reveal->bases[i] == view_[i].basis) {
                key.bits.push_back(key_bit(view_[i].outcome, false));
            }
        }
        key.stage = KeyStage::sifted;
        outcome_.sifted = key.size();
        out.push_back(make(std::move(mine)));
    } else if (const auto* req = std::get_if<SampleIndices>(&message.payload)) {
        if (key.stage != KeyStage::sifted || outcome_.sample > 0) return abort("qber", "unexpected sample request");
        if (!(req->fraction > 0.0 && req->fraction < 1.0)) return abort("qber", "bad sample fraction");
        const auto positions = choose_sample(key.size(), req->fraction, derive_seed(seed_, "sample"));
        if (positions.empty()) return abort("qber", "empty sample");
        SampleBits bits;
        for (auto p : positions) bits.bits.push_back(key.bits[p]);
        key.bits = remove_positions(key.bits, positions);
        key.leaked_bits += positions.size();
        outcome_.sample = positions.size();
        out.push_back(make(SampleIndices{req->fraction, positions}));
        out.push_back(make(std::move(bits)));
    } else if (const auto* pr = std::get_if<ParityRequest>(&message.payload)) {
        if (!key.qber_estimate) return abort("reconcile", "parity request before QBER agreement");
        Bits answer;
        try {
            answer = answer_parity_query(key.bits, pr->query);
        } catch (const ValidationError& e) {
            return abort("reconcile", e.what());
        }
        key.leaked_bits += answer.size();
        outcome_.leakage_ec += answer.size();
        out.push_back(make(ParityResponse{std::move(answer)}));
    } else if (const auto* c = std::get_if<Confirmation>(&message.payload)) {
        if (c->stage == "qber") {
            if (outcome_.sample == 0 || c->sample != outcome_.sample) return abort("qber", "sample size disagreement");
            outcome_.sample_errors = c->errors;
            outcome_.qber = static_cast<double>(c->errors) / static_cast<double>(c->sample);
            key.qber_estimate = outcome_.qber;
        } else if (c->stage == "reconciled") {
            if (!key.qber_estimate) return abort("confirm", "reconciliation never started");
            key.stage = KeyStage::reconciled;
            outcome_.reconciled = key.size();
            const std::uint64_t seed = Rng(derive_seed(seed_, "confirm")).next();
            const std::uint64_t h = confirmation_hash(key.bits, seed);
            key.leaked_bits += 64;
            outcome_.leakage_confirm = 64;
            out.push_back(make(HashSeed{"confirm", seed}));
            out.push_back(make(Confirmation{"confirm", true, 0, 0, hash_hex(h), 0}));
        } else if (c->stage == "verify") {
            if (key.stage != KeyStage::reconciled) return abort("privacy", "verify before confirmation");
            const std::uint64_t m = final_length_for(params_, key.size(), outcome_.qber,
                                                     outcome_.leakage_ec + outcome_.leakage_confirm);
            if (m != c->final_length) return abort("privacy", "final length disagreement");
            outcome_.confirmed = c->accept;
            const std::uint64_t seed = Rng(derive_seed(seed_, "privacy")).next();
            key.bits = toeplitz_hash(key.bits, static_cast<std::size_t>(m), seed);
            key.stage = KeyStage::final;
            outcome_.final_length = m;
            finished_ = true;
            out.push_back(make(HashSeed{"privacy", seed}));
        } else {
            return abort("protocol", "unknown confirmation stage " + c->stage);
        }
    } else if (const auto* a = std::get_if<Abort>(&message.payload)) {
        outcome_.abort = AbortInfo{a->stage, a->reason};
        finished_ = true;
    } else {
        return abort("protocol", "unexpected " + std::string(payload_type(message.payload)));
    }
    return out;
}

// ---- Bob -------------------------------------------------------------------

BobParty::BobParty(std::vector<LocalRecord> view, ProtocolParams params, std::uint64_t seed)
    : view_(std::move(view)), params_(std::move(params)), seed_(seed) {
    check_fraction(params_.sample_fraction);
    if (!(params_.epsilon > 0.0 && params_.epsilon <= 1.0)) {
        throw ValidationError("epsilon must lie in (0, 1]");
    }
    if (!(params_.abort_qber > 0.0 && params_.abort_qber <= 0.5)) {
        throw ValidationError("abort_qber must lie in (0, 0.5]");
    }
}

ProtocolMessage BobParty::make(Payload payload) {
    return ProtocolMessage{params_.session, seq_++, std::move(payload)};
}

PartyOutcome BobParty::run(Channel& channel) {
    outcome_ = PartyOutcome{};
    try {
        steps(channel);
    } catch (const PeerAbort& a) {
        outcome_.abort = a.info;
    } catch (const ProtocolAbort& e) {
        outcome_.abort = AbortInfo{e.stage(), e.reason()};
        channel.send(make(Abort{e.stage(), e.reason()}));
    }
    return outcome_;
}

void BobParty::steps(Channel& channel) {
    KeyBlock& key = outcome_.key;
    const std::string& session = params_.session;

    // Sifting: announce ids and bases, keep positions where bases agree.
    BasisReveal reveal;
    for (const auto& r : view_) {
        reveal.ids.push_back(r.id);
        reveal.bases.push_back(static_cast<std::uint8_t>(r.basis));
    }
    channel.send(make(reveal));
    const auto theirs = expect<BasisReveal>(channel, session);
    if (theirs.bases.size() != view_.size()) {
        throw ProtocolAbort("sift", "basis list length differs");
    }
    for (std::size_t i = 0; i < view_.size(); ++i) {
        if (theirs.bases[i] == view_[i].basis) {
            key.bits.push_back(key_bit(view_[i].outcome, true));
        }
    }
    key.stage = KeyStage::sifted;
    outcome_.sifted = key.size();

    // Parameter estimation on a disclosed random sample.
    channel.send(make(SampleIndices{params_.sample_fraction, {}}));
    const auto sample = expect<SampleIndices>(channel, session);
    const auto sample_bits = expect<SampleBits>(channel, session);
    if (sample.indices.empty() || sample.indices.size() != sample_bits.bits.size()) {
        throw ProtocolAbort("qber", "empty or inconsistent sample");
    }
    std::uint64_t errors = 0;
    for (std::size_t i = 0; i < sample.indices.size(); ++i) {
        if (sample.indices[i] >= key.size()) throw ProtocolAbort("qber", "sample index out of range");
        errors += key.bits[sample.indices[i]] != sample_bits.bits[i];
    }
    key.bits = remove_positions(key.bits, sample.indices);
    key.leaked_bits += sample.indices.size();
    outcome_.sample = sample.indices.size();
    outcome_.sample_errors = errors;
    outcome_.qber = static_cast<double>(errors) / static_cast<double>(outcome_.sample);
    key.qber_estimate = outcome_.qber;
    if (outcome_.qber > params_.abort_qber) {
        throw ProtocolAbort("qber", "estimated QBER above the abort threshold");
    }
    channel.send(make(Confirmation{"qber", true, errors, outcome_.sample, "", 0}));

    // Reconciliation: Bob corrects towards Alice.
    const auto oracle = [&](const ParityQuery& q) {
        channel.send(make(ParityRequest{q}));
        return expect<ParityResponse>(channel, session).parities;
    };
    const CascadeStats stats = cascade_correct(key.bits, outcome_.qber, derive_seed(seed_, "cascade"),
                                               params_.cascade, oracle);
    key.leaked_bits += stats.leaked_bits;
    outcome_.leakage_ec = stats.leaked_bits;
    outcome_.corrections = stats.corrections;
    key.stage = KeyStage::reconciled;
    outcome_.reconciled = key.size();

    // Confirmation of the reconciled keys.
    channel.send(make(Confirmation{"reconciled", true, 0, 0, "", 0}));
    const auto seed = expect<HashSeed>(channel, session);
    const auto theirs_hash = expect<Confirmation>(channel, session);
    if (seed.purpose != "confirm" || theirs_hash.stage != "confirm") {
        throw ProtocolAbort("confirm", "malformed confirmation");
    }
    key.leaked_bits += 64;
    outcome_.leakage_confirm = 64;
    if (hash_hex(confirmation_hash(key.bits, seed.seed)) != theirs_hash.hash) {
        throw ProtocolAbort("confirm", "confirmation hash mismatch");
    }
    outcome_.confirmed = true;

    // Privacy amplification.
    const std::uint64_t m = final_length_for(params_, key.size(), outcome_.qber,
                                             outcome_.leakage_ec + outcome_.leakage_confirm);
    channel.send(make(Confirmation{"verify", true, 0, 0, "", m}));
    const auto pa = expect<HashSeed>(channel, session);
    if (pa.purpose != "privacy") {
        throw ProtocolAbort("privacy", "expected the privacy seed");
    }
    key.bits = toeplitz_hash(key.bits, static_cast<std::size_t>(m), pa.seed);
    key.stage = KeyStage::final;
    outcome_.final_length = m;
}

}  // namespace entlink::qkd
