#include "entlink/qkd/session.hpp"

#include <algorithm>
#include <exception>
#include <stdexcept>
#include <sys/socket.h>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

#include "entlink/errors.hpp"
#include "entlink/qkd/privacy.hpp"
#include "entlink/random.hpp"

namespace entlink::qkd {
namespace {

using nlohmann::json;

// Keeps `keep` of the listed positions, chosen uniformly.
void thin(std::vector<std::size_t>& members, std::size_t keep, Rng& rng, std::vector<bool>& alive) {
    for (std::size_t i = 0; i < keep; ++i) {
        std::swap(members[i], members[i + rng.below(members.size() - i)]);
    }
    for (std::size_t i = keep; i < members.size(); ++i) alive[members[i]] = false;
}

DetectorCounts count_detectors(std::span<const CoincidenceRecord> records, const std::vector<bool>& alive,
                               bool alice_side) {
    DetectorCounts c{};
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (alive[i]) ++c[alice_side ? records[i].alice.detector : records[i].bob.detector];
    }
    return c;
}

json outcome_to_json(const PartyOutcome& o) {
    json j{{"bits", o.key.size()},
           {"key", to_hex(o.key.bits)},
           {"stage", stage_name(o.key.stage)},
           {"leaked", o.key.leaked_bits},
           {"sifted", o.sifted},
           {"sample", o.sample},
           {"sample_errors", o.sample_errors},
           {"reconciled", o.reconciled},
           {"leakage_ec", o.leakage_ec},
           {"leakage_confirm", o.leakage_confirm},
           {"final_length", o.final_length},
           {"corrections", o.corrections},
           {"qber", o.qber},
           {"confirmed", o.confirmed}};
    if (o.abort) j["abort"] = {{"stage", o.abort->stage}, {"reason", o.abort->reason}};
    return j;
}

PartyOutcome outcome_from_json(const json& j) {
    PartyOutcome o;
    o.key.bits = from_hex(j.at("key").get<std::string>(), j.at("bits").get<std::size_t>());
    const auto stage = j.at("stage").get<std::string>();
    for (auto s : {KeyStage::raw, KeyStage::sifted, KeyStage::reconciled, KeyStage::final}) {
        if (stage_name(s) == stage) o.key.stage = s;
    }
    o.key.leaked_bits = j.at("leaked").get<std::uint64_t>();
    o.sifted = j.at("sifted").get<std::uint64_t>();
    o.sample = j.at("sample").get<std::uint64_t>();
    o.sample_errors = j.at("sample_errors").get<std::uint64_t>();
    o.reconciled = j.at("reconciled").get<std::uint64_t>();
    o.leakage_ec = j.at("leakage_ec").get<std::uint64_t>();
    o.leakage_confirm = j.at("leakage_confirm").get<std::uint64_t>();
    o.final_length = j.at("final_length").get<std::uint64_t>();
    o.corrections = j.at("corrections").get<std::uint64_t>();
    o.qber = j.at("qber").get<double>();
    o.confirmed = j.at("confirmed").get<bool>();
    if (o.sample > 0) o.key.qber_estimate = o.qber;
    if (j.contains("abort")) {
        o.abort = AbortInfo{j["abort"].at("stage").get<std::string>(), j["abort"].at("reason").get<std::string>()};
    }
    return o;
}

struct Fd {
    int fd = -1;
    Fd() = default;
    explicit Fd(int f) : fd(f) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    ~Fd() { reset(); }
    void reset() {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
};

PartyOutcome run_bob(BobParty& bob, Channel& base, const Tamper& tamper, ProtocolRun& run) {
    std::optional<TamperingChannel> tampered;
    Channel* inner = &base;
    if (tamper) {
        tampered.emplace(base, tamper);
        inner = &*tampered;
    }
    RecordingChannel recorder(*inner, "bob", "alice");
    PartyOutcome out = bob.run(recorder);
    run.transcript = recorder.transcript();
    run.messages = recorder.messages();
    return out;
}

void run_in_processes(AliceParty& alice, BobParty& bob, const Tamper& tamper, ProtocolRun& run) {
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, sv) != 0) {
        throw std::runtime_error("socketpair failed");
    }
    Fd bob_end(sv[0]);
    Fd alice_end(sv[1]);
    int pipefd[2];
    if (::pipe(pipefd) != 0) {
        throw std::runtime_error("pipe failed");
    }
    Fd result_read(pipefd[0]);
    Fd result_write(pipefd[1]);

    const pid_t pid = ::fork();
    if (pid < 0) {
        throw std::runtime_error("fork failed");
    }
    if (pid == 0) {
        bob_end.reset();
        result_read.reset();
        int status = 0;
        try {
            FdChannel channel(alice_end.fd);
            serve(alice, channel);
            write_all(result_write.fd, outcome_to_json(alice.outcome()).dump());
        } catch (...) {
            status = 1;
        }
        ::_exit(status);
    }
    alice_end.reset();
    result_write.reset();

    std::exception_ptr failure;
    try {
        FdChannel channel(bob_end.fd);
        run.bob = run_bob(bob, channel, tamper, run);
    } catch (...) {
        failure = std::current_exception();
    }
    bob_end.reset();  // unblocks Alice if Bob failed mid-session

    std::string payload;
    char buf[65536];
    for (;;) {
        const ssize_t n = ::read(result_read.fd, buf, sizeof buf);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        payload.append(buf, static_cast<std::size_t>(n));
    }
    int status = 0;
    ::waitpid(pid, &status, 0);
    if (failure) std::rethrow_exception(failure);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0 || payload.empty()) {
        throw std::runtime_error("alice process failed");
    }
    run.alice = outcome_from_json(json::parse(payload));
}

void run_in_threads(AliceParty& alice, BobParty& bob, const Tamper& tamper, ProtocolRun& run) {
    MessageQueue to_alice;
    MessageQueue to_bob;
    std::exception_ptr alice_failure;
    std::thread worker([&] {
        try {
            QueueChannel channel(to_alice, to_bob);
            serve(alice, channel);
        } catch (...) {
            alice_failure = std::current_exception();
            to_bob.close();
        }
    });
    std::exception_ptr bob_failure;
    try {
        QueueChannel channel(to_bob, to_alice);
        run.bob = run_bob(bob, channel, tamper, run);
    } catch (...) {
        bob_failure = std::current_exception();
        to_alice.close();
    }
    worker.join();
    if (bob_failure) std::rethrow_exception(bob_failure);
    if (alice_failure) std::rethrow_exception(alice_failure);
    run.alice = alice.outcome();
}

}  // namespace

BalanceResult balance_and_count(std::span<const CoincidenceRecord> records, std::uint64_t seed) {
    BalanceResult out;
    std::vector<bool> alive(records.size(), true);
    Rng rng(seed);
    out.alice_before = count_detectors(records, alive, true);
    out.bob_before = count_detectors(records, alive, false);
    for (bool alice_side : {true, false}) {
        const DetectorCounts counts = count_detectors(records, alive, alice_side);
        const std::uint64_t floor = *std::min_element(counts.begin(), counts.end());
        for (int d = 0; d < kDetectorsPerReceiver; ++d) {
            if (counts[d] == floor) continue;
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < records.size(); ++i) {
                const auto det = alice_side ? records[i].alice.detector : records[i].bob.detector;
                if (alive[i] && det == d) members.push_back(i);
            }
            thin(members, static_cast<std::size_t>(floor), rng, alive);
        }
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (alive[i]) out.records.push_back(records[i]);
    }
    out.alice_after = count_detectors(out.records, std::vector<bool>(out.records.size(), true), true);
    out.bob_after = count_detectors(out.records, std::vector<bool>(out.records.size(), true), false);
    return out;
}

std::pair<std::vector<LocalRecord>, std::vector<LocalRecord>> local_views(
    std::span<const CoincidenceRecord> records) {
    std::pair<std::vector<LocalRecord>, std::vector<LocalRecord>> views;
    views.first.reserve(records.size());
    views.second.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        views.first.push_back({i, records[i].alice_basis(), records[i].alice_outcome()});
        views.second.push_back({i, records[i].bob_basis(), records[i].bob_outcome()});
    }
    return views;
}

SiftResult sift(std::span<const LocalRecord> alice, std::span<const LocalRecord> bob) {
    if (alice.size() != bob.size()) {
        throw ProtocolAbort("sift", "coincidence identifiers differ");
    }
    SiftResult out;
    for (std::size_t i = 0; i < alice.size(); ++i) {
        if (alice[i].id != bob[i].id) {
            throw ProtocolAbort("sift", "coincidence identifiers differ");
        }
        if (alice[i].basis == bob[i].basis) {
            out.alice.bits.push_back(key_bit(alice[i].outcome, false));
            out.bob.bits.push_back(key_bit(bob[i].outcome, true));
            out.kept_ids.push_back(alice[i].id);
        }
    }
    out.alice.stage = KeyStage::sifted;
    out.bob.stage = KeyStage::sifted;
    return out;
}

QberEstimate estimate_qber(KeyBlock& alice, KeyBlock& bob, double sample_fraction, std::uint64_t seed) {
    if (alice.stage != KeyStage::sifted || bob.stage != KeyStage::sifted) {
        throw ValidationError("estimate_qber needs sifted keys");
    }
    if (alice.size() != bob.size()) {
        throw ValidationError("estimate_qber: key lengths differ");
    }
    const auto positions = choose_sample(alice.size(), sample_fraction, seed);
    if (positions.empty()) {
        throw ProtocolAbort("qber", "empty sample");
    }
    QberEstimate est;
    est.sample = positions.size();
    for (auto p : positions) est.errors += alice.bits[p] != bob.bits[p];
    est.qber = static_cast<double>(est.errors) / static_cast<double>(est.sample);
    for (KeyBlock* k : {&alice, &bob}) {
        k->bits = remove_positions(k->bits, positions);
        k->leaked_bits += est.sample;
        k->qber_estimate = est.qber;
    }
    return est;
}

CascadeStats reconcile(const KeyBlock& alice, KeyBlock& bob, double qber, std::uint64_t seed,
                       const CascadeParams& params, double abort_qber) {
    if (alice.size() != bob.size()) {
        throw ValidationError("reconcile: key lengths differ");
    }
    if (qber > abort_qber) {
        throw ProtocolAbort("qber", "estimated QBER above the abort threshold");
    }
    const CascadeStats stats = cascade_correct(
        bob.bits, qber, seed, params, [&](const ParityQuery& q) { return answer_parity_query(alice.bits, q); });
    bob.leaked_bits += stats.leaked_bits;
    bob.stage = KeyStage::reconciled;
    return stats;
}

KeyBlock privacy_amplify(const KeyBlock& key, std::uint64_t leakage, double qber, double epsilon,
                         std::uint64_t seed, MarginMode margin) {
    if (key.stage != KeyStage::reconciled) {
        throw ValidationError("privacy_amplify needs a reconciled key");
    }
    ProtocolParams params;
    params.epsilon = epsilon;
    params.margin = margin;
    const std::uint64_t m = final_length_for(params, key.size(), qber, leakage);
    KeyBlock out;
    out.bits = toeplitz_hash(key.bits, static_cast<std::size_t>(m), seed);
    out.stage = KeyStage::final;
    out.leaked_bits = key.leaked_bits;
    out.qber_estimate = qber;
    return out;
}

ProtocolRun run_protocol(std::vector<LocalRecord> alice_view, std::vector<LocalRecord> bob_view,
                         const ProtocolParams& params, std::uint64_t seed, Placement placement,
                         const Tamper& tamper) {
    AliceParty alice(std::move(alice_view), params, derive_seed(seed, "alice"));
    BobParty bob(std::move(bob_view), params, derive_seed(seed, "bob"));
    ProtocolRun run;
    switch (placement) {
        case Placement::lockstep: {
            LockstepChannel channel(alice);
            run.bob = run_bob(bob, channel, tamper, run);
            run.alice = alice.outcome();
            break;
        }
        case Placement::threads:
            run_in_threads(alice, bob, tamper, run);
            break;
        case Placement::processes:
            run_in_processes(alice, bob, tamper, run);
            break;
    }
    return run;
}

double SessionLedger::sift_fraction() const {
    return balanced > 0 ? static_cast<double>(sifted) / static_cast<double>(balanced) : 0.0;
}

double SessionLedger::key_rate() const {
    return duration > 0.0 ? static_cast<double>(final_bits) / duration : 0.0;
}

nlohmann::json to_json(const SessionLedger& l) {
    json j{{"coincidences", l.coincidences},
           {"balanced", l.balanced},
           {"sifted", l.sifted},
           {"sift_fraction", l.sift_fraction()},
           {"sample", l.sample},
           {"sample_errors", l.sample_errors},
           {"qber", l.qber},
           {"reconciled", l.reconciled},
           {"leakage_ec", l.leakage_ec},
           {"leakage_confirm", l.leakage_confirm},
           {"after_leakage", l.after_leakage},
           {"corrections", l.corrections},
           {"final", l.final_bits},
           {"duration_s", l.duration},
           {"key_rate_bps", l.key_rate()},
           {"confirmed", l.confirmed},
           {"keys_match", l.keys_match}};
    j["abort"] = l.abort ? json{{"stage", l.abort->stage}, {"reason", l.abort->reason}} : json(nullptr);
    return j;
}

SessionResult run_session(std::span<const CoincidenceRecord> records, double duration,
                          const SessionConfig& config, const Tamper& tamper) {
    SessionResult result;
    auto& ledger = result.ledger;
    ledger.coincidences = records.size();
    ledger.duration = duration;

    const BalanceResult balanced = balance_and_count(records, derive_seed(config.seed, "balance"));
    ledger.balanced = balanced.records.size();
    auto [alice_view, bob_view] = local_views(balanced.records);
    result.run = run_protocol(std::move(alice_view), std::move(bob_view), config.protocol,
                              derive_seed(config.seed, "protocol"), config.placement, tamper);

    const PartyOutcome& bob = result.run.bob;
    ledger.sifted = bob.sifted;
    ledger.sample = bob.sample;
    ledger.sample_errors = bob.sample_errors;
    ledger.qber = bob.qber;
    ledger.reconciled = bob.reconciled;
    ledger.leakage_ec = bob.leakage_ec;
    ledger.leakage_confirm = bob.leakage_confirm;
    const std::uint64_t leaked = bob.leakage_ec + bob.leakage_confirm;
    ledger.after_leakage = bob.reconciled > leaked ? bob.reconciled - leaked : 0;
    ledger.corrections = bob.corrections;
    ledger.confirmed = bob.confirmed;
    ledger.abort = bob.abort ? bob.abort : result.run.alice.abort;
    if (!ledger.abort) {
        ledger.final_bits = bob.final_length;
    }
    ledger.keys_match = !ledger.abort && result.run.alice.key.bits == bob.key.bits;
    for (const auto& m : result.run.messages) result.audited_leakage += disclosed_key_bits(m);
    return result;
}

}  // namespace entlink::qkd
