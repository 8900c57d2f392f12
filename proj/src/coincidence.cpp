#include "entlink/coincidence.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "entlink/errors.hpp"

namespace entlink {
namespace {

void require_sorted(std::span<const TimeTaggedEvent> events, const char* name) {
    for (std::size_t i = 1; i < events.size(); ++i) {
        if (events[i].time_ps < events[i - 1].time_ps) {
            throw ValidationError(std::string("match: ") + name + " stream is not time-sorted at index " +
                                  std::to_string(i));
        }
    }
}

bool before(const TimeTaggedEvent& a, const TimeTaggedEvent& b) {
    if (a.pulse_index != b.pulse_index) return a.pulse_index < b.pulse_index;
    return a.offset_ps < b.offset_ps;
}

}  // namespace

double CoincidenceRecord::delta_seconds() const {
    return static_cast<double>(delta_ps) / static_cast<double>(kPicosecondsPerSecond);
}

std::int64_t match_tolerance_ps(double window, WindowConvention convention) {
    if (!(std::isfinite(window) && window > 0.0)) {
        throw ValidationError("match: window must be > 0");
    }
    const double width_ps = window * static_cast<double>(kPicosecondsPerSecond);
    return convention == WindowConvention::full_width ? std::llround(width_ps / 2.0)
                                                      : std::llround(width_ps);
}

std::vector<CoincidenceRecord> match(std::span<const TimeTaggedEvent> alice,
                                     std::span<const TimeTaggedEvent> bob, double window,
                                     WindowConvention convention, std::uint64_t alice_base,
                                     std::uint64_t bob_base) {
    const std::int64_t tol = match_tolerance_ps(window, convention);
    require_sorted(alice, "alice");
    require_sorted(bob, "bob");

    // Unpaired clicks still inside the window, oldest first.
    std::deque<std::size_t> open_a;
    std::deque<std::size_t> open_b;
    std::vector<CoincidenceRecord> out;

    auto expire = [&](std::deque<std::size_t>& open, std::span<const TimeTaggedEvent> stream,
                      const TimeTaggedEvent& now) {
        while (!open.empty()) {
            const auto& old = stream[open.front()];
            if (old.pulse_index == now.pulse_index && now.offset_ps - old.offset_ps <= tol) {
                break;
            }
            open.pop_front();
        }
    };

    std::size_t i = 0;
    std::size_t j = 0;
    while (i < alice.size() || j < bob.size()) {
        const bool take_alice = j >= bob.size() || (i < alice.size() && !before(bob[j], alice[i]));
        if (take_alice) {
            const auto& ev = alice[i];
            expire(open_b, bob, ev);
            expire(open_a, alice, ev);
            if (!open_b.empty()) {
                const std::size_t k = open_b.front();
                open_b.pop_front();
                out.push_back({ev, bob[k], alice_base + i, bob_base + k, ev.offset_ps - bob[k].offset_ps});
            } else {
                open_a.push_back(i);
            }
            ++i;
        } else {
            const auto& ev = bob[j];
            expire(open_a, alice, ev);
            expire(open_b, bob, ev);
            if (!open_a.empty()) {
                const std::size_t k = open_a.front();
                open_a.pop_front();
                out.push_back({alice[k], ev, alice_base + k, bob_base + j, alice[k].offset_ps - ev.offset_ps});
            } else {
                open_b.push_back(j);
            }
            ++j;
        }
    }
    std::sort(out.begin(), out.end(), [](const CoincidenceRecord& a, const CoincidenceRecord& b) {
        return a.alice_index < b.alice_index;
    });
    return out;
}

StreamingMatcher::StreamingMatcher(double window, WindowConvention convention)
    : window_(window), convention_(convention) {
    match_tolerance_ps(window, convention);
}

void StreamingMatcher::push(std::span<const TimeTaggedEvent> alice,
                            std::span<const TimeTaggedEvent> bob) {
    if (finished_) {
        throw std::logic_error("StreamingMatcher: push after finish");
    }
    auto append = [](std::vector<TimeTaggedEvent>& buf, std::span<const TimeTaggedEvent> in,
                     const char* name) {
        if (!in.empty() && !buf.empty() && in.front().time_ps < buf.back().time_ps) {
            throw ValidationError(std::string("match: ") + name + " stream is not time-sorted");
        }
        buf.insert(buf.end(), in.begin(), in.end());
    };
    append(alice_, alice, "alice");
    append(bob_, bob, "bob");
    if (alice_.empty() || bob_.empty()) {
        return;
    }
    // Sorted input means nothing earlier than the latest pulse can still arrive.
    flush(std::min(alice_.back().pulse_index, bob_.back().pulse_index));
}

void StreamingMatcher::finish() {
    if (!finished_) {
        flush(std::numeric_limits<std::uint64_t>::max());
        finished_ = true;
    }
}

std::vector<CoincidenceRecord> StreamingMatcher::take() {
    std::vector<CoincidenceRecord> out;
    out.swap(ready_);
    return out;
}

void StreamingMatcher::flush(std::uint64_t before_pulse) {
    auto cut = [&](const std::vector<TimeTaggedEvent>& buf) {
        return static_cast<std::size_t>(
            std::partition_point(buf.begin(), buf.end(),
                                 [&](const TimeTaggedEvent& e) { return e.pulse_index < before_pulse; }) -
            buf.begin());
    };
    const std::size_t na = cut(alice_);
    const std::size_t nb = cut(bob_);
    if (na == 0 && nb == 0) {
        return;
    }
    auto records = match(std::span(alice_.data(), na), std::span(bob_.data(), nb), window_,
                         convention_, alice_base_, bob_base_);
    ready_.insert(ready_.end(), records.begin(), records.end());
    alice_.erase(alice_.begin(), alice_.begin() + static_cast<std::ptrdiff_t>(na));
    bob_.erase(bob_.begin(), bob_.begin() + static_cast<std::ptrdiff_t>(nb));
    alice_base_ += na;
    bob_base_ += nb;
}

double accidental_rate(double singles_alice, double singles_bob, double window) {
    if (singles_alice < 0.0 || singles_bob < 0.0 || window < 0.0) {
        throw ValidationError("accidental_rate: inputs must be >= 0");
    }
    return singles_alice * singles_bob * window;
}

SettingPair setting_pair(const LinkConfig& config, int alice_basis, int bob_basis) {
    return {alice_basis, bob_basis, config.settings_alice.angle(alice_basis),
            config.settings_bob.angle(bob_basis)};
}

std::uint64_t CountMatrix::total() const { return n[0][0] + n[0][1] + n[1][0] + n[1][1]; }

CountMatrix& CountMatrix::operator+=(const CountMatrix& other) {
    if (!(settings == other.settings)) {
        throw std::invalid_argument("CountMatrix: cannot merge different setting pairs");
    }
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) n[i][j] += other.n[i][j];
    for (int d = 0; d < kDetectorsPerReceiver; ++d) {
        singles_alice[d] += other.singles_alice[d];
        singles_bob[d] += other.singles_bob[d];
    }
    duration += other.duration;
    return *this;
}

double NormalizedCounts::total() const { return n[0][0] + n[0][1] + n[1][0] + n[1][1]; }

std::vector<CoincidenceRecord> select_setting(std::span<const CoincidenceRecord> records,
                                              int alice_basis, int bob_basis) {
    std::vector<CoincidenceRecord> out;
    for (const auto& r : records) {
        if (r.alice_basis() == alice_basis && r.bob_basis() == bob_basis) {
            out.push_back(r);
        }
    }
    return out;
}

CountMatrix accumulate_counts(std::span<const CoincidenceRecord> records,
                              const SettingPair& settings) {
    CountMatrix m;
    m.settings = settings;
    for (const auto& r : records) {
        ++m.n[outcome_index(r.alice_outcome())][outcome_index(r.bob_outcome())];
    }
    return m;
}

NormalizedCounts normalize(const CountMatrix& matrix) {
    NormalizedCounts out;
    out.settings = matrix.settings;
    // Relative efficiency of each outcome port within the basis in use.
    auto shares = [](const DetectorCounts& singles, int basis, const char* who) {
        std::array<double, 2> s{};
        for (int k = 0; k < 2; ++k) {
            const auto c = singles.at(detector_index(basis, outcome_from_index(k)));
            if (c == 0) {
                throw ValidationError(std::string("normalize: zero singles on a ") + who + " detector");
            }
            s[k] = static_cast<double>(c);
        }
        const double mean = (s[0] + s[1]) / 2.0;
        return std::array<double, 2>{s[0] / mean, s[1] / mean};
    };
    const auto wa = shares(matrix.singles_alice, matrix.settings.alice_basis, "alice");
    const auto wb = shares(matrix.singles_bob, matrix.settings.bob_basis, "bob");

    double raw_total = 0.0;
    double corrected_total = 0.0;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            out.n[i][j] = static_cast<double>(matrix.n[i][j]) / (wa[i] * wb[j]);
            raw_total += static_cast<double>(matrix.n[i][j]);
            corrected_total += out.n[i][j];
        }
    }
    if (corrected_total > 0.0) {
        const double scale = raw_total / corrected_total;
        for (auto& row : out.n)
            for (auto& x : row) x *= scale;
    }
    return out;
}

}  // namespace entlink
