#include "entlink/event_io.hpp"

#include <array>
#include <cstdlib>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "entlink/errors.hpp"

namespace entlink {
namespace {

constexpr char kMagic[8] = {'E', 'N', 'T', 'L', 'E', 'V', 'T', '1'};

template <typename T>
void put_le(char* dst, T value) {
    auto u = static_cast<std::make_unsigned_t<T>>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        dst[i] = static_cast<char>(u & 0xFF);
        u >>= 8;
    }
}

template <typename T>
T get_le(const char* src) {
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = sizeof(T); i-- > 0;) {
        u = static_cast<std::make_unsigned_t<T>>((u << 8) | static_cast<unsigned char>(src[i]));
    }
    return static_cast<T>(u);
}

const char* receiver_name(Receiver r) { return r == Receiver::alice ? "alice" : "bob"; }

std::int64_t parse_ns_to_ps(const std::string& field) {
    const auto dot = field.find('.');
    const std::string whole = field.substr(0, dot);
    std::string frac = dot == std::string::npos ? "" : field.substr(dot + 1);
    if (frac.size() > 3) {
        throw ValidationError("event csv: more than picosecond precision in '" + field + "'");
    }
    frac.resize(3, '0');
    const bool negative = !whole.empty() && whole[0] == '-';
    const std::int64_t mag = std::llabs(std::stoll(whole)) * 1000 + std::stoll(frac);
    return negative ? -mag : mag;
}

}  // namespace

std::string format_picoseconds_as_ns(std::int64_t ps) {
    const bool negative = ps < 0;
    const std::uint64_t mag = negative ? static_cast<std::uint64_t>(-ps) : static_cast<std::uint64_t>(ps);
    std::string frac = std::to_string(mag % 1000);
    frac.insert(0, 3 - frac.size(), '0');
    return (negative ? "-" : "") + std::to_string(mag / 1000) + "." + frac;
}

void write_events_csv_header(std::ostream& out) {
    out << "receiver,detector,time_ns,pulse_index,offset_ns\n";
}

void write_events_csv(std::ostream& out, std::span<const TimeTaggedEvent> events) {
    for (const auto& ev : events) {
        out << receiver_name(ev.receiver) << ',' << static_cast<int>(ev.detector) << ','
            << format_picoseconds_as_ns(ev.time_ps) << ',' << ev.pulse_index << ','
            << format_picoseconds_as_ns(ev.offset_ps) << '\n';
    }
}

std::vector<TimeTaggedEvent> read_events_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "receiver,detector,time_ns,pulse_index,offset_ns") {
        throw ValidationError("event csv: missing or unexpected header");
    }
    std::vector<TimeTaggedEvent> events;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::array<std::string, 5> f;
        std::istringstream ss(line);
        for (auto& field : f) {
            if (!std::getline(ss, field, ',')) {
                throw ValidationError("event csv: short row '" + line + "'");
            }
        }
        TimeTaggedEvent ev{};
        if (f[0] == "alice") {
            ev.receiver = Receiver::alice;
        } else if (f[0] == "bob") {
            ev.receiver = Receiver::bob;
        } else {
            throw ValidationError("event csv: unknown receiver '" + f[0] + "'");
        }
        const int det = std::stoi(f[1]);
        if (det < 0 || det >= kDetectorsPerReceiver) {
            throw ValidationError("event csv: detector out of range");
        }
        ev.detector = static_cast<std::uint8_t>(det);
        ev.time_ps = parse_ns_to_ps(f[2]);
        ev.pulse_index = std::stoull(f[3]);
        ev.offset_ps = parse_ns_to_ps(f[4]);
        events.push_back(ev);
    }
    return events;
}

void write_events_binary_header(std::ostream& out, std::uint64_t count) {
    std::array<char, kBinaryHeaderSize> h{};
    std::memcpy(h.data(), kMagic, sizeof kMagic);
    put_le<std::uint32_t>(h.data() + 8, 1);
    put_le<std::uint32_t>(h.data() + 12, static_cast<std::uint32_t>(kBinaryRecordSize));
    put_le<std::uint64_t>(h.data() + 16, count);
    out.write(h.data(), h.size());
}

void write_events_binary_records(std::ostream& out, std::span<const TimeTaggedEvent> events) {
    std::array<char, kBinaryRecordSize> rec{};
    for (const auto& ev : events) {
        rec.fill(0);
        put_le<std::int64_t>(rec.data(), ev.time_ps);
        put_le<std::int64_t>(rec.data() + 8, ev.offset_ps);
        put_le<std::uint64_t>(rec.data() + 16, ev.pulse_index);
        rec[24] = static_cast<char>(ev.receiver);
        rec[25] = static_cast<char>(ev.detector);
        out.write(rec.data(), rec.size());
    }
}

std::vector<TimeTaggedEvent> read_events_binary(std::istream& in) {
    std::array<char, kBinaryHeaderSize> h{};
    if (!in.read(h.data(), h.size()) || std::memcmp(h.data(), kMagic, sizeof kMagic) != 0) {
        throw ValidationError("event binary: bad magic");
    }
    if (get_le<std::uint32_t>(h.data() + 8) != 1 ||
        get_le<std::uint32_t>(h.data() + 12) != kBinaryRecordSize) {
        throw ValidationError("event binary: unsupported version or record size");
    }
    const auto count = get_le<std::uint64_t>(h.data() + 16);
    std::vector<TimeTaggedEvent> events;
    events.reserve(count);
    std::array<char, kBinaryRecordSize> rec{};
    for (std::uint64_t i = 0; i < count; ++i) {
        if (!in.read(rec.data(), rec.size())) {
            throw ValidationError("event binary: truncated record");
        }
        TimeTaggedEvent ev{};
        ev.time_ps = get_le<std::int64_t>(rec.data());
        ev.offset_ps = get_le<std::int64_t>(rec.data() + 8);
        ev.pulse_index = get_le<std::uint64_t>(rec.data() + 16);
        ev.receiver = rec[24] == 0 ? Receiver::alice : Receiver::bob;
        ev.detector = static_cast<std::uint8_t>(rec[25]);
        events.push_back(ev);
    }
    return events;
}

void write_events_json(std::ostream& out, std::span<const TimeTaggedEvent> events) {
    out << '[';
    bool first = true;
    for (const auto& ev : events) {
        out << (first ? "\n" : ",\n") << R"({"receiver":")" << receiver_name(ev.receiver)
            << R"(","detector":)" << static_cast<int>(ev.detector) << R"(,"time_ps":)" << ev.time_ps
            << R"(,"pulse_index":)" << ev.pulse_index << R"(,"offset_ps":)" << ev.offset_ps << '}';
        first = false;
    }
    out << "\n]\n";
}

}  // namespace entlink
