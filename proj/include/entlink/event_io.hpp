#pragma once

// Export formats for detector event streams.
//
// CSV: header `receiver,detector,time_ns,pulse_index,offset_ns`, receiver is
// `alice` or `bob`, times are exact decimal nanoseconds with 3 fractional
// digits (the picosecond resolution of the simulator).
//
// Binary (all integers little-endian):
//   header, 24 bytes: "ENTLEVT1" | u32 version (=1) | u32 record size (=32) | u64 count
//   record, 32 bytes: i64 time_ps | i64 offset_ps | u64 pulse_index |
//                     u8 receiver (0 alice, 1 bob) | u8 detector | 6 zero bytes

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "entlink/link_sim.hpp"

namespace entlink {

inline constexpr std::size_t kBinaryHeaderSize = 24;
inline constexpr std::size_t kBinaryRecordSize = 32;

std::string format_picoseconds_as_ns(std::int64_t ps);

void write_events_csv_header(std::ostream& out);
void write_events_csv(std::ostream& out, std::span<const TimeTaggedEvent> events);
std::vector<TimeTaggedEvent> read_events_csv(std::istream& in);

void write_events_binary_header(std::ostream& out, std::uint64_t count);
void write_events_binary_records(std::ostream& out, std::span<const TimeTaggedEvent> events);
std::vector<TimeTaggedEvent> read_events_binary(std::istream& in);

/// JSON array of {receiver, detector, time_ps, pulse_index, offset_ps}.
void write_events_json(std::ostream& out, std::span<const TimeTaggedEvent> events);

}  // namespace entlink
