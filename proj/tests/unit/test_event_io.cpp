#include <doctest.h>

#include <sstream>

#include "entlink/errors.hpp"
#include "entlink/event_io.hpp"
#include "support.hpp"

using namespace entlink;

TEST_SUITE("event_io") {
    TEST_CASE("picoseconds print as exact nanoseconds") {
        CHECK(format_picoseconds_as_ns(0) == "0.000");
        CHECK(format_picoseconds_as_ns(1) == "0.001");
        CHECK(format_picoseconds_as_ns(1234567) == "1234.567");
        CHECK(format_picoseconds_as_ns(-1500) == "-1.500");
    }

    TEST_CASE("CSV and binary round trips are lossless") {
        auto c = testing::bell_config(0.2, 5);
        const auto run = simulate_run(c);
        std::vector<TimeTaggedEvent> all = run.alice;
        all.insert(all.end(), run.bob.begin(), run.bob.end());
        REQUIRE(!all.empty());

        std::stringstream csv;
        write_events_csv_header(csv);
        write_events_csv(csv, all);
        CHECK(read_events_csv(csv) == all);

        std::stringstream bin(std::ios::in | std::ios::out | std::ios::binary);
        write_events_binary_header(bin, all.size());
        write_events_binary_records(bin, all);
        CHECK(bin.str().size() == kBinaryHeaderSize + kBinaryRecordSize * all.size());
        CHECK(bin.str().substr(0, 8) == "ENTLEVT1");
        CHECK(read_events_binary(bin) == all);
    }

    TEST_CASE("binary layout is little-endian") {
        const auto e = testing::event(Receiver::bob, 3, 2, 0x0102);
        std::stringstream bin(std::ios::in | std::ios::out | std::ios::binary);
        write_events_binary_header(bin, 1);
        write_events_binary_records(bin, std::vector<TimeTaggedEvent>{e});
        const std::string s = bin.str();
        const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
        CHECK(byte(8) == 1);    // version
        CHECK(byte(12) == 32);  // record size
        CHECK(byte(16) == 1);   // count
        CHECK(byte(kBinaryHeaderSize + 8) == 0x02);  // offset low byte
        CHECK(byte(kBinaryHeaderSize + 9) == 0x01);
        CHECK(byte(kBinaryHeaderSize + 16) == 2);  // pulse index
        CHECK(byte(kBinaryHeaderSize + 24) == 1);  // bob
        CHECK(byte(kBinaryHeaderSize + 25) == 3);  // detector
    }

    TEST_CASE("truncated or malformed input is rejected") {
        std::stringstream bad_magic("NOTEVENTS_______________");
        CHECK_THROWS_AS(read_events_binary(bad_magic), ValidationError);
        std::stringstream bad_csv("receiver,detector,time_ns,pulse_index,offset_ns\ncarol,0,1.000,0,1.000\n");
        CHECK_THROWS_AS(read_events_csv(bad_csv), ValidationError);
    }

    TEST_CASE("JSON export lists one object per event") {
        const std::vector<TimeTaggedEvent> events{testing::event(Receiver::alice, 1, 4, 250)};
        std::stringstream out;
        write_events_json(out, events);
        const std::string s = out.str();
        CHECK(s.find("\"receiver\"") != std::string::npos);
        CHECK(s.find("\"alice\"") != std::string::npos);
        CHECK(s.find("\"pulse_index\"") != std::string::npos);
    }
}

TEST_CASE("negative nanosecond fields parse back exactly" * doctest::test_suite("event_io")) {
    auto e = testing::event(Receiver::alice, 0, 0, 0);
    e.time_ps = -1500;
    std::stringstream csv;
    write_events_csv_header(csv);
    write_events_csv(csv, std::vector<TimeTaggedEvent>{e});
    const auto back = read_events_csv(csv);
    REQUIRE(back.size() == 1);
    CHECK(back[0].time_ps == -1500);
}
