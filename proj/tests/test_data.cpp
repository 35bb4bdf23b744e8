#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "soce/cell_sim.hpp"
#include "soce/data.hpp"
#include "soce/rng.hpp"

using namespace soce;

namespace {

DriveCycleLog make_log(std::string id, std::size_t n, std::uint64_t seed,
                       double temperature = -1.0) {
    Rng rng(seed);
    DriveCycleLog log;
    log.cycle_id = std::move(id);
    for (std::size_t i = 0; i < n; ++i) {
        CycleSample s;
        s.time_s = static_cast<double>(i);
        s.voltage_v = rng.uniform(3.0, 4.2);
        s.current_a = rng.uniform(-2.0, 3.0);
        s.temperature_c = temperature < 0.0 ? rng.uniform(20.0, 30.0) : temperature;
        log.samples.push_back(s);
        log.soc.push_back(rng.uniform(0.2, 1.0));
    }
    return log;
}

} // namespace

TEST_CASE("parse_cycle_csv: direct parse", "[data]") {
    const std::string csv =
        "time_s,voltage_v,current_a,temperature_c,extra\n"
        "0.0,3.7,1.0,25.0,junk\n"
        "1.0,3.69,1.2,25.1,junk\n"
        "2.0,3.68,0.9,25.0,junk\n";
    const auto log = parse_cycle_csv(csv, "demo");
    REQUIRE(log.size() == 3);
    REQUIRE(log.cycle_id == "demo");
    REQUIRE(log.samples[1].voltage_v == 3.69);
    REQUIRE(log.samples[2].current_a == 0.9);
    REQUIRE_FALSE(log.has_soc());
}

TEST_CASE("parse_cycle_csv: soc column and CRLF endings", "[data]") {
    const std::string csv =
        "time_s,voltage_v,current_a,temperature_c,soc\r\n"
        "0,3.7,1,25,0.9\r\n"
        "1,3.69,1,25,0.89\r\n";
    const auto log = parse_cycle_csv(csv, "x");
    REQUIRE(log.has_soc());
    REQUIRE(log.soc[1] == 0.89);
}

TEST_CASE("parse_cycle_csv: duplicate timestamp names the line", "[data]") {
    const std::string csv =
        "time_s,voltage_v,current_a,temperature_c\n"
        "0.0,3.7,1.0,25.0\n"
        "1.0,3.7,1.0,25.0\n"
        "1.0,3.7,1.0,25.0\n";
    try {
        parse_cycle_csv(csv, "x");
        FAIL("expected NonMonotonicTime");
    } catch (const NonMonotonicTime& e) {
        REQUIRE(e.line() == 4);
    }
}

TEST_CASE("parse_cycle_csv: missing column", "[data]") {
    const std::string csv = "time_s,voltage_v,temperature_c\n0,3.7,25\n1,3.7,25\n";
    try {
        parse_cycle_csv(csv, "x");
        FAIL("expected MissingColumn");
    } catch (const MissingColumn& e) {
        REQUIRE(e.column() == "current_a");
    }
}

TEST_CASE("parse_cycle_csv: malformed number", "[data]") {
    const std::string csv =
        "time_s,voltage_v,current_a,temperature_c\n0,3.7,1.0,25\n1,3.7,oops,25\n";
    REQUIRE_THROWS_AS(parse_cycle_csv(csv, "x"), MalformedNumber);
}

TEST_CASE("write_cycle_csv round-trips through parse_cycle_csv", "[data]") {
    const auto log = coulomb_count(make_log("rt", 50, 3), 2.9, 0.8);
    const auto parsed = parse_cycle_csv(write_cycle_csv(log), "rt");
    REQUIRE(parsed.size() == log.size());
    for (std::size_t i = 0; i < log.size(); ++i) {
        REQUIRE(parsed.samples[i].time_s == log.samples[i].time_s);
        REQUIRE(parsed.samples[i].voltage_v == log.samples[i].voltage_v);
        REQUIRE(parsed.samples[i].current_a == log.samples[i].current_a);
        REQUIRE(parsed.soc[i] == log.soc[i]);
    }
}

TEST_CASE("coulomb_count: full 1C discharge", "[data]") {
    DriveCycleLog log;
    log.cycle_id = "cc";
    for (std::size_t t = 0; t <= 3600; ++t)
        log.samples.push_back({static_cast<double>(t), 3.7, 2.9, 25.0});
    const auto counted = coulomb_count(log, 2.9, 1.0);
    REQUIRE(counted.soc.front() == 1.0);
    REQUIRE(counted.soc.back() == 0.0);
}

TEST_CASE("coulomb_count: zero current keeps soc constant", "[data]") {
    DriveCycleLog log;
    log.cycle_id = "idle";
    for (std::size_t t = 0; t < 100; ++t)
        log.samples.push_back({static_cast<double>(t), 3.9, 0.0, 25.0});
    const auto counted = coulomb_count(log, 2.9, 0.6);
    for (const double s : counted.soc) REQUIRE(s == 0.6);
}

TEST_CASE("coulomb_count: half-hour at 0.5C", "[data]") {
    DriveCycleLog log;
    log.cycle_id = "half";
    for (std::size_t t = 0; t <= 1800; ++t)
        log.samples.push_back({static_cast<double>(t), 3.8, 1.45, 25.0});
    const auto counted = coulomb_count(log, 2.9, 0.8);
    REQUIRE(counted.soc.back() == Catch::Approx(0.55).margin(1e-12));
}

TEST_CASE("coulomb_count: measured ah column takes precedence", "[data]") {
    DriveCycleLog log;
    log.cycle_id = "ah";
    for (std::size_t t = 0; t < 4; ++t) {
        log.samples.push_back({static_cast<double>(t), 3.8, 99.0, 25.0}); // current deliberately bogus
        log.ah.push_back(0.29 * static_cast<double>(t));
    }
    const auto counted = coulomb_count(log, 2.9, 1.0);
    REQUIRE(counted.soc[0] == 1.0);
    REQUIRE(counted.soc[1] == Catch::Approx(0.9).margin(1e-12));
    REQUIRE(counted.soc[3] == Catch::Approx(0.7).margin(1e-12));
}

TEST_CASE("coulomb_count: clamping is counted", "[data]") {
    DriveCycleLog log;
    log.cycle_id = "clamp";
    for (std::size_t t = 0; t <= 10; ++t)
        log.samples.push_back({static_cast<double>(t), 3.8, -50.0, 25.0}); // hard charging from full
    const auto counted = coulomb_count(log, 2.9, 1.0);
    REQUIRE(counted.clamp_events == 10);
    for (const double s : counted.soc) REQUIRE(s == 1.0);
}

TEST_CASE("coulomb_count: sign reflection about soc0 before clamping", "[data]") {
    auto log = make_log("signs", 200, 12);
    auto flipped = log;
    for (auto& s : flipped.samples) s.current_a = -s.current_a;
    const auto a = coulomb_count(log, 10.0, 0.5);     // large capacity: no clamping
    const auto b = coulomb_count(flipped, 10.0, 0.5);
    REQUIRE(a.clamp_events == 0);
    REQUIRE(b.clamp_events == 0);
    for (std::size_t i = 0; i < a.size(); ++i)
        REQUIRE(a.soc[i] - 0.5 == Catch::Approx(-(b.soc[i] - 0.5)).margin(1e-15));
}

TEST_CASE("fit_normalizer: direct min/max and degenerate channel", "[data]") {
    auto log = make_log("n", 100, 4, 25.0); // constant temperature
    double v_min = 1e9, v_max = -1e9;
    for (const auto& s : log.samples) {
        v_min = std::min(v_min, s.voltage_v);
        v_max = std::max(v_max, s.voltage_v);
    }
    const auto norm = fit_normalizer(std::span(&log, 1));
    REQUIRE(norm.range(Channel::Voltage).min == v_min);
    REQUIRE(norm.range(Channel::Voltage).max == v_max);
    REQUIRE(norm.range(Channel::Temperature).degenerate);
    REQUIRE_FALSE(norm.range(Channel::Voltage).degenerate);
}

TEST_CASE("fit_normalizer: union over logs", "[data]") {
    DriveCycleLog a = make_log("a", 10, 1);
    DriveCycleLog b = make_log("b", 10, 2);
    for (auto& s : a.samples) s.current_a = -5.0;
    for (auto& s : b.samples) s.current_a = 10.0;
    std::vector<DriveCycleLog> logs{a, b};
    const auto norm = fit_normalizer(logs);
    REQUIRE(norm.range(Channel::Current).min == -5.0);
    REQUIRE(norm.range(Channel::Current).max == 10.0);
}

TEST_CASE("normalize: endpoints, midpoint, degenerate", "[data]") {
    Normalizer norm;
    norm.range(Channel::Voltage) = {3.0, 4.2, false};
    REQUIRE(norm.normalize(Channel::Voltage, 4.2) == 1.0);
    REQUIRE(norm.normalize(Channel::Voltage, 3.0) == -1.0);
    REQUIRE(norm.normalize(Channel::Voltage, 3.6) == Catch::Approx(0.0).margin(1e-15));

    norm.range(Channel::Temperature) = {25.0, 25.0, true};
    REQUIRE(norm.normalize(Channel::Temperature, 31.0) == 0.0);
    REQUIRE(norm.denormalize(Channel::Temperature, 0.7) == 25.0);
}

TEST_CASE("normalize/denormalize round-trip over seeded values", "[data]") {
    Normalizer norm;
    norm.range(Channel::Soc) = {0.13, 0.97, false};
    Rng rng(31);
    double max_err = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.uniform(0.13, 0.97);
        const double rt = norm.denormalize(Channel::Soc, norm.normalize(Channel::Soc, v));
        max_err = std::max(max_err, std::abs(rt - v) / std::abs(v));
    }
    REQUIRE(max_err < 1e-12);
}

TEST_CASE("build_regressors: row counting and layout", "[data]") {
    const auto log = make_log("c1", 10, 8);
    const auto norm = fit_normalizer(std::span(&log, 1));
    const auto ds = build_regressors(std::span(&log, 1), 2, norm);
    REQUIRE(ds.row_count() == 8);
    REQUIRE(ds.feature_count() == 8);

    // row for t = 2: [V(1) V(0) I(1) I(0) T(1) T(0) S(1) S(0)], target S(2)
    const auto row = ds.row(0);
    REQUIRE(row[0] == norm.normalize(Channel::Voltage, log.samples[1].voltage_v));
    REQUIRE(row[1] == norm.normalize(Channel::Voltage, log.samples[0].voltage_v));
    REQUIRE(row[2] == norm.normalize(Channel::Current, log.samples[1].current_a));
    REQUIRE(row[5] == norm.normalize(Channel::Temperature, log.samples[0].temperature_c));
    REQUIRE(row[6] == norm.normalize(Channel::Soc, log.soc[1]));
    REQUIRE(row[7] == norm.normalize(Channel::Soc, log.soc[0]));
    REQUIRE(ds.targets[0] == norm.normalize(Channel::Soc, log.soc[2]));
    REQUIRE(ds.time_s[0] == log.samples[2].time_s);
}

TEST_CASE("build_regressors: multiple cycles never share samples", "[data]") {
    std::vector<DriveCycleLog> logs{make_log("a", 10, 1), make_log("b", 12, 2)};
    const auto norm = fit_normalizer(logs);
    const auto ds = build_regressors(logs, 3, norm);
    REQUIRE(ds.row_count() == 7 + 9);
    for (std::size_t i = 0; i < 7; ++i) REQUIRE(ds.source_cycle(i) == "a");
    for (std::size_t i = 7; i < 16; ++i) REQUIRE(ds.source_cycle(i) == "b");
}

TEST_CASE("build_regressors: insufficient history", "[data]") {
    const auto log = make_log("short", 100, 5);
    const auto norm = fit_normalizer(std::span(&log, 1));
    REQUIRE_THROWS_AS(build_regressors(std::span(&log, 1), 100, norm), InsufficientHistory);
    REQUIRE_NOTHROW(build_regressors(std::span(&log, 1), 99, norm));
}

TEST_CASE("build_regressors: window reconstruction via denormalize", "[data]") {
    const auto log = make_log("rt", 40, 77);
    const auto norm = fit_normalizer(std::span(&log, 1));
    const std::size_t d = 5;
    const auto ds = build_regressors(std::span(&log, 1), d, norm);
    for (std::size_t r = 0; r < ds.row_count(); ++r) {
        const std::size_t t = d + r;
        const auto row = ds.row(r);
        for (std::size_t lag = 1; lag <= d; ++lag) {
            const double v = norm.denormalize(Channel::Voltage, row[lag - 1]);
            const double i = norm.denormalize(Channel::Current, row[d + lag - 1]);
            const double s = norm.denormalize(Channel::Soc, row[3 * d + lag - 1]);
            REQUIRE(v == Catch::Approx(log.samples[t - lag].voltage_v).epsilon(1e-12));
            REQUIRE(i == Catch::Approx(log.samples[t - lag].current_a).epsilon(1e-12));
            REQUIRE(s == Catch::Approx(log.soc[t - lag]).epsilon(1e-12));
        }
    }
}

TEST_CASE("split_dataset: exact sizes with remainder to train", "[data]") {
    const auto log = make_log("s", 104, 9);
    const auto norm = fit_normalizer(std::span(&log, 1));
    const auto ds = build_regressors(std::span(&log, 1), 4, norm); // 100 rows
    const auto split = split_dataset(ds, {0.7, 0.15, 0.15}, 1, SplitMode::RandomRows);
    REQUIRE(split.train.row_count() == 70);
    REQUIRE(split.val.row_count() == 15);
    REQUIRE(split.test.row_count() == 15);
}

TEST_CASE("split_dataset: same seed reproduces the partition", "[data]") {
    const auto log = make_log("s", 60, 10);
    const auto norm = fit_normalizer(std::span(&log, 1));
    const auto ds = build_regressors(std::span(&log, 1), 2, norm);
    const auto a = split_dataset(ds, {0.7, 0.15, 0.15}, 99, SplitMode::RandomRows);
    const auto b = split_dataset(ds, {0.7, 0.15, 0.15}, 99, SplitMode::RandomRows);
    REQUIRE(a.train.features == b.train.features);
    REQUIRE(a.val.targets == b.val.targets);
    REQUIRE(a.test.time_s == b.test.time_s);
}

TEST_CASE("split_dataset: block mode slices cycles in time order", "[data]") {
    const auto log = make_log("blk", 104, 11);
    const auto norm = fit_normalizer(std::span(&log, 1));
    const auto ds = build_regressors(std::span(&log, 1), 4, norm); // 100 rows
    const auto split = split_dataset(ds, {0.7, 0.15, 0.15}, 1, SplitMode::ContiguousBlocks);
    REQUIRE(split.train.row_count() == 70);
    for (std::size_t i = 0; i < 70; ++i) REQUIRE(split.train.time_s[i] == ds.time_s[i]);
    for (std::size_t i = 0; i < 15; ++i) REQUIRE(split.val.time_s[i] == ds.time_s[70 + i]);
    for (std::size_t i = 0; i < 15; ++i) REQUIRE(split.test.time_s[i] == ds.time_s[85 + i]);
}

TEST_CASE("split_dataset: disjoint and exhaustive for random fraction triples", "[data]") {
    std::vector<DriveCycleLog> logs{make_log("a", 63, 1), make_log("b", 41, 2)};
    const auto norm = fit_normalizer(logs);
    const auto ds = build_regressors(logs, 3, norm);
    Rng rng(55);
    for (int trial = 0; trial < 20; ++trial) {
        double f1 = rng.uniform(0.2, 0.7);
        double f2 = rng.uniform(0.1, (1.0 - f1) * 0.8);
        const SplitFractions fractions{f1, f2, 1.0 - f1 - f2};
        const auto mode = trial % 2 == 0 ? SplitMode::RandomRows : SplitMode::ContiguousBlocks;
        const auto split = split_dataset(ds, fractions, static_cast<std::uint64_t>(trial), mode);
        REQUIRE(split.train.row_count() + split.val.row_count() + split.test.row_count() ==
                ds.row_count());
        // rows are identified by (cycle, time); check multiset equality
        std::multiset<std::pair<std::uint32_t, double>> seen;
        for (const auto* part : {&split.train, &split.val, &split.test})
            for (std::size_t i = 0; i < part->row_count(); ++i)
                seen.insert({part->cycle_index[i], part->time_s[i]});
        std::multiset<std::pair<std::uint32_t, double>> expected;
        for (std::size_t i = 0; i < ds.row_count(); ++i)
            expected.insert({ds.cycle_index[i], ds.time_s[i]});
        REQUIRE(seen == expected);
    }
}

TEST_CASE("split_dataset: rejects empty partitions and bad fractions", "[data]") {
    const auto log = make_log("tiny", 7, 3);
    const auto norm = fit_normalizer(std::span(&log, 1));
    const auto ds = build_regressors(std::span(&log, 1), 4, norm); // 3 rows
    REQUIRE_THROWS_AS(split_dataset(ds, {0.98, 0.01, 0.01}, 1, SplitMode::RandomRows), EmptySplit);
    REQUIRE_THROWS_AS(split_dataset(ds, {0.5, 0.2, 0.2}, 1, SplitMode::RandomRows), InvalidArgument);
    REQUIRE_THROWS_AS(split_dataset(ds, {0.8, 0.2, -0.0}, 1, SplitMode::RandomRows),
                      InvalidArgument);
}
