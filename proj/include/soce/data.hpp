#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "soce/errors.hpp"
#include "soce/rng.hpp"
#include "soce/text.hpp"

namespace soce {

struct CycleSample {
    double time_s = 0.0;
    double voltage_v = 0.0;
    double current_a = 0.0; // discharge positive
    double temperature_c = 0.0;
};

/// One contiguous drive-cycle log. `soc` stays empty until ground truth is
/// computed or parsed; `ah` carries a measured discharged-amp-hours column
/// when the source file provides one.
struct DriveCycleLog {
    std::string cycle_id;
    std::vector<CycleSample> samples;
    std::vector<double> soc; // fraction in [0, 1]; empty or samples.size()
    std::vector<double> ah;  // amp-hours discharged; empty or samples.size()
    std::size_t clamp_events = 0;

    std::size_t size() const { return samples.size(); }
    bool has_soc() const { return soc.size() == samples.size() && !soc.empty(); }

    void validate() const {
        if (samples.size() < 2)
            throw InvalidArgument("cycle '" + cycle_id + "': needs at least 2 samples");
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const auto& s = samples[i];
            if (!std::isfinite(s.time_s) || !std::isfinite(s.voltage_v) ||
                !std::isfinite(s.current_a) || !std::isfinite(s.temperature_c))
                throw InvalidArgument("cycle '" + cycle_id + "': non-finite sample " + std::to_string(i));
            if (s.voltage_v <= 0.0 || s.voltage_v >= 10.0)
                throw InvalidArgument("cycle '" + cycle_id + "': voltage out of (0, 10) V at sample " +
                                      std::to_string(i));
            if (std::abs(s.current_a) >= 100.0)
                throw InvalidArgument("cycle '" + cycle_id + "': |current| >= 100 A at sample " +
                                      std::to_string(i));
            if (i > 0 && !(s.time_s > samples[i - 1].time_s))
                throw NonMonotonicTime("cycle '" + cycle_id + "': time not strictly increasing at sample " +
                                           std::to_string(i),
                                       i + 2);
        }
    }
};

enum class Channel { Voltage, Current, Temperature, Soc };

inline const char* channel_name(Channel c) {
    switch (c) {
        case Channel::Voltage: return "voltage";
        case Channel::Current: return "current";
        case Channel::Temperature: return "temperature";
        case Channel::Soc: return "soc";
    }
    return "?";
}

struct ChannelRange {
    double min = 0.0;
    double max = 0.0;
    bool degenerate = false; // constant channel
};

/// Per-channel affine map fitted from data: min -> -1, max -> +1.
/// Degenerate (constant) channels normalize to 0 and invert to the constant.
struct Normalizer {
    std::array<ChannelRange, 4> channels{};

    const ChannelRange& range(Channel c) const { return channels[static_cast<std::size_t>(c)]; }
    ChannelRange& range(Channel c) { return channels[static_cast<std::size_t>(c)]; }

    double normalize(Channel c, double value) const {
        const ChannelRange& r = range(c);
        if (r.degenerate) return 0.0;
        return -1.0 + 2.0 * (value - r.min) / (r.max - r.min);
    }

    double denormalize(Channel c, double value) const {
        const ChannelRange& r = range(c);
        if (r.degenerate) return r.min;
        return r.min + (value + 1.0) * 0.5 * (r.max - r.min);
    }
};

/// Tapped-delay regressor rows. Features are row-major, 4*delay_count wide:
/// [V(t-1..t-d), I(t-1..t-d), T(t-1..t-d), SOC(t-1..t-d)], all normalized;
/// targets are normalized SOC(t). Rows never span a cycle boundary, and
/// rows of one cycle are contiguous and in time order.
struct RegressorDataset {
    std::size_t delay_count = 0;
    std::vector<double> features; // row_count x 4*delay_count
    std::vector<double> targets;
    std::vector<double> time_s;
    std::vector<std::uint32_t> cycle_index; // per row, into cycle_ids
    std::vector<std::string> cycle_ids;

    std::size_t feature_count() const { return 4 * delay_count; }
    std::size_t row_count() const { return targets.size(); }

    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(features).subspan(i * feature_count(), feature_count());
    }
    const std::string& source_cycle(std::size_t i) const { return cycle_ids[cycle_index[i]]; }
};

/// Parses the drive-cycle CSV format: header with `time_s`, `voltage_v`,
/// `current_a`, `temperature_c`, optional `soc` or `ah`; extra columns
/// ignored. An `ah` column is carried through as-is and converted to SOC by
/// coulomb_count (the conversion needs capacity and initial SOC).
inline DriveCycleLog parse_cycle_csv(std::string_view content, std::string cycle_id) {
    const auto lines = split_lines(content);
    if (lines.empty()) throw EmptySeries("cycle CSV is empty");

    const auto header = split(lines[0], ',');
    auto find = [&](std::string_view name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (trim(header[i]) == name) return i;
        return std::nullopt;
    };
    auto require = [&](std::string_view name) {
        const auto idx = find(name);
        if (!idx) throw MissingColumn(std::string(name));
        return *idx;
    };
    const std::size_t time_col = require("time_s");
    const std::size_t volt_col = require("voltage_v");
    const std::size_t curr_col = require("current_a");
    const std::size_t temp_col = require("temperature_c");
    const auto soc_col = find("soc");
    const auto ah_col = find("ah");

    DriveCycleLog log;
    log.cycle_id = std::move(cycle_id);
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (trim(lines[li]).empty()) continue;
        const auto fields = split(lines[li], ',');
        const std::size_t line_no = li + 1;
        auto field = [&](std::size_t col) -> std::string_view {
            if (col >= fields.size())
                throw MalformedNumber("line " + std::to_string(line_no) + ": missing field " +
                                      std::to_string(col + 1));
            return fields[col];
        };
        const std::string context = "line " + std::to_string(line_no);
        CycleSample sample;
        sample.time_s = parse_double(field(time_col), context);
        sample.voltage_v = parse_double(field(volt_col), context);
        sample.current_a = parse_double(field(curr_col), context);
        sample.temperature_c = parse_double(field(temp_col), context);
        if (!log.samples.empty() && !(sample.time_s > log.samples.back().time_s))
            throw NonMonotonicTime("time not strictly increasing at line " + std::to_string(line_no),
                                   line_no);
        log.samples.push_back(sample);
        if (soc_col) log.soc.push_back(parse_double(field(*soc_col), context));
        if (ah_col) log.ah.push_back(parse_double(field(*ah_col), context));
    }
    log.validate();
    return log;
}

/// Emits the drive-cycle CSV format; includes the soc column when populated.
inline std::string write_cycle_csv(const DriveCycleLog& log) {
    CsvBuilder csv;
    csv.cell("time_s").cell("voltage_v").cell("current_a").cell("temperature_c");
    if (log.has_soc()) csv.cell("soc");
    csv.end_row();
    for (std::size_t i = 0; i < log.samples.size(); ++i) {
        const auto& s = log.samples[i];
        csv.cell(s.time_s).cell(s.voltage_v).cell(s.current_a).cell(s.temperature_c);
        if (log.has_soc()) csv.cell(log.soc[i]);
        csv.end_row();
    }
    return csv.str();
}

namespace detail {

/// Compensated (Kahan) accumulator; keeps long charge integrals exact enough
/// that a full 1C discharge lands on SOC 0 bit-exactly.
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double x) {
        const double y = x - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

} // namespace detail

/// Populates SOC ground truth. When the log carries a measured `ah` column
/// it takes precedence: soc = soc0 - ah/capacity. Otherwise SOC is coulomb
/// counted by trapezoidal integration of current (discharge positive).
/// Values are clamped to [0, 1]; clamp events are counted on the result.
inline DriveCycleLog coulomb_count(DriveCycleLog log, double capacity_ah, double soc0) {
    if (!(capacity_ah > 0.0)) throw InvalidArgument("coulomb_count: capacity must be > 0");
    if (!(soc0 >= 0.0 && soc0 <= 1.0)) throw InvalidArgument("coulomb_count: soc0 must be in [0, 1]");
    log.validate();

    const std::size_t n = log.samples.size();
    log.soc.assign(n, 0.0);
    log.clamp_events = 0;
    auto clamp01 = [&log](double s) {
        if (s < 0.0 || s > 1.0) {
            ++log.clamp_events;
            return s < 0.0 ? 0.0 : 1.0;
        }
        return s;
    };

    if (log.ah.size() == n) {
        for (std::size_t i = 0; i < n; ++i) log.soc[i] = clamp01(soc0 - log.ah[i] / capacity_ah);
        return log;
    }

    detail::KahanSum charge_as; // ampere-seconds discharged
    log.soc[0] = clamp01(soc0);
    for (std::size_t i = 1; i < n; ++i) {
        const double dt = log.samples[i].time_s - log.samples[i - 1].time_s;
        charge_as.add(0.5 * (log.samples[i - 1].current_a + log.samples[i].current_a) * dt);
        log.soc[i] = clamp01(soc0 - charge_as.sum / (3600.0 * capacity_ah));
    }
    return log;
}

/// Per-channel min/max over the union of all samples. Requires SOC populated.
inline Normalizer fit_normalizer(std::span<const DriveCycleLog> logs) {
    if (logs.empty()) throw EmptySeries("fit_normalizer: no logs");
    Normalizer norm;
    for (auto& r : norm.channels) {
        r.min = std::numeric_limits<double>::infinity();
        r.max = -std::numeric_limits<double>::infinity();
    }
    for (const auto& log : logs) {
        if (!log.has_soc())
            throw InvalidArgument("fit_normalizer: cycle '" + log.cycle_id + "' has no SOC");
        for (std::size_t i = 0; i < log.samples.size(); ++i) {
            const auto& s = log.samples[i];
            auto grow = [&](Channel c, double v) {
                auto& r = norm.range(c);
                r.min = std::min(r.min, v);
                r.max = std::max(r.max, v);
            };
            grow(Channel::Voltage, s.voltage_v);
            grow(Channel::Current, s.current_a);
            grow(Channel::Temperature, s.temperature_c);
            grow(Channel::Soc, log.soc[i]);
        }
    }
    for (auto& r : norm.channels) r.degenerate = !(r.max > r.min);
    return norm;
}

/// Builds the tapped-delay regressor set over one or more cycles. Rows
/// never mix samples from different cycles.
inline RegressorDataset build_regressors(std::span<const DriveCycleLog> logs,
                                         std::size_t delay_count, const Normalizer& norm) {
    if (delay_count < 1) throw InvalidArgument("build_regressors: delay count must be >= 1");
    RegressorDataset ds;
    ds.delay_count = delay_count;
    const std::size_t width = ds.feature_count();

    std::size_t total_rows = 0;
    for (const auto& log : logs) {
        if (!log.has_soc())
            throw InvalidArgument("build_regressors: cycle '" + log.cycle_id + "' has no SOC");
        if (log.size() <= delay_count)
            throw InsufficientHistory("cycle '" + log.cycle_id + "' has " + std::to_string(log.size()) +
                                      " samples; need more than " + std::to_string(delay_count));
        total_rows += log.size() - delay_count;
    }
    ds.features.reserve(total_rows * width);
    ds.targets.reserve(total_rows);
    ds.time_s.reserve(total_rows);
    ds.cycle_index.reserve(total_rows);

    for (const auto& log : logs) {
        const auto cycle = static_cast<std::uint32_t>(ds.cycle_ids.size());
        ds.cycle_ids.push_back(log.cycle_id);
        for (std::size_t t = delay_count; t < log.size(); ++t) {
            for (std::size_t lag = 1; lag <= delay_count; ++lag)
                ds.features.push_back(norm.normalize(Channel::Voltage, log.samples[t - lag].voltage_v));
            for (std::size_t lag = 1; lag <= delay_count; ++lag)
                ds.features.push_back(norm.normalize(Channel::Current, log.samples[t - lag].current_a));
            for (std::size_t lag = 1; lag <= delay_count; ++lag)
                ds.features.push_back(
                    norm.normalize(Channel::Temperature, log.samples[t - lag].temperature_c));
            for (std::size_t lag = 1; lag <= delay_count; ++lag)
                ds.features.push_back(norm.normalize(Channel::Soc, log.soc[t - lag]));
            ds.targets.push_back(norm.normalize(Channel::Soc, log.soc[t]));
            ds.time_s.push_back(log.samples[t].time_s);
            ds.cycle_index.push_back(cycle);
        }
    }
    return ds;
}

struct SplitFractions {
    double train = 0.70;
    double val = 0.15;
    double test = 0.15;
};

enum class SplitMode { RandomRows, ContiguousBlocks };

struct SplitResult {
    RegressorDataset train;
    RegressorDataset val;
    RegressorDataset test;
};

namespace detail {

inline RegressorDataset take_rows(const RegressorDataset& ds, std::span<const std::size_t> rows) {
    RegressorDataset out;
    out.delay_count = ds.delay_count;
    out.cycle_ids = ds.cycle_ids;
    const std::size_t width = ds.feature_count();
    out.features.reserve(rows.size() * width);
    out.targets.reserve(rows.size());
    out.time_s.reserve(rows.size());
    out.cycle_index.reserve(rows.size());
    for (const std::size_t r : rows) {
        const auto row = ds.row(r);
        out.features.insert(out.features.end(), row.begin(), row.end());
        out.targets.push_back(ds.targets[r]);
        out.time_s.push_back(ds.time_s[r]);
        out.cycle_index.push_back(ds.cycle_index[r]);
    }
    return out;
}

} // namespace detail

/// Partitions a dataset into train/val/test. Sizes follow floor-then-
/// remainder-to-train. Random mode is a seeded row shuffle; block mode
/// slices each cycle's rows contiguously train -> val -> test.
inline SplitResult split_dataset(const RegressorDataset& ds, SplitFractions fractions,
                                 std::uint64_t seed, SplitMode mode) {
    if (!(fractions.train > 0.0 && fractions.val > 0.0 && fractions.test > 0.0))
        throw InvalidArgument("split_dataset: fractions must be positive");
    if (std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9)
        throw InvalidArgument("split_dataset: fractions must sum to 1");

    std::vector<std::size_t> train_rows, val_rows, test_rows;
    auto slice = [&](std::span<const std::size_t> rows) {
        const std::size_t n = rows.size();
        std::size_t n_train = static_cast<std::size_t>(std::floor(fractions.train * static_cast<double>(n)));
        const std::size_t n_val = static_cast<std::size_t>(std::floor(fractions.val * static_cast<double>(n)));
        const std::size_t n_test = static_cast<std::size_t>(std::floor(fractions.test * static_cast<double>(n)));
        n_train += n - (n_train + n_val + n_test); // remainder to train
        train_rows.insert(train_rows.end(), rows.begin(), rows.begin() + n_train);
        val_rows.insert(val_rows.end(), rows.begin() + n_train, rows.begin() + n_train + n_val);
        test_rows.insert(test_rows.end(), rows.begin() + n_train + n_val, rows.end());
    };

    if (mode == SplitMode::RandomRows) {
        std::vector<std::size_t> order(ds.row_count());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng(seed);
        rng.shuffle(order);
        slice(order);
    } else {
        std::size_t begin = 0;
        while (begin < ds.row_count()) {
            std::size_t end = begin;
            while (end < ds.row_count() && ds.cycle_index[end] == ds.cycle_index[begin]) ++end;
            std::vector<std::size_t> rows(end - begin);
            for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = begin + i;
            slice(rows);
            begin = end;
        }
    }

    if (train_rows.empty() || val_rows.empty() || test_rows.empty())
        throw EmptySplit("split_dataset: a partition would receive 0 rows");
    return SplitResult{detail::take_rows(ds, train_rows), detail::take_rows(ds, val_rows),
                       detail::take_rows(ds, test_rows)};
}

} // namespace soce
