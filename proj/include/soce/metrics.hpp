#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <span>
#include <string>

#include "soce/errors.hpp"
#include "soce/text.hpp"

namespace soce {

enum class LoopMode { Open, Closed };

inline const char* loop_mode_name(LoopMode m) { return m == LoopMode::Open ? "open" : "closed"; }

/// Fit quality over SOC fractions. mse_pct carries the same MSE in
/// percent-SOC units (x 10^4); r2 is NaN when the actual series is constant
/// and the fit is not exact.
struct MetricsReport {
    double mse = 0.0;
    double rmse = 0.0;
    double mae = 0.0;
    double r2 = 0.0;
    double mse_pct = 0.0;
    std::size_t sample_count = 0;
    std::string model_id;
    std::string cycle_id;
    LoopMode loop_mode = LoopMode::Open;

    bool r2_defined() const { return !std::isnan(r2); }
};

inline MetricsReport compute_metrics(std::span<const double> predicted,
                                     std::span<const double> actual) {
    if (predicted.size() != actual.size())
        throw LengthMismatch("compute_metrics: series lengths differ (" +
                             std::to_string(predicted.size()) + " vs " +
                             std::to_string(actual.size()) + ")");
    if (predicted.empty()) throw EmptySeries("compute_metrics: empty series");

    const double n = static_cast<double>(predicted.size());
    double sse = 0.0, abs_sum = 0.0, actual_sum = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double e = predicted[i] - actual[i];
        sse += e * e;
        abs_sum += std::abs(e);
        actual_sum += actual[i];
    }
    const double actual_mean = actual_sum / n;
    double sst = 0.0;
    for (const double a : actual) sst += (a - actual_mean) * (a - actual_mean);

    MetricsReport report;
    report.sample_count = predicted.size();
    report.mse = sse / n;
    report.rmse = std::sqrt(report.mse);
    report.mae = abs_sum / n;
    report.mse_pct = report.mse * 1e4;
    if (sst > 0.0)
        report.r2 = 1.0 - sse / sst;
    else
        report.r2 = sse == 0.0 ? 1.0 : std::numeric_limits<double>::quiet_NaN();
    return report;
}

/// Writes `time_s,actual_soc_pct,predicted_soc_pct,error_pct` with SOC in
/// percent and error = actual - predicted.
inline void export_trace(std::span<const double> times, std::span<const double> actual,
                         std::span<const double> predicted, const std::filesystem::path& path) {
    if (times.size() != actual.size() || times.size() != predicted.size())
        throw LengthMismatch("export_trace: series lengths differ");
    CsvBuilder csv;
    csv.cell("time_s").cell("actual_soc_pct").cell("predicted_soc_pct").cell("error_pct");
    csv.end_row();
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double actual_pct = actual[i] * 100.0;
        const double predicted_pct = predicted[i] * 100.0;
        csv.cell(times[i]).cell(actual_pct).cell(predicted_pct).cell(actual_pct - predicted_pct);
        csv.end_row();
    }
    write_file(path, csv.str());
}

} // namespace soce
