#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "soce/baselines.hpp"
#include "soce/data.hpp"
#include "soce/errors.hpp"
#include "soce/lm.hpp"
#include "soce/metrics.hpp"
#include "soce/narx.hpp"
#include "soce/text.hpp"

namespace soce {

struct SplitConfig {
    SplitMode mode = SplitMode::RandomRows;
    SplitFractions fractions{};
};

/// Aligned (time, actual, predicted) SOC fractions for samples the model
/// can predict (indices delay_count..N-1 of the cycle).
struct EvalTrace {
    std::vector<double> time_s;
    std::vector<double> actual;
    std::vector<double> predicted;
};

inline EvalTrace evaluate_on_cycle(const NarxModel& model, const DriveCycleLog& log,
                                   LoopMode mode) {
    if (!log.has_soc())
        throw InvalidArgument("evaluate_on_cycle: cycle '" + log.cycle_id + "' has no SOC");
    if (log.size() <= model.delay_count)
        throw InsufficientHistory("cycle '" + log.cycle_id + "' too short for delay count " +
                                  std::to_string(model.delay_count));
    const Normalizer& norm = model.normalizer;
    const std::size_t d = model.delay_count;

    EvalTrace trace;
    std::vector<double> normalized;
    if (mode == LoopMode::Open) {
        const DriveCycleLog* logs = &log;
        const RegressorDataset ds = build_regressors(std::span(logs, 1), d, norm);
        normalized = forward_open_loop(model, ds);
    } else {
        const ExogSeries exog = ExogSeries::from_log(log, norm);
        std::vector<double> seed(d);
        for (std::size_t i = 0; i < d; ++i) seed[i] = norm.normalize(Channel::Soc, log.soc[i]);
        normalized = forward_closed_loop(model, exog, seed);
    }
    trace.time_s.reserve(normalized.size());
    trace.actual.reserve(normalized.size());
    trace.predicted.reserve(normalized.size());
    for (std::size_t t = d; t < log.size(); ++t) {
        trace.time_s.push_back(log.samples[t].time_s);
        trace.actual.push_back(log.soc[t]);
        trace.predicted.push_back(norm.denormalize(Channel::Soc, normalized[t - d]));
    }
    return trace;
}

// --- delay sweep ------------------------------------------------------------

struct ExperimentSpec {
    std::vector<DriveCycleLog> logs; // SOC populated
    std::vector<std::size_t> hidden_counts;
    std::vector<std::size_t> delay_counts;
    std::vector<std::uint64_t> seeds;
    SplitConfig split{};
    TrainConfig train{};

    void validate() const {
        if (hidden_counts.empty() || delay_counts.empty() || seeds.empty())
            throw InvalidArgument("ExperimentSpec: need at least one hidden count, delay and seed");
        if (logs.empty()) throw InvalidArgument("ExperimentSpec: no data");
    }
};

struct SweepCell {
    std::size_t hidden = 0;
    std::size_t delay = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double train_mse = std::numeric_limits<double>::quiet_NaN(); // fraction^2 units
    double val_mse = std::numeric_limits<double>::quiet_NaN();
    double test_mse = std::numeric_limits<double>::quiet_NaN();
    std::size_t epochs = 0;
    StopReason stop_reason = StopReason::MaxEpochs;
};

struct SweepSummaryRow {
    std::size_t hidden = 0;
    std::size_t delay = 0;
    std::size_t ok_count = 0;
    double median_train_mse = std::numeric_limits<double>::quiet_NaN();
    double median_val_mse = std::numeric_limits<double>::quiet_NaN();
    double median_test_mse = std::numeric_limits<double>::quiet_NaN();
    std::size_t rank_by_test_mse = 0; // 1 = lowest median test MSE
};

struct SweepResult {
    std::vector<SweepCell> cells;
    std::vector<SweepSummaryRow> summary;

    std::string cells_csv() const {
        CsvBuilder csv;
        csv.cell("hidden").cell("delay").cell("seed").cell("status").cell("train_mse");
        csv.cell("val_mse").cell("test_mse").cell("epochs").cell("stop_reason").end_row();
        for (const auto& c : cells) {
            csv.cell(c.hidden).cell(c.delay).cell(std::to_string(c.seed));
            csv.cell(c.ok ? "ok" : "failed");
            csv.cell(c.train_mse).cell(c.val_mse).cell(c.test_mse);
            csv.cell(c.epochs).cell(c.ok ? stop_reason_name(c.stop_reason) : c.error);
            csv.end_row();
        }
        return csv.str();
    }

    std::string summary_csv() const {
        CsvBuilder csv;
        csv.cell("hidden").cell("delay").cell("ok_count").cell("median_train_mse");
        csv.cell("median_val_mse").cell("median_test_mse").cell("rank_by_test_mse").end_row();
        for (const auto& s : summary) {
            csv.cell(s.hidden).cell(s.delay).cell(s.ok_count).cell(s.median_train_mse);
            csv.cell(s.median_val_mse).cell(s.median_test_mse).cell(s.rank_by_test_mse);
            csv.end_row();
        }
        return csv.str();
    }
};

namespace detail {

inline double median(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

/// MSE in SOC-fraction units of open-loop predictions over a dataset.
inline double fraction_mse(const NarxModel& model, const RegressorDataset& ds) {
    const std::vector<double> predictions = forward_open_loop(model, ds);
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double e = model.normalizer.denormalize(Channel::Soc, predictions[i]) -
                         model.normalizer.denormalize(Channel::Soc, ds.targets[i]);
        acc += e * e;
    }
    return acc / static_cast<double>(predictions.size());
}

} // namespace detail

/// Trains one model per (hidden, delay, seed) on the hybrid regressor set
/// built from all cycles and reports train/val/test MSE per cell. Failed
/// cells are recorded, never dropped.
inline SweepResult run_delay_sweep(const ExperimentSpec& spec) {
    spec.validate();
    SweepResult result;
    const Normalizer norm = fit_normalizer(spec.logs);

    for (const std::size_t hidden : spec.hidden_counts) {
        for (const std::size_t delay : spec.delay_counts) {
            for (const std::uint64_t seed : spec.seeds) {
                SweepCell cell;
                cell.hidden = hidden;
                cell.delay = delay;
                cell.seed = seed;
                try {
                    const RegressorDataset ds = build_regressors(spec.logs, delay, norm);
                    const SplitResult splits =
                        split_dataset(ds, spec.split.fractions, seed, spec.split.mode);
                    TrainConfig cfg = spec.train;
                    cfg.seed = seed;
                    const NarxModel init = init_model(hidden, delay, seed, norm);
                    NarxFitResult fit = lm_fit(init, splits.train, splits.val, cfg);
                    cell.ok = true;
                    cell.train_mse = detail::fraction_mse(fit.model, splits.train);
                    cell.val_mse = detail::fraction_mse(fit.model, splits.val);
                    cell.test_mse = detail::fraction_mse(fit.model, splits.test);
                    cell.epochs = fit.history.records.empty() ? 0 : fit.history.records.back().epoch;
                    cell.stop_reason = fit.history.stop_reason;
                } catch (const Error& e) {
                    cell.ok = false;
                    cell.error = e.what();
                }
                result.cells.push_back(std::move(cell));
            }
        }
    }

    for (const std::size_t hidden : spec.hidden_counts) {
        for (const std::size_t delay : spec.delay_counts) {
            SweepSummaryRow row;
            row.hidden = hidden;
            row.delay = delay;
            std::vector<double> train, val, test;
            for (const auto& c : result.cells) {
                if (c.hidden != hidden || c.delay != delay || !c.ok) continue;
                ++row.ok_count;
                train.push_back(c.train_mse);
                val.push_back(c.val_mse);
                test.push_back(c.test_mse);
            }
            row.median_train_mse = detail::median(std::move(train));
            row.median_val_mse = detail::median(std::move(val));
            row.median_test_mse = detail::median(std::move(test));
            result.summary.push_back(row);
        }
    }
    // rank rows by median test MSE (NaNs last)
    std::vector<std::size_t> order(result.summary.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double x = result.summary[a].median_test_mse;
        const double y = result.summary[b].median_test_mse;
        if (std::isnan(x)) return false;
        if (std::isnan(y)) return true;
        return x < y;
    });
    for (std::size_t rank = 0; rank < order.size(); ++rank)
        result.summary[order[rank]].rank_by_test_mse = rank + 1;
    return result;
}

// --- per-cycle evaluation ----------------------------------------------------

struct CycleEvalRow {
    std::string model_id;
    std::string cycle_id;
    bool ok = false;
    std::string error;
    MetricsReport metrics;
};

struct CycleEvalRatio {
    std::string cycle_id;
    std::string model_a;
    std::string model_b;
    double mse_ratio = std::numeric_limits<double>::quiet_NaN(); // mse(a) / mse(b)
};

struct CycleEvalResult {
    std::vector<CycleEvalRow> rows;
    std::vector<CycleEvalRatio> ratios;

    std::string rows_csv() const {
        CsvBuilder csv;
        csv.cell("model_id").cell("cycle_id").cell("mode").cell("status").cell("sample_count");
        csv.cell("mse").cell("rmse").cell("mae").cell("r2").cell("mse_pct").end_row();
        for (const auto& r : rows) {
            csv.cell(r.model_id).cell(r.cycle_id).cell(loop_mode_name(r.metrics.loop_mode));
            csv.cell(r.ok ? "ok" : r.error).cell(r.metrics.sample_count);
            csv.cell(r.metrics.mse).cell(r.metrics.rmse).cell(r.metrics.mae).cell(r.metrics.r2);
            csv.cell(r.metrics.mse_pct);
            csv.end_row();
        }
        return csv.str();
    }

    std::string ratios_csv() const {
        CsvBuilder csv;
        csv.cell("cycle_id").cell("model_a").cell("model_b").cell("mse_ratio").end_row();
        for (const auto& r : ratios) {
            csv.cell(r.cycle_id).cell(r.model_a).cell(r.model_b).cell(r.mse_ratio);
            csv.end_row();
        }
        return csv.str();
    }
};

/// Evaluates every model on every cycle in the requested loop mode, plus
/// pairwise MSE ratios between models on each cycle.
inline CycleEvalResult run_drive_cycle_eval(std::span<const NarxModel> models,
                                            std::span<const std::string> model_ids,
                                            std::span<const DriveCycleLog> cycles, LoopMode mode) {
    if (models.size() != model_ids.size())
        throw LengthMismatch("run_drive_cycle_eval: model/id counts differ");
    CycleEvalResult result;
    for (std::size_t m = 0; m < models.size(); ++m) {
        for (const auto& cycle : cycles) {
            CycleEvalRow row;
            row.model_id = model_ids[m];
            row.cycle_id = cycle.cycle_id;
            try {
                const EvalTrace trace = evaluate_on_cycle(models[m], cycle, mode);
                row.metrics = compute_metrics(trace.predicted, trace.actual);
                row.metrics.model_id = row.model_id;
                row.metrics.cycle_id = row.cycle_id;
                row.metrics.loop_mode = mode;
                row.ok = true;
            } catch (const Error& e) {
                row.ok = false;
                row.error = e.what();
                row.metrics.loop_mode = mode;
            }
            result.rows.push_back(std::move(row));
        }
    }
    for (const auto& cycle : cycles) {
        for (std::size_t a = 0; a < models.size(); ++a) {
            for (std::size_t b = a + 1; b < models.size(); ++b) {
                const CycleEvalRow* row_a = nullptr;
                const CycleEvalRow* row_b = nullptr;
                for (const auto& r : result.rows) {
                    if (r.cycle_id != cycle.cycle_id) continue;
                    if (r.model_id == model_ids[a]) row_a = &r;
                    if (r.model_id == model_ids[b]) row_b = &r;
                }
                CycleEvalRatio ratio;
                ratio.cycle_id = cycle.cycle_id;
                ratio.model_a = model_ids[a];
                ratio.model_b = model_ids[b];
                if (row_a && row_b && row_a->ok && row_b->ok && row_b->metrics.mse > 0.0)
                    ratio.mse_ratio = row_a->metrics.mse / row_b->metrics.mse;
                result.ratios.push_back(std::move(ratio));
            }
        }
    }
    return result;
}

// --- baseline comparison ------------------------------------------------------

enum class BaselineMethod { FineTree, GprExponential, GprMatern52, GprRationalQuadratic };

inline const char* baseline_method_name(BaselineMethod m) {
    switch (m) {
        case BaselineMethod::FineTree: return "fine-tree";
        case BaselineMethod::GprExponential: return "gpr-exp";
        case BaselineMethod::GprMatern52: return "gpr-matern52";
        case BaselineMethod::GprRationalQuadratic: return "gpr-rq";
    }
    return "?";
}

struct BaselineCompareConfig {
    std::vector<BaselineMethod> methods{BaselineMethod::FineTree, BaselineMethod::GprExponential,
                                        BaselineMethod::GprMatern52,
                                        BaselineMethod::GprRationalQuadratic};
    GprFitConfig gpr{};
    std::size_t tree_min_leaf = 4;
};

struct CompareRow {
    std::string model;
    bool ok = false;
    std::string error;
    MetricsReport metrics;
};

struct CompareResult {
    std::vector<CompareRow> rows;

    /// Table shaped like the statistical-methods comparison: RMSE, R2 and
    /// MSE in both fraction and percent units.
    std::string to_csv() const {
        CsvBuilder csv;
        csv.cell("model").cell("status").cell("sample_count").cell("rmse").cell("r2").cell("mse");
        csv.cell("rmse_pct").cell("mse_pct").end_row();
        for (const auto& r : rows) {
            csv.cell(r.model).cell(r.ok ? "ok" : r.error).cell(r.metrics.sample_count);
            csv.cell(r.metrics.rmse).cell(r.metrics.r2).cell(r.metrics.mse);
            csv.cell(r.metrics.rmse * 100.0).cell(r.metrics.mse_pct);
            csv.end_row();
        }
        return csv.str();
    }
};

/// Fits the statistical baselines on instantaneous (V, I, T) -> SOC over the
/// training cycles and evaluates them and any supplied NARX models on the
/// same test rows. Test rows start at the largest NARX delay count so every
/// method is scored on an identical sample set.
inline CompareResult run_baseline_compare(std::span<const DriveCycleLog> train_cycles,
                                          std::span<const DriveCycleLog> test_cycles,
                                          const BaselineCompareConfig& cfg,
                                          std::span<const NarxModel> narx_models = {},
                                          std::span<const std::string> narx_ids = {}) {
    if (cfg.methods.empty()) throw InvalidArgument("run_baseline_compare: no methods requested");
    if (narx_models.size() != narx_ids.size())
        throw LengthMismatch("run_baseline_compare: model/id counts differ");
    if (train_cycles.empty() || test_cycles.empty())
        throw EmptySeries("run_baseline_compare: need train and test cycles");

    std::size_t offset = 0;
    for (const auto& m : narx_models) offset = std::max(offset, m.delay_count);

    std::size_t train_rows = 0;
    for (const auto& log : train_cycles) {
        if (!log.has_soc())
            throw InvalidArgument("run_baseline_compare: cycle '" + log.cycle_id + "' has no SOC");
        train_rows += log.size();
    }
    DenseMatrix x_train(train_rows, 3);
    std::vector<double> y_train(train_rows);
    std::size_t at = 0;
    for (const auto& log : train_cycles) {
        for (std::size_t i = 0; i < log.size(); ++i, ++at) {
            x_train(at, 0) = log.samples[i].voltage_v;
            x_train(at, 1) = log.samples[i].current_a;
            x_train(at, 2) = log.samples[i].temperature_c;
            y_train[at] = log.soc[i];
        }
    }

    std::size_t test_rows = 0;
    for (const auto& log : test_cycles) {
        if (!log.has_soc())
            throw InvalidArgument("run_baseline_compare: cycle '" + log.cycle_id + "' has no SOC");
        if (log.size() <= offset)
            throw InsufficientHistory("test cycle '" + log.cycle_id + "' shorter than NARX delay");
        test_rows += log.size() - offset;
    }
    DenseMatrix x_test(test_rows, 3);
    std::vector<double> y_test(test_rows);
    at = 0;
    for (const auto& log : test_cycles) {
        for (std::size_t i = offset; i < log.size(); ++i, ++at) {
            x_test(at, 0) = log.samples[i].voltage_v;
            x_test(at, 1) = log.samples[i].current_a;
            x_test(at, 2) = log.samples[i].temperature_c;
            y_test[at] = log.soc[i];
        }
    }

    CompareResult result;
    auto push_row = [&](const std::string& name, const std::vector<double>& predictions) {
        CompareRow row;
        row.model = name;
        row.metrics = compute_metrics(predictions, y_test);
        row.metrics.model_id = name;
        row.ok = true;
        result.rows.push_back(std::move(row));
    };

    for (const BaselineMethod method : cfg.methods) {
        const std::string name = baseline_method_name(method);
        try {
            std::vector<double> predictions;
            if (method == BaselineMethod::FineTree) {
                const TreeModel tree = tree_fit(x_train, y_train, cfg.tree_min_leaf);
                predictions.reserve(test_rows);
                for (std::size_t i = 0; i < test_rows; ++i)
                    predictions.push_back(tree_predict(tree, x_test.row(i)));
            } else {
                KernelKind kind = KernelKind::Exponential;
                if (method == BaselineMethod::GprMatern52) kind = KernelKind::Matern52;
                if (method == BaselineMethod::GprRationalQuadratic)
                    kind = KernelKind::RationalQuadratic;
                const GprModel gpr = gpr_fit(x_train, y_train, kind, cfg.gpr);
                predictions = gpr_predict(gpr, x_test);
            }
            push_row(name, predictions);
        } catch (const Error& e) {
            CompareRow row;
            row.model = name;
            row.ok = false;
            row.error = e.what();
            result.rows.push_back(std::move(row));
        }
    }

    for (std::size_t m = 0; m < narx_models.size(); ++m) {
        CompareRow row;
        row.model = narx_ids[m];
        try {
            std::vector<double> predicted;
            std::vector<double> actual;
            predicted.reserve(test_rows);
            for (const auto& log : test_cycles) {
                const EvalTrace trace = evaluate_on_cycle(narx_models[m], log, LoopMode::Open);
                const std::size_t skip = offset - narx_models[m].delay_count;
                for (std::size_t i = skip; i < trace.predicted.size(); ++i) {
                    predicted.push_back(trace.predicted[i]);
                    actual.push_back(trace.actual[i]);
                }
            }
            row.metrics = compute_metrics(predicted, actual);
            row.metrics.model_id = row.model;
            row.ok = true;
        } catch (const Error& e) {
            row.ok = false;
            row.error = e.what();
        }
        result.rows.push_back(std::move(row));
    }
    return result;
}

} // namespace soce
