#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "soce/errors.hpp"
#include "soce/linalg.hpp"
#include "soce/narx.hpp"
#include "soce/text.hpp"

namespace soce {

/// Levenberg-Marquardt controls. Defaults follow the common nftool-style
/// trainer settings.
struct TrainConfig {
    double mu0 = 1e-3;
    double mu_inc = 10.0;
    double mu_dec = 0.1;
    double mu_max = 1e10;
    std::size_t max_epochs = 1000;
    std::size_t max_val_fail = 6;
    double grad_tol = 1e-7; // infinity norm of J^T r
    std::uint64_t seed = 1;

    void validate() const {
        if (!(mu_inc > 1.0)) throw InvalidArgument("TrainConfig: mu_inc must be > 1");
        if (!(mu_dec > 0.0 && mu_dec < 1.0)) throw InvalidArgument("TrainConfig: mu_dec must be in (0, 1)");
        if (!(mu0 > 0.0 && mu_max > mu0)) throw InvalidArgument("TrainConfig: need mu_max > mu0 > 0");
        if (max_epochs < 1) throw InvalidArgument("TrainConfig: max_epochs must be >= 1");
    }
};

enum class StopReason { MaxEpochs, MuCeiling, GradTol, ValFailures };

inline const char* stop_reason_name(StopReason r) {
    switch (r) {
        case StopReason::MaxEpochs: return "max_epochs";
        case StopReason::MuCeiling: return "mu_ceiling";
        case StopReason::GradTol: return "grad_tol";
        case StopReason::ValFailures: return "val_failures";
    }
    return "?";
}

/// One attempted step. Rejected attempts carry the candidate SSE they were
/// rejected with and no validation value.
struct EpochRecord {
    std::size_t epoch = 0;
    double train_sse = 0.0;
    double val_mse = std::numeric_limits<double>::quiet_NaN();
    double mu = 0.0;
    bool accepted = false;
};

struct TrainHistory {
    std::vector<EpochRecord> records;
    StopReason stop_reason = StopReason::MaxEpochs;
    std::size_t best_epoch = 0; // epoch whose weights were returned

    /// `epoch,train_sse,val_mse,mu,accepted`
    std::string to_csv() const {
        CsvBuilder csv;
        csv.cell("epoch").cell("train_sse").cell("val_mse").cell("mu").cell("accepted");
        csv.end_row();
        for (const auto& r : records) {
            csv.cell(r.epoch).cell(r.train_sse).cell(r.val_mse).cell(r.mu);
            csv.cell(r.accepted ? "1" : "0");
            csv.end_row();
        }
        return csv.str();
    }
};

/// Residual-vector problem consumed by the LM driver.
class LeastSquaresProblem {
public:
    virtual ~LeastSquaresProblem() = default;
    virtual std::size_t parameter_count() const = 0;
    virtual std::vector<double> residuals(std::span<const double> theta) const = 0;
    virtual JacobianResult jacobian(std::span<const double> theta) const = 0;
};

namespace detail {

inline double sum_squares(std::span<const double> values) {
    double acc = 0.0;
    for (const double v : values) acc += v * v;
    return acc;
}

inline double infinity_norm(std::span<const double> values) {
    double acc = 0.0;
    for (const double v : values) acc = std::max(acc, std::abs(v));
    return acc;
}

} // namespace detail

struct LmFitResult {
    std::vector<double> theta;
    TrainHistory history;
};

/// Classic full-batch LM loop: attempt a damped step; accept when the SSE
/// drops (then mu *= mu_dec), otherwise raise mu and retry on the same
/// linearization until acceptance or mu exceeds mu_max. An indefinite
/// normal matrix (possible only near mu = 0) counts as a rejection.
/// `val_mse`, when provided, is evaluated after each accepted epoch and
/// drives early stopping; the returned parameters are those of the best
/// validation epoch.
inline LmFitResult lm_optimize(const LeastSquaresProblem& problem, std::vector<double> theta,
                               const TrainConfig& cfg,
                               const std::function<double(std::span<const double>)>& val_mse = {}) {
    cfg.validate();
    if (theta.size() != problem.parameter_count())
        throw DimensionMismatch("lm_optimize: theta length != problem parameter count");

    LmFitResult result;
    result.theta = theta;
    result.history.stop_reason = StopReason::MaxEpochs;

    double mu = cfg.mu0;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t val_failures = 0;
    bool have_best = false;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const JacobianResult lin = problem.jacobian(theta);
        const double current_sse = detail::sum_squares(lin.residuals);
        const NormalEquations eq = assemble_normal_equations(lin.jacobian, lin.residuals);

        if (detail::infinity_norm(eq.gradient) <= cfg.grad_tol) {
            result.history.stop_reason = StopReason::GradTol;
            break;
        }

        bool accepted = false;
        while (!accepted) {
            double candidate_sse = std::numeric_limits<double>::quiet_NaN();
            std::vector<double> candidate;
            try {
                const std::vector<double> step = solve_damped_step(eq, mu);
                candidate = theta;
                for (std::size_t i = 0; i < candidate.size(); ++i) candidate[i] += step[i];
                candidate_sse = detail::sum_squares(problem.residuals(candidate));
            } catch (const NotPositiveDefinite&) {
                // fall through as a rejected attempt
            }

            if (candidate_sse < current_sse) {
                theta = std::move(candidate);
                accepted = true;
                double val = std::numeric_limits<double>::quiet_NaN();
                if (val_mse) val = val_mse(theta);
                result.history.records.push_back({epoch, candidate_sse, val, mu, true});
                mu *= cfg.mu_dec;

                if (val_mse) {
                    if (val < best_val) {
                        best_val = val;
                        result.theta = theta;
                        result.history.best_epoch = epoch;
                        have_best = true;
                        val_failures = 0;
                    } else if (++val_failures >= cfg.max_val_fail) {
                        result.history.stop_reason = StopReason::ValFailures;
                        return result;
                    }
                } else {
                    result.theta = theta;
                    result.history.best_epoch = epoch;
                    have_best = true;
                }
            } else {
                result.history.records.push_back({epoch, candidate_sse, std::numeric_limits<double>::quiet_NaN(), mu, false});
                mu = std::max(mu * cfg.mu_inc, std::numeric_limits<double>::min());
                if (mu > cfg.mu_max) {
                    result.history.stop_reason = StopReason::MuCeiling;
                    if (!have_best) result.theta = theta;
                    return result;
                }
            }
        }
    }
    if (!have_best) result.theta = theta;
    return result;
}

/// NARX open-loop training problem over a fixed regressor set.
class NarxProblem final : public LeastSquaresProblem {
public:
    NarxProblem(const NarxModel& reference, const RegressorDataset& data)
        : reference_(reference), data_(data) {}

    std::size_t parameter_count() const override { return reference_.parameter_count(); }

    std::vector<double> residuals(std::span<const double> theta) const override {
        const NarxModel model = with_parameters(reference_, theta);
        std::vector<double> r = forward_open_loop(model, data_);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] -= data_.targets[i];
        return r;
    }

    JacobianResult jacobian(std::span<const double> theta) const override {
        return soce::jacobian(with_parameters(reference_, theta), data_);
    }

private:
    const NarxModel& reference_;
    const RegressorDataset& data_;
};

struct LmStepResult {
    NarxModel candidate;
    double candidate_sse = 0.0;
    double current_sse = 0.0;
};

/// One damped step from the model's current weights; the input model is not
/// mutated.
inline LmStepResult lm_step(const NarxModel& model, const RegressorDataset& train, double mu) {
    if (mu < 0.0) throw InvalidArgument("lm_step: mu must be >= 0");
    const JacobianResult lin = jacobian(model, train);
    const std::vector<double> step = solve_damped_step(lin.jacobian, lin.residuals, mu);

    std::vector<double> theta = to_parameters(model);
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += step[i];

    LmStepResult out;
    out.current_sse = detail::sum_squares(lin.residuals);
    out.candidate = with_parameters(model, theta);
    const std::vector<double> predictions = forward_open_loop(out.candidate, train);
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double e = predictions[i] - train.targets[i];
        out.candidate_sse += e * e;
    }
    return out;
}

inline double dataset_mse(const NarxModel& model, const RegressorDataset& ds) {
    if (ds.row_count() == 0) throw EmptySeries("dataset_mse: no rows");
    const std::vector<double> predictions = forward_open_loop(model, ds);
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double e = predictions[i] - ds.targets[i];
        acc += e * e;
    }
    return acc / static_cast<double>(predictions.size());
}

struct NarxFitResult {
    NarxModel model;
    TrainHistory history;
};

/// Full LM training with validation-based early stopping. Returns the
/// weights from the epoch with the lowest validation MSE.
inline NarxFitResult lm_fit(const NarxModel& init, const RegressorDataset& train,
                            const RegressorDataset& val, const TrainConfig& cfg) {
    if (train.row_count() == 0) throw EmptySeries("lm_fit: training set is empty");
    if (val.row_count() == 0) throw EmptySeries("lm_fit: validation set is empty");

    const NarxProblem problem(init, train);
    auto val_metric = [&](std::span<const double> theta) {
        return dataset_mse(with_parameters(init, theta), val);
    };
    LmFitResult fit = lm_optimize(problem, to_parameters(init), cfg, val_metric);
    return NarxFitResult{with_parameters(init, fit.theta), std::move(fit.history)};
}

} // namespace soce
