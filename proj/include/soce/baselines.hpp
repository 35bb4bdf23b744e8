#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "soce/errors.hpp"
#include "soce/linalg.hpp"
#include "soce/rng.hpp"

namespace soce {

enum class KernelKind { Exponential, Matern52, RationalQuadratic };

inline const char* kernel_name(KernelKind k) {
    switch (k) {
        case KernelKind::Exponential: return "exponential";
        case KernelKind::Matern52: return "matern52";
        case KernelKind::RationalQuadratic: return "rational-quadratic";
    }
    return "?";
}

/// Stationary covariance as a function of Euclidean distance r >= 0.
inline double kernel_eval(KernelKind kind, double length_scale, double signal_variance,
                          double rq_alpha, double distance) {
    if (distance < 0.0) throw InvalidArgument("kernel_eval: distance must be >= 0");
    const double scaled = distance / length_scale;
    switch (kind) {
        case KernelKind::Exponential:
            return signal_variance * std::exp(-scaled);
        case KernelKind::Matern52: {
            const double root5 = std::sqrt(5.0) * scaled;
            return signal_variance * (1.0 + root5 + 5.0 * scaled * scaled / 3.0) * std::exp(-root5);
        }
        case KernelKind::RationalQuadratic:
            return signal_variance *
                   std::pow(1.0 + scaled * scaled / (2.0 * rq_alpha), -rq_alpha);
    }
    throw InvalidArgument("kernel_eval: unknown kernel kind");
}

struct GprFitConfig {
    std::vector<double> length_scales{0.3, 1.0, 3.0, 10.0};
    std::vector<double> signal_variances{0.25, 1.0, 4.0};
    std::vector<double> noise_variances{1e-4, 1e-2};
    std::vector<double> rq_alphas{0.5, 1.0, 2.0};
    double val_fraction = 0.2;
    std::uint64_t seed = 1;
    std::size_t max_train_rows = 2000; // exact GP is cubic
    std::size_t selection_rows = 800;  // grid search runs on this many rows
};

/// Exact GP regression model: standardized training inputs, centered
/// targets, dual weights (K + sigma_n^2 I)^-1 (y - mean).
struct GprModel {
    KernelKind kind = KernelKind::Exponential;
    double length_scale = 1.0;
    double signal_variance = 1.0;
    double noise_variance = 0.0;
    double rq_alpha = 1.0;
    DenseMatrix train_features; // standardized
    std::vector<double> dual_weights;
    double target_mean = 0.0;
    std::vector<double> feature_mean;
    std::vector<double> feature_scale;
};

namespace detail {

inline double standardized_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

/// Lower-triangular pairwise distances (i > j) packed row by row.
inline std::vector<double> pairwise_distances(const DenseMatrix& x) {
    const std::size_t n = x.rows;
    std::vector<double> out(n * (n - 1) / 2);
    std::size_t at = 0;
    for (std::size_t i = 1; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) out[at++] = standardized_distance(x.row(i), x.row(j));
    return out;
}

/// Factors K + sigma_n^2 I + jitter I, escalating jitter 1e-10 -> 1e-6.
inline DenseMatrix gram_cholesky(const std::vector<double>& distances, std::size_t n,
                                 KernelKind kind, double ell, double sf2, double alpha,
                                 double noise_var) {
    for (double jitter = 1e-10; jitter <= 1.0000001e-6; jitter *= 10.0) {
        DenseMatrix k(n, n);
        std::size_t at = 0;
        for (std::size_t i = 0; i < n; ++i) {
            k(i, i) = sf2 + noise_var + jitter;
            for (std::size_t j = 0; j < i; ++j, ++at) {
                const double v = kernel_eval(kind, ell, sf2, alpha, distances[at]);
                k(i, j) = v;
            }
        }
        // only the lower triangle is filled; the factorization reads it
        try {
            soce::detail::cholesky_factor(k);
            return k;
        } catch (const NotPositiveDefinite&) {
            at = 0; // retry with larger jitter
        }
    }
    throw NotPositiveDefinite("gpr: kernel matrix not positive definite after jitter escalation");
}

} // namespace detail

/// Fits an exact GP on up to max_train_rows (seeded uniform subsample).
/// Hyperparameters are chosen from the config grids by held-out validation
/// MSE, then the model is refit on all retained rows.
inline GprModel gpr_fit(const DenseMatrix& features, std::span<const double> targets,
                        KernelKind kind, const GprFitConfig& cfg) {
    if (features.rows == 0) throw EmptySeries("gpr_fit: no training rows");
    if (targets.size() != features.rows)
        throw DimensionMismatch("gpr_fit: target length != feature rows");

    Rng rng(cfg.seed);
    std::vector<std::size_t> keep = rng.sample_indices(features.rows, cfg.max_train_rows);
    std::sort(keep.begin(), keep.end());

    const std::size_t n = keep.size();
    const std::size_t dim = features.cols;
    GprModel model;
    model.kind = kind;
    model.feature_mean.assign(dim, 0.0);
    model.feature_scale.assign(dim, 1.0);

    DenseMatrix x(n, dim);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) x(i, j) = features(keep[i], j);
        y[i] = targets[keep[i]];
    }
    for (std::size_t j = 0; j < dim; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
        var /= static_cast<double>(n);
        const double scale = var > 0.0 ? std::sqrt(var) : 1.0;
        model.feature_mean[j] = mean;
        model.feature_scale[j] = scale;
        for (std::size_t i = 0; i < n; ++i) x(i, j) = (x(i, j) - mean) / scale;
    }
    model.target_mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    for (auto& v : y) v -= model.target_mean;

    // hyperparameter selection on a held-out slice of a capped subsample
    const bool rq = kind == KernelKind::RationalQuadratic;
    const std::vector<double> alphas = rq ? cfg.rq_alphas : std::vector<double>{1.0};
    double best_mse = std::numeric_limits<double>::infinity();
    double best_ell = cfg.length_scales.front();
    double best_sf2 = cfg.signal_variances.front();
    double best_noise = cfg.noise_variances.front();
    double best_alpha = alphas.front();

    std::vector<std::size_t> sel = rng.sample_indices(n, std::min(cfg.selection_rows, n));
    if (sel.size() >= 2) {
        std::size_t n_val = static_cast<std::size_t>(
            std::ceil(cfg.val_fraction * static_cast<double>(sel.size())));
        n_val = std::clamp<std::size_t>(n_val, 1, sel.size() - 1);
        const std::size_t n_fit = sel.size() - n_val;

        DenseMatrix x_fit(n_fit, dim);
        std::vector<double> y_fit(n_fit);
        for (std::size_t i = 0; i < n_fit; ++i) {
            for (std::size_t j = 0; j < dim; ++j) x_fit(i, j) = x(sel[i], j);
            y_fit[i] = y[sel[i]];
        }
        const std::vector<double> dist_fit = detail::pairwise_distances(x_fit);

        std::vector<double> k_star(n_fit);
        for (const double ell : cfg.length_scales) {
            for (const double sf2 : cfg.signal_variances) {
                for (const double noise : cfg.noise_variances) {
                    for (const double alpha : alphas) {
                        double mse = std::numeric_limits<double>::infinity();
                        try {
                            const DenseMatrix chol = detail::gram_cholesky(
                                dist_fit, n_fit, kind, ell, sf2, alpha, noise);
                            const std::vector<double> dual =
                                soce::detail::cholesky_back_substitute(chol, y_fit);
                            double acc = 0.0;
                            for (std::size_t v = n_fit; v < sel.size(); ++v) {
                                const auto q = x.row(sel[v]);
                                for (std::size_t i = 0; i < n_fit; ++i)
                                    k_star[i] = kernel_eval(
                                        kind, ell, sf2, alpha,
                                        detail::standardized_distance(q, x_fit.row(i)));
                                double pred = 0.0;
                                for (std::size_t i = 0; i < n_fit; ++i) pred += k_star[i] * dual[i];
                                const double err = pred - y[sel[v]];
                                acc += err * err;
                            }
                            mse = acc / static_cast<double>(n_val);
                        } catch (const NotPositiveDefinite&) {
                            // leave this grid cell out of contention
                        }
                        if (mse < best_mse) {
                            best_mse = mse;
                            best_ell = ell;
                            best_sf2 = sf2;
                            best_noise = noise;
                            best_alpha = alpha;
                        }
                    }
                }
            }
        }
    }

    model.length_scale = best_ell;
    model.signal_variance = best_sf2;
    model.noise_variance = best_noise;
    model.rq_alpha = best_alpha;

    const std::vector<double> distances = detail::pairwise_distances(x);
    const DenseMatrix chol = detail::gram_cholesky(distances, n, kind, best_ell, best_sf2,
                                                   best_alpha, best_noise);
    model.dual_weights = soce::detail::cholesky_back_substitute(chol, y);
    model.train_features = std::move(x);
    return model;
}

/// Predictive mean per query row.
inline std::vector<double> gpr_predict(const GprModel& model, const DenseMatrix& queries) {
    if (queries.rows > 0 && queries.cols != model.feature_mean.size())
        throw DimensionMismatch("gpr_predict: query dimensionality != training dimensionality");
    const std::size_t n = model.train_features.rows;
    std::vector<double> out(queries.rows, 0.0);
    std::vector<double> q(queries.cols);
    for (std::size_t row = 0; row < queries.rows; ++row) {
        for (std::size_t j = 0; j < queries.cols; ++j)
            q[j] = (queries(row, j) - model.feature_mean[j]) / model.feature_scale[j];
        double pred = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = detail::standardized_distance(q, model.train_features.row(i));
            pred += model.dual_weights[i] * kernel_eval(model.kind, model.length_scale,
                                                        model.signal_variance, model.rq_alpha, r);
        }
        out[row] = pred + model.target_mean;
    }
    return out;
}

// --- regression tree -------------------------------------------------------

struct TreeNode {
    std::int32_t feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    double value = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
};

struct TreeModel {
    std::vector<TreeNode> nodes; // nodes[0] is the root
    std::size_t min_leaf = 1;
};

/// CART with variance-reduction splitting: exhaustive scan over features and
/// midpoint thresholds; recursion stops when a split would violate min_leaf
/// or reduce SSE by less than 1e-12. Leaves predict their target mean.
inline TreeModel tree_fit(const DenseMatrix& features, std::span<const double> targets,
                          std::size_t min_leaf) {
    if (features.rows == 0) throw EmptySeries("tree_fit: no training rows");
    if (targets.size() != features.rows)
        throw DimensionMismatch("tree_fit: target length != feature rows");
    if (min_leaf < 1) throw InvalidArgument("tree_fit: min_leaf must be >= 1");

    constexpr double kMinSseGain = 1e-12;
    TreeModel model;
    model.min_leaf = min_leaf;

    struct Work {
        std::int32_t node;
        std::vector<std::size_t> rows;
    };
    std::vector<Work> stack;
    model.nodes.emplace_back();
    {
        std::vector<std::size_t> all(features.rows);
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        stack.push_back({0, std::move(all)});
    }

    std::vector<std::pair<double, double>> sorted; // (feature value, target)
    while (!stack.empty()) {
        Work work = std::move(stack.back());
        stack.pop_back();
        const std::vector<std::size_t>& rows = work.rows;
        const std::size_t n = rows.size();

        double sum = 0.0, sum_sq = 0.0;
        for (const std::size_t r : rows) {
            sum += targets[r];
            sum_sq += targets[r] * targets[r];
        }
        const double mean = sum / static_cast<double>(n);
        const double node_sse = std::max(0.0, sum_sq - sum * sum / static_cast<double>(n));
        model.nodes[work.node].value = mean;
        if (n < 2 * min_leaf || node_sse <= kMinSseGain) continue;

        double best_gain = 0.0;
        std::int32_t best_feature = -1;
        double best_threshold = 0.0;
        for (std::size_t f = 0; f < features.cols; ++f) {
            sorted.clear();
            for (const std::size_t r : rows) sorted.emplace_back(features(r, f), targets[r]);
            std::sort(sorted.begin(), sorted.end());

            double left_sum = 0.0, left_sq = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left_sum += sorted[i].second;
                left_sq += sorted[i].second * sorted[i].second;
                const std::size_t left_n = i + 1;
                if (left_n < min_leaf || n - left_n < min_leaf) continue;
                if (!(sorted[i + 1].first > sorted[i].first)) continue; // no boundary here
                const double right_sum = sum - left_sum;
                const double right_sq = sum_sq - left_sq;
                const double left_sse =
                    std::max(0.0, left_sq - left_sum * left_sum / static_cast<double>(left_n));
                const double right_sse = std::max(
                    0.0, right_sq - right_sum * right_sum / static_cast<double>(n - left_n));
                const double gain = node_sse - left_sse - right_sse;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<std::int32_t>(f);
                    best_threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
                }
            }
        }
        if (best_feature < 0 || best_gain < kMinSseGain) continue;

        // partition with the same predicate prediction uses
        std::vector<std::size_t> left_rows, right_rows;
        for (const std::size_t r : rows) {
            if (features(r, static_cast<std::size_t>(best_feature)) <= best_threshold)
                left_rows.push_back(r);
            else
                right_rows.push_back(r);
        }
        if (left_rows.size() < min_leaf || right_rows.size() < min_leaf) continue;

        const auto left_id = static_cast<std::int32_t>(model.nodes.size());
        model.nodes.emplace_back();
        const auto right_id = static_cast<std::int32_t>(model.nodes.size());
        model.nodes.emplace_back();
        TreeNode& node = model.nodes[work.node];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = left_id;
        node.right = right_id;
        stack.push_back({right_id, std::move(right_rows)});
        stack.push_back({left_id, std::move(left_rows)});
    }
    return model;
}

inline double tree_predict(const TreeModel& model, std::span<const double> row) {
    if (model.nodes.empty()) throw EmptySeries("tree_predict: empty model");
    std::int32_t at = 0;
    while (model.nodes[static_cast<std::size_t>(at)].feature >= 0) {
        const TreeNode& node = model.nodes[static_cast<std::size_t>(at)];
        if (static_cast<std::size_t>(node.feature) >= row.size())
            throw DimensionMismatch("tree_predict: row narrower than training features");
        at = row[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return model.nodes[static_cast<std::size_t>(at)].value;
}

} // namespace soce
