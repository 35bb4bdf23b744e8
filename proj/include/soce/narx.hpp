#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "soce/data.hpp"
#include "soce/errors.hpp"
#include "soce/linalg.hpp"
#include "soce/rng.hpp"
#include "soce/text.hpp"

namespace soce {

/// Single-hidden-layer NARX network: tanh hidden units over the tapped-delay
/// regressor, linear output. Parameter vector flattening order is
/// input_weights (row-major), input_bias, output_weights, output_bias.
struct NarxModel {
    std::size_t hidden_count = 0;
    std::size_t delay_count = 0;
    std::vector<double> input_weights; // hidden_count x 4*delay_count, row-major
    std::vector<double> input_bias;    // hidden_count
    std::vector<double> output_weights; // hidden_count
    double output_bias = 0.0;
    Normalizer normalizer;

    std::size_t feature_count() const { return 4 * delay_count; }
    std::size_t parameter_count() const {
        return hidden_count * feature_count() + 2 * hidden_count + 1;
    }
};

/// Seeded initialization: input weights uniform in [-1/sqrt(4d), +1/sqrt(4d)],
/// biases in [-0.1, 0.1]. Draw order matches the parameter flattening order.
inline NarxModel init_model(std::size_t hidden_count, std::size_t delay_count, std::uint64_t seed,
                            Normalizer normalizer) {
    if (hidden_count < 1 || delay_count < 1)
        throw InvalidArgument("init_model: hidden_count and delay_count must be >= 1");
    NarxModel model;
    model.hidden_count = hidden_count;
    model.delay_count = delay_count;
    model.normalizer = std::move(normalizer);

    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(model.feature_count()));
    model.input_weights.resize(hidden_count * model.feature_count());
    for (auto& w : model.input_weights) w = rng.uniform(-bound, bound);
    model.input_bias.resize(hidden_count);
    for (auto& b : model.input_bias) b = rng.uniform(-0.1, 0.1);
    model.output_weights.resize(hidden_count);
    for (auto& w : model.output_weights) w = rng.uniform(-bound, bound);
    model.output_bias = rng.uniform(-0.1, 0.1);
    return model;
}

/// Scalar forward pass over one feature row (normalized units). Both loop
/// modes funnel through this, which keeps them bit-identical on identical
/// inputs.
inline double predict_row(const NarxModel& model, std::span<const double> features) {
    const std::size_t width = model.feature_count();
    double out = model.output_bias;
    for (std::size_t h = 0; h < model.hidden_count; ++h) {
        const double* weights = &model.input_weights[h * width];
        double pre = model.input_bias[h];
        for (std::size_t j = 0; j < width; ++j) pre += weights[j] * features[j];
        out += model.output_weights[h] * std::tanh(pre);
    }
    return out;
}

/// Series-parallel (open-loop) pass: measured SOC lags are already in the
/// regressor rows; rows are independent.
inline std::vector<double> forward_open_loop(const NarxModel& model, const RegressorDataset& ds) {
    if (ds.delay_count != model.delay_count)
        throw DelayMismatch("forward_open_loop: dataset delay count " +
                            std::to_string(ds.delay_count) + " != model delay count " +
                            std::to_string(model.delay_count));
    std::vector<double> predictions(ds.row_count());
    for (std::size_t i = 0; i < ds.row_count(); ++i) predictions[i] = predict_row(model, ds.row(i));
    return predictions;
}

/// Normalized exogenous (V, I, T) series for closed-loop rollout.
struct ExogSeries {
    std::vector<double> voltage;
    std::vector<double> current;
    std::vector<double> temperature;

    std::size_t size() const { return voltage.size(); }

    static ExogSeries from_log(const DriveCycleLog& log, const Normalizer& norm) {
        ExogSeries series;
        series.voltage.reserve(log.size());
        series.current.reserve(log.size());
        series.temperature.reserve(log.size());
        for (const auto& s : log.samples) {
            series.voltage.push_back(norm.normalize(Channel::Voltage, s.voltage_v));
            series.current.push_back(norm.normalize(Channel::Current, s.current_a));
            series.temperature.push_back(norm.normalize(Channel::Temperature, s.temperature_c));
        }
        return series;
    }
};

/// Parallel (closed-loop) rollout: the SOC delay taps hold the model's own
/// previous outputs, seeded with `soc_seed` (normalized SOC at samples
/// 0..d-1, chronological). Returns predictions for samples d..N-1. When
/// `teacher_soc` is non-empty (length N) it feeds the taps instead, which
/// reproduces the open-loop pass exactly. `clamp_feedback` optionally clamps
/// fed-back values to [-1, 1]; off keeps the plain definition.
inline std::vector<double> forward_closed_loop(const NarxModel& model, const ExogSeries& exog,
                                               std::span<const double> soc_seed,
                                               std::span<const double> teacher_soc = {},
                                               bool clamp_feedback = false) {
    const std::size_t n = exog.size();
    const std::size_t d = model.delay_count;
    if (exog.current.size() != n || exog.temperature.size() != n)
        throw LengthMismatch("forward_closed_loop: exogenous series lengths differ");
    if (n <= d) throw InsufficientHistory("forward_closed_loop: series length must exceed delay count");
    if (soc_seed.size() != d)
        throw SeedLengthMismatch("forward_closed_loop: seed length " + std::to_string(soc_seed.size()) +
                                 " != delay count " + std::to_string(d));
    if (!teacher_soc.empty() && teacher_soc.size() != n)
        throw LengthMismatch("forward_closed_loop: teacher series length != exogenous length");

    std::vector<double> feedback(n, 0.0); // normalized SOC per sample index
    for (std::size_t i = 0; i < d; ++i) feedback[i] = teacher_soc.empty() ? soc_seed[i] : teacher_soc[i];

    std::vector<double> predictions;
    predictions.reserve(n - d);
    std::vector<double> features(model.feature_count());
    for (std::size_t t = d; t < n; ++t) {
        std::size_t j = 0;
        for (std::size_t lag = 1; lag <= d; ++lag) features[j++] = exog.voltage[t - lag];
        for (std::size_t lag = 1; lag <= d; ++lag) features[j++] = exog.current[t - lag];
        for (std::size_t lag = 1; lag <= d; ++lag) features[j++] = exog.temperature[t - lag];
        for (std::size_t lag = 1; lag <= d; ++lag) features[j++] = feedback[t - lag];
        const double prediction = predict_row(model, features);
        predictions.push_back(prediction);
        if (teacher_soc.empty()) {
            double fed = prediction;
            if (clamp_feedback) fed = std::clamp(fed, -1.0, 1.0);
            feedback[t] = fed;
        } else {
            feedback[t] = teacher_soc[t];
        }
    }
    return predictions;
}

struct JacobianResult {
    DenseMatrix jacobian; // rows x parameter_count
    std::vector<double> residuals;
};

/// Residuals r_i = prediction_i - target_i and the analytic Jacobian
/// d r_i / d theta_j in the parameter flattening order.
inline JacobianResult jacobian(const NarxModel& model, const RegressorDataset& ds) {
    if (ds.delay_count != model.delay_count)
        throw DelayMismatch("jacobian: dataset delay count != model delay count");
    if (ds.row_count() < 1) throw EmptySeries("jacobian: dataset has no rows");

    const std::size_t n = ds.row_count();
    const std::size_t width = model.feature_count();
    const std::size_t hidden = model.hidden_count;
    const std::size_t params = model.parameter_count();

    JacobianResult out{DenseMatrix(n, params), std::vector<double>(n, 0.0)};
    std::vector<double> activation(hidden);
    for (std::size_t i = 0; i < n; ++i) {
        const auto features = ds.row(i);
        double prediction = model.output_bias;
        for (std::size_t h = 0; h < hidden; ++h) {
            const double* weights = &model.input_weights[h * width];
            double pre = model.input_bias[h];
            for (std::size_t j = 0; j < width; ++j) pre += weights[j] * features[j];
            activation[h] = std::tanh(pre);
            prediction += model.output_weights[h] * activation[h];
        }
        out.residuals[i] = prediction - ds.targets[i];

        double* row = &out.jacobian.data[i * params];
        for (std::size_t h = 0; h < hidden; ++h) {
            const double gain = model.output_weights[h] * (1.0 - activation[h] * activation[h]);
            double* block = row + h * width;
            for (std::size_t j = 0; j < width; ++j) block[j] = gain * features[j];
            row[hidden * width + h] = gain;            // input bias
            row[hidden * width + hidden + h] = activation[h]; // output weight
        }
        row[params - 1] = 1.0; // output bias
    }
    return out;
}

inline std::vector<double> to_parameters(const NarxModel& model) {
    std::vector<double> theta;
    theta.reserve(model.parameter_count());
    theta.insert(theta.end(), model.input_weights.begin(), model.input_weights.end());
    theta.insert(theta.end(), model.input_bias.begin(), model.input_bias.end());
    theta.insert(theta.end(), model.output_weights.begin(), model.output_weights.end());
    theta.push_back(model.output_bias);
    return theta;
}

inline NarxModel with_parameters(const NarxModel& reference, std::span<const double> theta) {
    if (theta.size() != reference.parameter_count())
        throw DimensionMismatch("with_parameters: parameter vector length mismatch");
    NarxModel model = reference;
    std::size_t at = 0;
    for (auto& w : model.input_weights) w = theta[at++];
    for (auto& b : model.input_bias) b = theta[at++];
    for (auto& w : model.output_weights) w = theta[at++];
    model.output_bias = theta[at++];
    return model;
}

// --- model file -----------------------------------------------------------
//
// Versioned text document; numbers are written in shortest round-trip
// decimal form.

inline std::string serialize_model(const NarxModel& model) {
    std::string out;
    out += "soce-narx-model\n";
    out += "format_version 1\n";
    out += "hidden_count " + std::to_string(model.hidden_count) + '\n';
    out += "delay_count " + std::to_string(model.delay_count) + '\n';
    for (const Channel c :
         {Channel::Voltage, Channel::Current, Channel::Temperature, Channel::Soc}) {
        const auto& r = model.normalizer.range(c);
        out += std::string("channel ") + channel_name(c) + ' ' + format_double(r.min) + ' ' +
               format_double(r.max) + ' ' + (r.degenerate ? "1" : "0") + '\n';
    }
    auto emit = [&out](std::string_view name, std::span<const double> values) {
        out += name;
        out += ' ' + std::to_string(values.size());
        for (const double v : values) out += ' ' + format_double(v);
        out += '\n';
    };
    emit("input_weights", model.input_weights);
    emit("input_bias", model.input_bias);
    emit("output_weights", model.output_weights);
    const double bias[1] = {model.output_bias};
    emit("output_bias", bias);
    out += "end\n";
    return out;
}

inline NarxModel parse_model(std::string_view content) {
    std::istringstream in{std::string(content)};
    std::string token;
    auto next = [&](std::string_view expect = {}) {
        if (!(in >> token)) throw MalformedNumber("model file: unexpected end of input");
        if (!expect.empty() && token != expect)
            throw InvalidArgument("model file: expected '" + std::string(expect) + "', got '" + token +
                                  "'");
        return token;
    };
    auto next_double = [&]() { return parse_double(next(), "model file"); };
    auto next_size = [&]() { return static_cast<std::size_t>(parse_double(next(), "model file")); };

    next("soce-narx-model");
    next("format_version");
    if (next_size() != 1) throw InvalidArgument("model file: unsupported format_version");

    NarxModel model;
    next("hidden_count");
    model.hidden_count = next_size();
    next("delay_count");
    model.delay_count = next_size();
    for (const Channel c :
         {Channel::Voltage, Channel::Current, Channel::Temperature, Channel::Soc}) {
        next("channel");
        next(channel_name(c));
        auto& r = model.normalizer.range(c);
        r.min = next_double();
        r.max = next_double();
        r.degenerate = next_size() != 0;
    }
    auto read_array = [&](std::string_view name, std::size_t expected) {
        next(name);
        const std::size_t count = next_size();
        if (count != expected)
            throw DimensionMismatch("model file: " + std::string(name) + " expected " +
                                    std::to_string(expected) + " values, got " + std::to_string(count));
        std::vector<double> values(count);
        for (auto& v : values) v = next_double();
        return values;
    };
    model.input_weights = read_array("input_weights", model.hidden_count * model.feature_count());
    model.input_bias = read_array("input_bias", model.hidden_count);
    model.output_weights = read_array("output_weights", model.hidden_count);
    model.output_bias = read_array("output_bias", 1)[0];
    next("end");
    return model;
}

inline void save_model(const NarxModel& model, const std::filesystem::path& path) {
    write_file(path, serialize_model(model));
}

inline NarxModel load_model(const std::filesystem::path& path) {
    return parse_model(read_file(path));
}

} // namespace soce
