#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "soce/data.hpp"
#include "soce/errors.hpp"
#include "soce/rng.hpp"

namespace soce {

/// First-order Thevenin cell: OCV source, series resistance r0, one RC
/// polarization pair (r1, c1), and a first-order thermal model. Defaults
/// are plausible 18650-class constants; capacity and voltage limits match
/// a 2.9 Ah / 2.5-4.2 V cell.
struct CellParams {
    double capacity_ah = 2.9;
    double r0 = 0.03;  // ohm
    double r1 = 0.015; // ohm
    double c1 = 2000.0; // farad (tau = 30 s)
    std::vector<double> ocv_coeffs{3.2, 0.7, 0.3}; // OCV(s) = sum c_k s^k
    double v_min = 2.5;
    double v_max = 4.2;
    double thermal_resistance = 5.0; // K/W
    double thermal_tau = 300.0;      // s
    double ambient_c = 25.0;

    void validate() const {
        if (!(capacity_ah > 0.0)) throw InvalidArgument("CellParams: capacity must be > 0");
        if (r0 < 0.0 || r1 < 0.0) throw InvalidArgument("CellParams: resistances must be >= 0");
        if (!(c1 > 0.0)) throw InvalidArgument("CellParams: c1 must be > 0");
        if (!(v_min < v_max)) throw InvalidArgument("CellParams: v_min must be < v_max");
    }
};

struct CellState {
    double soc = 1.0;
    double v1 = 0.0; // RC branch voltage, discharge positive
    double temperature_c = 25.0;
};

/// Sensor noise magnitudes; SOC ground truth is always logged noiseless.
struct NoiseSpec {
    double current_sigma_a = 0.025;
    double voltage_sigma_v = 0.01;
    double temperature_sigma_c = 0.1;
    std::uint64_t seed = 0;
};

/// Open-circuit voltage at a given SOC.
inline double ocv(const CellParams& params, double soc) {
    double value = 0.0;
    for (std::size_t k = params.ocv_coeffs.size(); k-- > 0;)
        value = value * soc + params.ocv_coeffs[k];
    return value;
}

namespace detail {

inline double rc_update(const CellParams& p, double v1, double current_a, double dt_s) {
    const double tau = p.r1 * p.c1;
    if (!(tau > 0.0)) return 0.0; // r1 = 0 collapses the branch
    const double decay = std::exp(-dt_s / tau);
    return v1 * decay + current_a * p.r1 * (1.0 - decay);
}

inline double thermal_update(const CellParams& p, double temperature_c, double current_a,
                             double dt_s) {
    const double target =
        p.ambient_c + p.thermal_resistance * current_a * current_a * (p.r0 + p.r1);
    const double blend = 1.0 - std::exp(-dt_s / p.thermal_tau);
    return temperature_c + (target - temperature_c) * blend;
}

} // namespace detail

struct StepResult {
    CellState state;
    double terminal_voltage_v = 0.0;
    bool soc_clamped = false;
};

/// Advances the cell by dt under a constant current (discharge positive).
inline StepResult step_cell(const CellParams& params, const CellState& state, double current_a,
                            double dt_s) {
    if (!(dt_s > 0.0)) throw InvalidArgument("step_cell: dt must be > 0");
    StepResult out;
    double soc = state.soc - current_a * dt_s / (3600.0 * params.capacity_ah);
    if (soc < 0.0 || soc > 1.0) {
        out.soc_clamped = true;
        soc = soc < 0.0 ? 0.0 : 1.0;
    }
    out.state.soc = soc;
    out.state.v1 = detail::rc_update(params, state.v1, current_a, dt_s);
    out.state.temperature_c = detail::thermal_update(params, state.temperature_c, current_a, dt_s);
    out.terminal_voltage_v = ocv(params, soc) - current_a * params.r0 - out.state.v1;
    return out;
}

enum class ProfileStyle { Urban, Highway, Aggressive };

inline const char* profile_style_name(ProfileStyle s) {
    switch (s) {
        case ProfileStyle::Urban: return "urban";
        case ProfileStyle::Highway: return "highway";
        case ProfileStyle::Aggressive: return "aggressive";
    }
    return "?";
}

/// Piecewise-constant 1 Hz current profile. Segment durations are 1-20 s;
/// amplitudes follow the style: urban mean 1 A with 30% regen segments in
/// [-1.5, 0), highway mean 2 A with 5% regen, aggressive mean ~2.5 A with
/// peaks to 8.7 A (3C) and 15% regen. Deterministic in (style, duration,
/// seed).
inline std::vector<double> generate_profile(ProfileStyle style, std::size_t duration_s,
                                            std::uint64_t seed) {
    if (duration_s < 10) throw InvalidArgument("generate_profile: duration must be >= 10 s");
    Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(style) + 1)));
    std::vector<double> current;
    current.reserve(duration_s);
    while (current.size() < duration_s) {
        const std::size_t segment = 1 + static_cast<std::size_t>(rng.below(20));
        const double kind = rng.uniform01();
        double amplitude = 0.0;
        switch (style) {
            case ProfileStyle::Urban:
                amplitude = kind < 0.30 ? rng.uniform(-1.5, 0.0) : rng.uniform(0.0, 2.0);
                break;
            case ProfileStyle::Highway:
                amplitude = kind < 0.05 ? rng.uniform(-1.5, 0.0) : rng.uniform(1.0, 3.0);
                break;
            case ProfileStyle::Aggressive:
                if (kind < 0.15)
                    amplitude = rng.uniform(-2.5, 0.0);
                else if (kind < 0.275) // occasional 3C bursts
                    amplitude = rng.uniform(5.9, 8.7);
                else
                    amplitude = rng.uniform(0.3, 3.1);
                break;
        }
        for (std::size_t i = 0; i < segment && current.size() < duration_s; ++i)
            current.push_back(amplitude);
    }
    return current;
}

/// Steps the cell over a 1 Hz current profile and logs noisy (V, I, T) with
/// noiseless ground-truth SOC. Charge is integrated trapezoidally with a
/// compensated accumulator, so coulomb counting the noiseless current
/// reproduces the logged SOC. Stops early when terminal voltage drops below
/// v_min or the cell empties.
inline DriveCycleLog simulate_cycle(const CellParams& params, std::span<const double> profile,
                                    const NoiseSpec& noise, double soc0, std::string cycle_id) {
    params.validate();
    if (!(soc0 > 0.0 && soc0 <= 1.0)) throw InvalidArgument("simulate_cycle: soc0 must be in (0, 1]");
    if (profile.size() < 2) throw InvalidArgument("simulate_cycle: profile needs at least 2 samples");

    Rng rng(noise.seed);
    DriveCycleLog log;
    log.cycle_id = std::move(cycle_id);
    log.samples.reserve(profile.size());
    log.soc.reserve(profile.size());

    detail::KahanSum charge_as;
    double soc = soc0;
    double v1 = 0.0;
    double temperature = params.ambient_c;

    for (std::size_t k = 0; k < profile.size(); ++k) {
        const double current = profile[k];
        if (k > 0) {
            charge_as.add(0.5 * (profile[k - 1] + current)); // dt = 1 s
            soc = soc0 - charge_as.sum / (3600.0 * params.capacity_ah);
            if (soc < 0.0) {
                soc = 0.0;
                ++log.clamp_events;
            } else if (soc > 1.0) {
                soc = 1.0;
                ++log.clamp_events;
            }
            v1 = detail::rc_update(params, v1, current, 1.0);
            temperature = detail::thermal_update(params, temperature, current, 1.0);
        }
        const double terminal_v = ocv(params, soc) - current * params.r0 - v1;

        CycleSample sample;
        sample.time_s = static_cast<double>(k);
        sample.voltage_v = terminal_v + noise.voltage_sigma_v * rng.normal();
        sample.current_a = current + noise.current_sigma_a * rng.normal();
        sample.temperature_c = temperature + noise.temperature_sigma_c * rng.normal();
        log.samples.push_back(sample);
        log.soc.push_back(soc);

        if (soc <= 0.0 || terminal_v < params.v_min) break;
    }
    return log;
}

} // namespace soce
