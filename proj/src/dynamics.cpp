#include "pnc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "pnc/errors.hpp"
#include "pnc/parallel.hpp"

namespace pnc {

void LevelSystem::validate() const {
    for (double r : {omega, gamma_opt, gamma_up, gamma_down}) {
        if (!(r >= 0.0) || !std::isfinite(r)) throw InvalidParameter("rates must be finite and >= 0");
    }
    if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidParameter("branching fraction must lie in [0, 1]");
}

double LevelSystem::t1_ns() const {
    const double sum = gamma_up + gamma_down;
    return sum > 0.0 ? 1e3 / sum : std::numeric_limits<double>::infinity();
}

LevelSystem LevelSystem::with_t1(double t1_ns, double ratio_up_down) {
    if (!(t1_ns > 0.0)) throw InvalidParameter("T1 must be positive");
    if (!(ratio_up_down >= 0.0)) throw InvalidParameter("rate ratio must be non-negative");
    LevelSystem s;
    const double total = 1e3 / t1_ns;
    s.gamma_up = total * ratio_up_down / (1.0 + ratio_up_down);
    s.gamma_down = total - s.gamma_up;
    return s;
}

Eigen::Matrix3d LevelSystem::generator(double pump) const {
    const double w = omega * pump;
    Eigen::Matrix3d a;
    // Columns are source states, rows destinations; every column sums to 0.
    a << -w - gamma_up, gamma_down, w + (1.0 - beta) * gamma_opt,
         gamma_up, -gamma_down, beta * gamma_opt,
         w, 0.0, -w - gamma_opt;
    return a;
}

Eigen::Vector3d LevelSystem::thermal_state() const {
    const double sum = gamma_up + gamma_down;
    if (sum == 0.0) return {0.5, 0.5, 0.0};
    return {gamma_down / sum, gamma_up / sum, 0.0};
}

void PulseSequence::validate() const {
    if (!(width_ns > 0.0)) throw InvalidParameter("pulse width must be positive");
    if (!(delay_ns >= 0.0)) throw InvalidParameter("pulse delay must be >= 0");
    if (!(tail_ns >= 0.0)) throw InvalidParameter("tail must be >= 0");
    if (!(step_ns >= 0.0)) throw InvalidParameter("step must be >= 0");
    if (!(ramp > -1.0)) throw InvalidParameter("ramp must keep the pump amplitude positive");
}

Eigen::Vector3d propagate(const LevelSystem& system, const Eigen::Vector3d& populations,
                          double duration_ns, double pump) {
    system.validate();
    const Eigen::Matrix3d a = system.generator(pump) * (duration_ns * 1e-3);
    return a.exp() * populations;
}

namespace {

double fastest_rate(const LevelSystem& s, double max_pump) {
    // Largest total decay rate out of any single state.
    return std::max({s.omega * max_pump + s.gamma_up, s.gamma_down, s.omega * max_pump + s.gamma_opt});
}

/// Appends samples over [t0, t0 + length) to the trace (the end point is
/// added by the next segment or the caller).
struct Integrator {
    const LevelSystem& system;
    double step;
    FluorescenceTrace& trace;
    Eigen::Vector3d p;

    void record(double t) {
        trace.time_ns.push_back(t);
        trace.signal.push_back(system.gamma_opt * std::max(p(2), 0.0));
        trace.max_population_error = std::max(trace.max_population_error, std::abs(p.sum() - 1.0));
    }

    void segment(double t0, double length, double amplitude, double ramp) {
        if (length <= 0.0) return;
        const int n = std::max(1, static_cast<int>(std::ceil(length / step - 1e-9)));
        const double h = length / n;
        Eigen::Matrix3d fixed;
        if (ramp == 0.0) fixed = (system.generator(amplitude) * (h * 1e-3)).exp();
        for (int i = 0; i < n; ++i) {
            record(t0 + i * h);
            if (ramp == 0.0) {
                p = fixed * p;
            } else {
                // Midpoint amplitude of the sub-step.
                const double pump = amplitude * (1.0 + ramp * (i + 0.5) / n);
                p = (system.generator(pump) * (h * 1e-3)).exp() * p;
            }
        }
    }
};

} // namespace

FluorescenceTrace simulate_sequence(const LevelSystem& system, const PulseSequence& sequence) {
    system.validate();
    sequence.validate();
    const double max_pump = 1.0 + std::max(sequence.ramp, 0.0);
    const double fastest = fastest_rate(system, max_pump) * 1e-3; // 1/ns
    const double limit = fastest > 0.0 ? 0.1 / fastest : sequence.width_ns;
    double step = sequence.step_ns;
    if (step == 0.0) {
        step = std::min(limit, 0.1);
    } else if (step > limit * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "time step " << step << " ns does not resolve the fastest rate (limit " << limit
            << " ns)";
        throw InvalidParameter(msg.str());
    }

    FluorescenceTrace trace;
    Integrator run{system, step, trace, system.thermal_state()};
    const double w = sequence.width_ns;
    const double second = w + sequence.delay_ns;
    trace.pulses = {{0.0, w}, {second, second + w}};
    run.segment(0.0, w, 1.0, sequence.ramp);
    run.segment(w, sequence.delay_ns, 0.0, 0.0);
    run.segment(second, w, 1.0, sequence.ramp);
    run.segment(second + w, sequence.tail_ns, 0.0, 0.0);
    run.record(second + w + sequence.tail_ns);

    if (trace.max_population_error > 1e-9) {
        std::ostringstream msg;
        msg << "population conservation violated by " << trace.max_population_error;
        throw NumericalFailure(msg.str());
    }
    return trace;
}

void add_shot_noise(FluorescenceTrace& trace, double level, unsigned seed) {
    if (!(level >= 0.0)) throw InvalidParameter("noise level must be >= 0");
    if (trace.signal.empty()) return;
    const double peak = *std::max_element(trace.signal.begin(), trace.signal.end());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, level * peak);
    for (double& s : trace.signal) s = std::max(0.0, s + gauss(rng));
    trace.noise = level;
}

namespace {

/// Integral of the piecewise-linear trace over [a, b].
double integrate(const FluorescenceTrace& trace, double a, double b) {
    const auto& t = trace.time_ns;
    const auto& s = trace.signal;
    auto value_at = [&](double x) {
        auto it = std::upper_bound(t.begin(), t.end(), x);
        if (it == t.begin()) return s.front();
        if (it == t.end()) return s.back();
        const std::size_t i = static_cast<std::size_t>(it - t.begin());
        const double f = (x - t[i - 1]) / (t[i] - t[i - 1]);
        return s[i - 1] + f * (s[i] - s[i - 1]);
    };
    double total = 0.0;
    double prev_t = a, prev_s = value_at(a);
    auto it = std::upper_bound(t.begin(), t.end(), a);
    for (; it != t.end() && *it < b; ++it) {
        const double cur_s = s[static_cast<std::size_t>(it - t.begin())];
        total += 0.5 * (prev_s + cur_s) * (*it - prev_t);
        prev_t = *it;
        prev_s = cur_s;
    }
    total += 0.5 * (prev_s + value_at(b)) * (b - prev_t);
    return total;
}

std::vector<std::pair<double, double>> detect_pulses(const FluorescenceTrace& trace) {
    std::vector<std::pair<double, double>> pulses;
    if (trace.signal.empty()) return pulses;
    const double peak = *std::max_element(trace.signal.begin(), trace.signal.end());
    if (!(peak > 0.0)) return pulses;
    const double threshold = 0.1 * peak;
    bool on = false;
    for (std::size_t i = 0; i < trace.signal.size(); ++i) {
        const bool above = trace.signal[i] > threshold;
        if (above && !on) pulses.push_back({trace.time_ns[i], trace.time_ns.back()});
        if (!above && on) pulses.back().second = trace.time_ns[i];
        on = above;
    }
    return pulses;
}

} // namespace

double extract_peak_ratio(const FluorescenceTrace& trace, double window_ns) {
    if (!(window_ns > 0.0)) throw InvalidParameter("integration window must be positive");
    if (trace.time_ns.size() != trace.signal.size() || trace.time_ns.size() < 2) {
        throw InvalidParameter("trace is empty or malformed");
    }
    const auto pulses = trace.pulses.empty() ? detect_pulses(trace) : trace.pulses;
    if (pulses.size() != 2) {
        throw FitError("expected two pump pulses in the trace, found " + std::to_string(pulses.size()));
    }
    auto excess = [&](const std::pair<double, double>& p) {
        if (p.second - p.first < 2.0 * window_ns) {
            throw FitError("pulse shorter than two integration windows");
        }
        return integrate(trace, p.first, p.first + window_ns) -
               integrate(trace, p.second - window_ns, p.second);
    };
    const double first = excess(pulses[0]);
    if (!(first > 0.0)) throw FitError("first pulse shows no leading-edge excess fluorescence");
    return excess(pulses[1]) / first;
}

std::vector<RecoveryPoint> thermalization_curve(const LevelSystem& system,
                                                const std::vector<double>& taus,
                                                const CurveOptions& options) {
    if (taus.empty()) throw InvalidParameter("delay list is empty");
    for (double tau : taus) {
        if (!(tau >= 0.0)) throw InvalidParameter("delays must be >= 0");
    }
    std::vector<RecoveryPoint> out(taus.size());
    parallel_for(static_cast<int>(taus.size()), options.threads, [&](int i) {
        PulseSequence seq = options.sequence;
        seq.delay_ns = taus[i];
        out[i] = {taus[i], extract_peak_ratio(simulate_sequence(system, seq), options.window_ns)};
    });
    if (options.noise > 0.0) {
        std::mt19937_64 rng(options.seed);
        std::normal_distribution<double> gauss(0.0, options.noise);
        for (auto& p : out) p.ratio += gauss(rng);
    }
    return out;
}

} // namespace pnc
