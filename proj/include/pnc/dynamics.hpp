#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace pnc {

/// Three-level model of the pump-probe experiment: ground orbitals |1>, |2>
/// and one optically excited state |e>. Rates in MHz (1/us), populations
/// ordered (p1, p2, pe).
struct LevelSystem {
    double omega = 2000.0;         ///< optical pumping rate |1> <-> |e>
    double gamma_opt = 1e3 / 1.7;  ///< decay rate of |e>
    double beta = 0.5;             ///< fraction of |e> decay that ends in |2>
    double gamma_up = 0.0;         ///< |1> -> |2>
    double gamma_down = 0.0;       ///< |2> -> |1>

    void validate() const;

    /// Orbital relaxation time 1 / (gamma_up + gamma_down) in ns.
    double t1_ns() const;

    /// Splits 1/t1 between the two orbital rates with ratio up/down = `ratio`.
    static LevelSystem with_t1(double t1_ns, double ratio_up_down = 1.0);

    /// Rate matrix A with dp/dt = A p, in 1/us. `pump` scales omega.
    Eigen::Matrix3d generator(double pump) const;

    /// Dark-state equilibrium (pe = 0, p2/p1 = gamma_up/gamma_down). Equal
    /// populations when both orbital rates vanish.
    Eigen::Vector3d thermal_state() const;
};

/// Two square pump pulses separated by a dark delay, then a dark tail.
struct PulseSequence {
    double width_ns = 300.0;
    double delay_ns = 0.0;
    double tail_ns = 100.0; ///< repetition gap after the second pulse
    /// Relative linear change of the pump amplitude over each pulse; 0 for
    /// square pulses.
    double ramp = 0.0;
    /// Output/integration step. 0 picks 0.1 / (fastest rate).
    double step_ns = 0.0;

    void validate() const;
};

struct FluorescenceTrace {
    std::vector<double> time_ns;
    std::vector<double> signal;                    ///< gamma_opt * pe, MHz
    std::vector<std::pair<double, double>> pulses; ///< [start, end) in ns
    double noise = 0.0;                            ///< shot-noise level applied
    double max_population_error = 0.0;             ///< max |sum p - 1|
};

/// Populations after `duration_ns` with constant pump scale.
Eigen::Vector3d propagate(const LevelSystem& system, const Eigen::Vector3d& populations,
                          double duration_ns, double pump);

/// Integrates the rate equations piecewise with exact matrix exponentials,
/// starting from the thermal state. Throws InvalidParameter when an explicit
/// step exceeds 0.1 / (fastest rate) and NumericalFailure when population
/// drifts by more than 1e-9.
FluorescenceTrace simulate_sequence(const LevelSystem& system, const PulseSequence& sequence);

/// Adds Gaussian noise with standard deviation `level` x peak signal; the
/// signal is clipped at zero.
void add_shot_noise(FluorescenceTrace& trace, double level, unsigned seed);

/// Ratio of leading-edge excess fluorescence of pulse 2 to that of pulse 1,
/// each taken as the integral over the first `window_ns` minus the integral
/// over the last `window_ns` of the pulse. Pulses come from the trace record
/// or, if absent, from threshold crossings. Throws FitError when two pulses
/// cannot be found or pulse 1 shows no leading-edge excess.
double extract_peak_ratio(const FluorescenceTrace& trace, double window_ns = 10.0);

struct RecoveryPoint {
    double tau_ns = 0.0;
    double ratio = 0.0;
};

struct CurveOptions {
    PulseSequence sequence; ///< delay_ns is replaced by each tau
    double window_ns = 10.0;
    double noise = 0.0;     ///< absolute Gaussian noise on each ratio
    unsigned seed = 1;
    int threads = 0;
};

/// Peak ratio versus delay. Taus run in parallel; noise is drawn in input
/// order from one seeded stream.
std::vector<RecoveryPoint> thermalization_curve(const LevelSystem& system,
                                                const std::vector<double>& taus,
                                                const CurveOptions& options = {});

} // namespace pnc
