#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pnc/errors.hpp"

namespace pnc {

/// Residual callback for least squares: fills r(p) and, when non-null, the
/// Jacobian dr/dp.
using ResidualFn =
    std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac)>;

struct LmOptions {
    int max_iterations = 200;
    double step_tol = 1e-10;      ///< relative parameter step
    double gradient_tol = 1e-12;  ///< infinity norm of J^T r
    double initial_damping = 1e-3; ///< times diag(J^T J)
    /// Geometric fits with a free orientation can be rank deficient at the
    /// optimum (a circle has no axis), so they skip the covariance.
    bool compute_covariance = true;
};

struct LeastSquaresResult {
    Eigen::VectorXd params;
    Eigen::VectorXd errors;     ///< sqrt(diag(covariance))
    Eigen::MatrixXd covariance; ///< (J^T J)^-1 at the optimum
    double cost = 0.0;          ///< sum of squared residuals
    int residuals = 0;
    int iterations = 0;         ///< accepted steps
};

/// Raised when the iteration budget runs out; carries the best point found.
class NonConvergence : public FitError {
public:
    NonConvergence(const std::string& what, LeastSquaresResult best)
        : FitError(what), best_(std::move(best)) {}
    const LeastSquaresResult& best() const { return best_; }

private:
    LeastSquaresResult best_;
};

/// Levenberg-Marquardt with Marquardt scaling. Damping starts at
/// `initial_damping` and moves by x10 / /10. Stops when the relative step or
/// the gradient falls below tolerance. Throws FitError when J^T J is singular
/// at the optimum and NonConvergence when out of iterations.
LeastSquaresResult least_squares(const ResidualFn& residual, const Eigen::VectorXd& init,
                                 const LmOptions& options = {});

/// y = f(x; p) with analytic gradient.
struct CurveModel {
    std::string tag;
    std::vector<std::string> parameter_names;
    /// Fills y and, when non-null, dy/dp (rows: x samples).
    std::function<void(const Eigen::VectorXd& x, const Eigen::VectorXd& p, Eigen::VectorXd& y,
                       Eigen::MatrixXd* jac)>
        evaluate;

    int num_parameters() const { return static_cast<int>(parameter_names.size()); }
    Eigen::VectorXd predict(const Eigen::VectorXd& x, const Eigen::VectorXd& p) const;
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& p) const;
};

struct CurveFit {
    std::string tag;
    Eigen::VectorXd params;
    Eigen::VectorXd errors;
    Eigen::MatrixXd covariance;
    double chi2 = 0.0; ///< weighted residual sum of squares
    int dof = 0;
    int iterations = 0;
};

/// Weighted fit of `model` to (x, y) with per-point sigma.
CurveFit fit_nonlinear(const CurveModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& sigma, const Eigen::VectorXd& init,
                       const LmOptions& options = {});

namespace models {
/// 1 - exp(-x / T1); p = (T1).
CurveModel recovery();
/// A (g/2)^2 / ((x - x0)^2 + (g/2)^2) + c; p = (x0, fwhm g, A, c).
CurveModel lorentzian();
/// I (1 - exp(-x / P)); p = (I, P).
CurveModel saturation();
/// A exp(-(x - mu)^2 / (2 s^2)); p = (A, mu, s).
CurveModel gaussian();
/// Tether edge y0 + c u^2 / (1 + |u| / s) with u = x - x0; p = (x0, y0, c, ln s).
CurveModel waist();
/// All of the above.
std::vector<CurveModel> builtin();
} // namespace models

struct RecoveryFit {
    double t1 = 0.0;
    double t1_error = 0.0;
    CurveFit fit;
};

/// One-parameter fit of 1 - exp(-tau / T1). Needs at least three points and
/// at least one ratio strictly between 0 and 1; throws FitError otherwise.
RecoveryFit fit_recovery(const Eigen::VectorXd& taus, const Eigen::VectorXd& ratios,
                         const Eigen::VectorXd& sigma);

struct LorentzianFit {
    double center = 0.0;
    double fwhm = 0.0;
    double amplitude = 0.0;
    double offset = 0.0;
    CurveFit fit;
};

LorentzianFit fit_lorentzian(const Eigen::VectorXd& freq, const Eigen::VectorXd& counts,
                             const Eigen::VectorXd& sigma);

struct SaturationFit {
    double i_max = 0.0;
    double p_sat = 0.0;
    CurveFit fit;
    /// Set when the data decrease with power by more than 3 sigma somewhere.
    std::vector<std::string> warnings;
};

SaturationFit fit_saturation(const Eigen::VectorXd& power, const Eigen::VectorXd& counts,
                             const Eigen::VectorXd& sigma);

/// Points as columns (x, y), nm.
using PointSet2D = Eigen::Matrix2Xd;

struct EllipseFit {
    Eigen::Vector2d center;
    /// Semi-axis along the rotated x direction, then the rotated y direction.
    Eigen::Vector2d semi_axes;
    /// Rotation in (-pi/4, pi/4]; 0 for a circle.
    double rotation = 0.0;
    double rms_distance = 0.0;
};

/// Direct least-squares ellipse (determinant-constrained conic) refined by
/// minimizing orthogonal distances. Needs >= 6 points that are not collinear.
EllipseFit fit_ellipse(const PointSet2D& points);

/// Algebraic conic step only, exposed for testing.
EllipseFit fit_ellipse_direct(const PointSet2D& points);

/// Points on the ellipse at parameter angles phi.
PointSet2D ellipse_points(const EllipseFit& e, const Eigen::VectorXd& phi);

struct CircleFit {
    Eigen::Vector2d center;
    double radius = 0.0;
    double rms_distance = 0.0;
};

/// Algebraic (Kasa) fit refined by geometric distance. Needs >= 3
/// non-collinear points.
CircleFit fit_circle(const PointSet2D& points);

struct TetherFit {
    double width = 0.0;  ///< vertical gap at the waist, nm
    double waist_x = 0.0;
    Eigen::Vector4d upper; ///< waist model parameters of the upper edge
    Eigen::Vector4d lower;
};

/// Fits each edge with the waist model (upper opening upward, lower opening
/// downward) and reports the gap between the two vertices. The waist
/// position is the mean of the two vertex positions. Throws FitError when an
/// edge has no interior waist.
TetherFit fit_tether_width(const PointSet2D& upper_edge, const PointSet2D& lower_edge);

/// Samples of the waist model y = +-(t/2 + c u^2 / (1 + |u| / s)) centered at x0.
PointSet2D tether_edge(double t, double c, double s, double x0, const Eigen::VectorXd& x, bool upper);

struct HistogramStats {
    double mean = 0.0;
    double sd = 0.0; ///< sample standard deviation (n - 1)
    int count = 0;
    Eigen::VectorXd bin_edges;
    Eigen::VectorXd bin_counts;
    bool degenerate = false;            ///< all samples equal: no Gaussian fit
    std::optional<CurveFit> gaussian;   ///< (A, mu, s) on bin centers
};

/// Sample mean and SD plus a Gaussian fitted to the histogram by Poisson
/// likelihood. Bins cover mean +- 4 SD. Needs >= 10 samples and >= 3 bins.
HistogramStats gaussian_histogram_stats(const std::vector<double>& values, int bins);

} // namespace pnc
