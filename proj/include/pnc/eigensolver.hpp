#pragma once

// Lowest eigenpairs of the generalized Hermitian pencil K x = lambda M x.
//
// The iterative path is a block Krylov method on the shift-inverted operator
// (K - sigma M)^-1 M with full M-orthogonalization and Rayleigh-Ritz
// extraction. A block size > 1 keeps repeated eigenvalues (band crossings
// between symmetry classes) from being dropped.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#ifdef PNC_HAVE_CHOLMOD
#include <Eigen/CholmodSupport>
#endif

#include "pnc/errors.hpp"

namespace pnc {

namespace detail {

/// Factorization of K - sigma M. Uses supernodal CHOLMOD when the shift lies
/// below the spectrum (positive definite) and it is available; otherwise a
/// simplicial LDL^T, which also handles an indefinite interior shift.
template <typename Sparse>
class ShiftedFactor {
public:
    using Scalar = typename Sparse::Scalar;
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    ShiftedFactor(const Sparse& shifted, bool definite) {
#ifdef PNC_HAVE_CHOLMOD
        if (definite) {
            // Some optimized BLAS builds reject valid real factorizations; the
            // LDL^T fallback below handles that, so CHOLMOD stays quiet.
            llt_.emplace();
            llt_->cholmod().print = 0;
            llt_->compute(shifted);
            if (llt_->info() == Eigen::Success) return;
            llt_.reset();
        }
#else
        (void)definite;
#endif
        ldlt_.emplace(shifted);
        if (ldlt_->info() != Eigen::Success) {
            throw NumericalFailure("factorization of K - sigma M failed");
        }
    }

    /// Solves for every column of `rhs`.
    template <typename Rhs>
    Rhs solve(const Rhs& rhs) const {
#ifdef PNC_HAVE_CHOLMOD
        if (llt_) return llt_->solve(rhs);
#endif
        return ldlt_->solve(rhs);
    }

private:
#ifdef PNC_HAVE_CHOLMOD
    std::optional<Eigen::CholmodSupernodalLLT<Sparse, Eigen::Lower>> llt_;
#endif
    std::optional<Eigen::SimplicialLDLT<Sparse, Eigen::Lower, Eigen::AMDOrdering<int>>> ldlt_;
};

} // namespace detail

struct EigenOptions {
    double sigma = 0.0;          ///< shift, same units as lambda
    int block_size = 4;
    int max_basis = 0;           ///< 0: min(n, 6 nev + 60)
    double tol = 1e-10;          ///< relative residual on the inverted spectrum
    int dense_threshold = 6000;  ///< fall back to a dense solve at or below this size
    bool force_dense = false;
    unsigned seed = 20240501u;
};

template <typename Scalar>
struct EigenPairs {
    Eigen::VectorXd values;                                 ///< ascending
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> vectors; ///< M-orthonormal columns
    int basis_size = 0;                                     ///< 0 for the dense path
};

template <typename Scalar>
EigenPairs<Scalar> dense_generalized_eigs(const Eigen::SparseMatrix<Scalar>& stiffness,
                                          const Eigen::SparseMatrix<Scalar>& mass, int nev) {
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const Mat k = Mat(stiffness);
    const Mat m = Mat(mass);
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> solver(k, m);
    if (solver.info() != Eigen::Success) {
        throw NumericalFailure("dense generalized eigensolver failed (mass not positive definite?)");
    }
    EigenPairs<Scalar> out;
    out.values = solver.eigenvalues().head(nev);
    out.vectors = solver.eigenvectors().leftCols(nev);
    return out;
}

template <typename Scalar>
EigenPairs<Scalar> shift_invert_eigs(const Eigen::SparseMatrix<Scalar>& stiffness,
                                     const Eigen::SparseMatrix<Scalar>& mass, int nev,
                                     const EigenOptions& opt = {}) {
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using Sparse = Eigen::SparseMatrix<Scalar>;

    const int n = static_cast<int>(stiffness.rows());
    if (nev < 1 || nev > n) {
        throw InvalidParameter("requested " + std::to_string(nev) + " modes of a system of size " +
                               std::to_string(n));
    }
    if (opt.force_dense || n <= std::max(200, 3 * nev)) {
        return dense_generalized_eigs(stiffness, mass, nev);
    }

    const Sparse shifted = stiffness - Scalar(opt.sigma) * mass;
    const detail::ShiftedFactor<Sparse> factor(shifted, opt.sigma <= 0.0);

    const int b = std::max(1, opt.block_size);
    const int max_basis =
        std::min(n, opt.max_basis > 0 ? opt.max_basis : std::max(6 * nev + 60, nev + 4 * b));

    Mat basis(n, max_basis), mass_basis(n, max_basis), image(n, max_basis);
    Mat projected = Mat::Zero(max_basis, max_basis);
    int m = 0;

    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> gauss;
    auto random_vec = [&] {
        Vec v(n);
        for (int i = 0; i < n; ++i) {
            if constexpr (Eigen::NumTraits<Scalar>::IsComplex) {
                v(i) = Scalar(gauss(rng), gauss(rng));
            } else {
                v(i) = gauss(rng);
            }
        }
        return v;
    };
    auto m_norm = [&](const Vec& v) { return std::sqrt(std::abs(v.dot(mass * v))); };

    Mat next(n, b);
    for (int j = 0; j < b; ++j) next.col(j) = random_vec();

    // Block Gram-Schmidt (two passes) against the basis, then an
    // eigen-decomposition based M-orthonormalization inside the block.
    auto orthonormalize = [&](Mat& block) {
        for (int attempt = 0; attempt < 3; ++attempt) {
            for (int pass = 0; pass < 2; ++pass) {
                if (m > 0) {
                    const Mat coeff = mass_basis.leftCols(m).adjoint() * block;
                    block.noalias() -= basis.leftCols(m) * coeff;
                }
            }
            Mat gram = block.adjoint() * (mass * block);
            gram = (0.5 * (gram + gram.adjoint())).eval();
            Eigen::SelfAdjointEigenSolver<Mat> es(gram);
            const double top = es.eigenvalues().maxCoeff();
            bool deficient = false;
            Eigen::VectorXd scale(block.cols());
            for (int j = 0; j < block.cols(); ++j) {
                const double ev = es.eigenvalues()(j);
                deficient |= !(ev > 1e-20 * std::max(top, 0.0)) || !(top > 0.0);
                scale(j) = ev > 0 ? 1.0 / std::sqrt(ev) : 0.0;
            }
            if (!deficient) {
                block = (block * es.eigenvectors() * scale.asDiagonal()).eval();
                return;
            }
            for (int j = 0; j < block.cols(); ++j) block.col(j) = random_vec();
        }
        throw NumericalFailure("could not extend the Krylov basis");
    };

    int last_check = 0;
    double worst = 0.0;
    int converged = 0;
    while (m < max_basis) {
        const int added = std::min(b, max_basis - m);
        Mat block = next.leftCols(added);
        orthonormalize(block);
        // A second block pass restores orthogonality lost in the scaling.
        if (m > 0) {
            const Mat coeff = mass_basis.leftCols(m).adjoint() * block;
            block.noalias() -= basis.leftCols(m) * coeff;
        }
        basis.middleCols(m, added) = block;
        mass_basis.middleCols(m, added) = mass * block;
        image.middleCols(m, added) = factor.solve(Mat(mass_basis.middleCols(m, added)));
        const int old = m;
        m += added;
        projected.block(0, old, m, added) = mass_basis.leftCols(m).adjoint() * image.middleCols(old, added);
        projected.block(old, 0, added, old) = projected.block(0, old, old, added).adjoint();
        next = image.middleCols(old, added);

        const bool due = m >= nev + b && (m - last_check >= 4 * b || m >= max_basis);
        if (!due) continue;
        last_check = m;

        Mat h = projected.topLeftCorner(m, m);
        h = (0.5 * (h + h.adjoint())).eval();
        Eigen::SelfAdjointEigenSolver<Mat> ritz(h);
        const Eigen::VectorXd theta = ritz.eigenvalues();
        // Eigenvalues nearest the shift have the largest |theta|.
        std::vector<int> order(m);
        for (int i = 0; i < m; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int c) { return std::abs(theta(a)) > std::abs(theta(c)); });
        order.resize(nev);
        std::sort(order.begin(), order.end(), [&](int a, int c) {
            return opt.sigma + 1.0 / theta(a) < opt.sigma + 1.0 / theta(c);
        });
        Mat y(m, nev);
        for (int i = 0; i < nev; ++i) y.col(i) = ritz.eigenvectors().col(order[i]);
        const Mat x = basis.leftCols(m) * y;
        const Mat residual = image.leftCols(m) * y;
        worst = 0.0;
        converged = 0;
        for (int i = 0; i < nev; ++i) {
            const double th = theta(order[i]);
            const Vec r = residual.col(i) - Scalar(th) * x.col(i);
            const double rel = m_norm(r) / std::abs(th);
            worst = std::max(worst, rel);
            if (rel <= opt.tol) ++converged;
        }
        if (converged == nev || m == n) {
            EigenPairs<Scalar> out;
            out.basis_size = m;
            out.values.resize(nev);
            for (int i = 0; i < nev; ++i) out.values(i) = opt.sigma + 1.0 / theta(order[i]);
            out.vectors = x;
            return out;
        }
    }
    if (n <= opt.dense_threshold) {
        return dense_generalized_eigs(stiffness, mass, nev);
    }
    std::ostringstream msg;
    msg << "shift-invert eigensolver did not converge: " << converged << "/" << nev
        << " pairs within tolerance " << opt.tol << " at basis size " << m
        << ", worst relative residual " << worst;
    throw NumericalFailure(msg.str());
}

} // namespace pnc
