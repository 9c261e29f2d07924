#pragma once

// Dense complex linear algebra used throughout the synthesis pipeline:
// one-sided inverses, Hermitian eigenvalues and the real embedding that lets
// complex LMIs be posed over the real PSD cone.

#include <Eigen/Dense>

#include <algorithm>
#include <complex>
#include <limits>
#include <sstream>

#include "ddsr/error.hpp"

namespace ddsr {

using cdouble = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

/// Relative singular-value gap below which a matrix is treated as rank deficient.
inline constexpr double kDefaultRankTol = 1e-8;

/// Square complex matrix that is exactly Hermitian.
///
/// Construction symmetrizes the input as (M + M*)/2 and keeps the size of the
/// discarded skew part, so callers that expect Hermitian data (FRF products,
/// LMI blocks) can assert the asymmetry was only rounding noise.
class HermitianMatrix {
public:
    HermitianMatrix() = default;

    explicit HermitianMatrix(const ComplexMatrix& m) {
        if (m.rows() != m.cols()) {
            std::ostringstream os;
            os << "Hermitian matrix must be square, got " << m.rows() << "x" << m.cols();
            throw Error(Errc::DimensionMismatch, os.str());
        }
        if (!m.allFinite()) {
            throw Error(Errc::DimensionMismatch, "Hermitian matrix has non-finite entries");
        }
        data_ = 0.5 * (m + m.adjoint());
        asymmetry_ = (m - m.adjoint()).norm() * 0.5;
        for (Eigen::Index i = 0; i < data_.rows(); ++i) {
            data_(i, i) = cdouble(data_(i, i).real(), 0.0);
        }
    }

    static HermitianMatrix identity(Eigen::Index n) {
        return HermitianMatrix(ComplexMatrix::Identity(n, n));
    }
    static HermitianMatrix zero(Eigen::Index n) {
        return HermitianMatrix(ComplexMatrix::Zero(n, n));
    }

    [[nodiscard]] Eigen::Index dim() const noexcept { return data_.rows(); }
    [[nodiscard]] const ComplexMatrix& matrix() const noexcept { return data_; }
    /// Frobenius norm of the skew-Hermitian part removed at construction.
    [[nodiscard]] double asymmetry_residual() const noexcept { return asymmetry_; }

private:
    ComplexMatrix data_;
    double asymmetry_ = 0.0;
};

namespace detail {

inline void require_rank(const Eigen::VectorXd& sv, double rank_tol) {
    if (sv.size() == 0) {
        return;
    }
    const double smax = sv.maxCoeff();
    const double smin = sv.minCoeff();
    if (!(smax > 0.0) || !(smin > rank_tol * smax)) {
        std::ostringstream os;
        os.precision(6);
        os << "sigma_min=" << smin << " sigma_max=" << smax << " rank_tol=" << rank_tol;
        throw Error(Errc::RankDeficient, os.str());
    }
}

} // namespace detail

/// M^L = (M*M)^-1 M* for a full-column-rank M.
inline ComplexMatrix left_inverse(const ComplexMatrix& m, double rank_tol = kDefaultRankTol) {
    if (m.rows() < m.cols()) {
        std::ostringstream os;
        os << "left inverse needs rows >= cols, got " << m.rows() << "x" << m.cols();
        throw Error(Errc::RankDeficient, os.str());
    }
    Eigen::JacobiSVD<ComplexMatrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    detail::require_rank(svd.singularValues(), rank_tol);
    // V S^-1 U* equals (M*M)^-1 M* for full column rank and is better conditioned.
    const Eigen::VectorXd inv_s = svd.singularValues().cwiseInverse();
    return svd.matrixV() * inv_s.asDiagonal() * svd.matrixU().adjoint();
}

/// M^R = M*(MM*)^-1 for a full-row-rank M.
inline ComplexMatrix right_inverse(const ComplexMatrix& m, double rank_tol = kDefaultRankTol) {
    if (m.cols() < m.rows()) {
        std::ostringstream os;
        os << "right inverse needs cols >= rows, got " << m.rows() << "x" << m.cols();
        throw Error(Errc::RankDeficient, os.str());
    }
    return left_inverse(m.adjoint(), rank_tol).adjoint();
}

/// Real symmetric [[Re M, -Im M], [Im M, Re M]] of twice the dimension.
inline RealMatrix hermitian_embed(const HermitianMatrix& h) {
    const auto n = h.dim();
    const ComplexMatrix& m = h.matrix();
    RealMatrix out(2 * n, 2 * n);
    out.topLeftCorner(n, n) = m.real();
    out.topRightCorner(n, n) = -m.imag();
    out.bottomLeftCorner(n, n) = m.imag();
    out.bottomRightCorner(n, n) = m.real();
    return out;
}

/// Same map applied to an arbitrary (not necessarily Hermitian) complex matrix.
/// Linear, so it carries affine LMI coefficients straight into the real cone.
inline RealMatrix complex_embed(const ComplexMatrix& m) {
    const auto r = m.rows();
    const auto c = m.cols();
    RealMatrix out(2 * r, 2 * c);
    out.topLeftCorner(r, c) = m.real();
    out.topRightCorner(r, c) = -m.imag();
    out.bottomLeftCorner(r, c) = m.imag();
    out.bottomRightCorner(r, c) = m.real();
    return out;
}

/// Ascending eigenvalues of a Hermitian matrix.
inline Eigen::VectorXd hermitian_eigenvalues(const HermitianMatrix& h) {
    if (h.dim() == 0) {
        return {};
    }
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h.matrix(), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

inline double max_eigenvalue(const HermitianMatrix& h) {
    const Eigen::VectorXd ev = hermitian_eigenvalues(h);
    return ev.size() == 0 ? 0.0 : ev(ev.size() - 1);
}

inline double min_eigenvalue(const HermitianMatrix& h) {
    const Eigen::VectorXd ev = hermitian_eigenvalues(h);
    return ev.size() == 0 ? 0.0 : ev(0);
}

/// max(0, -lambda_min(M)); zero iff M is positive semidefinite.
inline double psd_residual(const HermitianMatrix& h) {
    return std::max(0.0, -min_eigenvalue(h));
}

/// Largest singular value.
inline double max_singular_value(const ComplexMatrix& m) {
    if (m.size() == 0) {
        return 0.0;
    }
    Eigen::JacobiSVD<ComplexMatrix> svd(m);
    return svd.singularValues()(0);
}

inline double min_singular_value(const ComplexMatrix& m) {
    if (m.size() == 0) {
        return 0.0;
    }
    Eigen::JacobiSVD<ComplexMatrix> svd(m);
    return svd.singularValues()(svd.singularValues().size() - 1);
}

/// sigma_max / sigma_min, infinite for singular input.
inline double condition_number(const ComplexMatrix& m) {
    if (m.size() == 0) {
        return 1.0;
    }
    Eigen::JacobiSVD<ComplexMatrix> svd(m);
    const auto& s = svd.singularValues();
    const double smin = s(s.size() - 1);
    return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

} // namespace ddsr
