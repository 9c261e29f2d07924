#pragma once

// Structured controllers K = Y^-1 X. Y is diagonal (one scalar subcontroller
// per controller output) and X follows a sparsity/delay pattern, so every Zero
// entry of the pattern stays exactly zero in K.
//
// Each row i shares a fixed stable basis: states driven through a Jordan chain
// of (z - pole)^order, read out at the last state, so each entry is
//   d + sum_{l=1..order} b_l / (z - pole)^l
// with d and b_l the free decision variables.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ddsr/error.hpp"
#include "ddsr/grid.hpp"
#include "ddsr/hermitian.hpp"
#include "ddsr/lti.hpp"
#include "ddsr/parallel.hpp"

namespace ddsr {

enum class EntryKind { Zero, Free, Delayed };

struct PatternEntry {
    EntryKind kind = EntryKind::Zero;
    int delay = 0; // steps, >= 1 for Delayed

    friend bool operator==(const PatternEntry&, const PatternEntry&) = default;
};

/// Which controller inputs (columns) each controller output (row) may use, and
/// with how many steps of communication delay.
class SparsityPattern {
public:
    SparsityPattern() = default;
    SparsityPattern(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), entries_(rows * cols) {}

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }

    [[nodiscard]] const PatternEntry& at(std::size_t i, std::size_t j) const { return entries_.at(i * cols_ + j); }
    PatternEntry& at(std::size_t i, std::size_t j) { return entries_.at(i * cols_ + j); }

    [[nodiscard]] bool is_zero(std::size_t i, std::size_t j) const { return at(i, j).kind == EntryKind::Zero; }

    /// "0", "x" or "z^-k".
    [[nodiscard]] std::string entry_string(std::size_t i, std::size_t j) const {
        const auto& e = at(i, j);
        switch (e.kind) {
        case EntryKind::Zero: return "0";
        case EntryKind::Free: return "x";
        case EntryKind::Delayed: return "z^-" + std::to_string(e.delay);
        }
        return "0";
    }

    static PatternEntry parse_entry(const std::string& s) {
        if (s == "0") {
            return {EntryKind::Zero, 0};
        }
        if (s == "x") {
            return {EntryKind::Free, 0};
        }
        if (s.rfind("z^-", 0) == 0 && s.size() > 3) {
            std::size_t used = 0;
            int k = 0;
            try {
                k = std::stoi(s.substr(3), &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == s.size() - 3 && k >= 1) {
                return {EntryKind::Delayed, k};
            }
        }
        throw Error(Errc::Config, "bad pattern entry '" + s + "' (expected 0, x or z^-k)");
    }

    static SparsityPattern from_strings(const std::vector<std::vector<std::string>>& rows) {
        if (rows.empty()) {
            throw Error(Errc::Config, "empty pattern");
        }
        SparsityPattern p(rows.size(), rows.front().size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != p.cols()) {
                throw Error(Errc::Config, "ragged pattern rows");
            }
            for (std::size_t j = 0; j < p.cols(); ++j) {
                p.at(i, j) = parse_entry(rows[i][j]);
            }
        }
        return p;
    }

    [[nodiscard]] std::vector<std::vector<std::string>> to_strings() const {
        std::vector<std::vector<std::string>> out(rows_, std::vector<std::string>(cols_));
        for (std::size_t i = 0; i < rows_; ++i) {
            for (std::size_t j = 0; j < cols_; ++j) {
                out[i][j] = entry_string(i, j);
            }
        }
        return out;
    }

    friend bool operator==(const SparsityPattern&, const SparsityPattern&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<PatternEntry> entries_;
};

/// Directed communication edge: node `from` sends its measurement to node `to`.
struct CommEdge {
    std::size_t from = 0;
    std::size_t to = 0;
    int delay = 0;
};

/// Diagonal Free (local feedback with self_delay 0); edge (j -> i) makes entry
/// (i, j) Delayed(delay) or Free when delay is 0; everything else is Zero.
inline SparsityPattern pattern_from_graph(std::size_t nodes, const std::vector<CommEdge>& edges, int self_delay = 0) {
    SparsityPattern p(nodes, nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
        p.at(i, i) = self_delay > 0 ? PatternEntry{EntryKind::Delayed, self_delay} : PatternEntry{EntryKind::Free, 0};
    }
    for (const auto& e : edges) {
        if (e.from >= nodes || e.to >= nodes || e.delay < 0) {
            std::ostringstream os;
            os << "edge " << e.from << "->" << e.to << " (delay " << e.delay << ") outside " << nodes << " nodes";
            throw Error(Errc::BadEdge, os.str());
        }
        if (e.from == e.to) {
            continue;
        }
        p.at(e.to, e.from) = e.delay > 0 ? PatternEntry{EntryKind::Delayed, e.delay} : PatternEntry{EntryKind::Free, 0};
    }
    return p;
}

/// Bidirectional chain 0 - 1 - ... - (n-1) with a uniform delay.
inline std::vector<CommEdge> chain_edges(std::size_t nodes, int delay) {
    std::vector<CommEdge> e;
    for (std::size_t i = 0; i + 1 < nodes; ++i) {
        e.push_back({i, i + 1, delay});
        e.push_back({i + 1, i, delay});
    }
    return e;
}

/// True when every controller allowed by `target` is also allowed by
/// `superset` (Free covers everything, Delayed(k) covers Delayed(k' >= k)).
inline bool pattern_contains(const SparsityPattern& superset, const SparsityPattern& target) {
    if (superset.rows() != target.rows() || superset.cols() != target.cols()) {
        return false;
    }
    for (std::size_t i = 0; i < target.rows(); ++i) {
        for (std::size_t j = 0; j < target.cols(); ++j) {
            const auto& t = target.at(i, j);
            const auto& s = superset.at(i, j);
            switch (t.kind) {
            case EntryKind::Zero: break;
            case EntryKind::Free:
                if (s.kind != EntryKind::Free) {
                    return false;
                }
                break;
            case EntryKind::Delayed:
                if (s.kind == EntryKind::Zero || (s.kind == EntryKind::Delayed && s.delay > t.delay)) {
                    return false;
                }
                break;
            }
        }
    }
    return true;
}

enum class Factor { X, Y };

/// One free scalar: coefficient of basis function `basis` (0 = feedthrough,
/// l >= 1 = 1/(z - pole)^l) in entry (row, col) of X or Y.
struct ThetaSlot {
    Factor factor = Factor::X;
    std::size_t row = 0;
    std::size_t col = 0;
    int basis = 0;
};

/// Linear parameterization of the factor classes for a given pattern.
struct FactorParameterization {
    SparsityPattern pattern;
    int order = 2;
    double pole = 0.0;
    std::vector<ThetaSlot> slots;

    [[nodiscard]] std::size_t size() const noexcept { return slots.size(); }
    [[nodiscard]] std::size_t n_u() const noexcept { return pattern.rows(); }
    [[nodiscard]] std::size_t n_y() const noexcept { return pattern.cols(); }

    /// theta with D_Y = I and everything else zero: Y = I, X = 0, K = 0.
    [[nodiscard]] RealVector zero_controller() const {
        RealVector t = RealVector::Zero(static_cast<Eigen::Index>(size()));
        for (std::size_t s = 0; s < slots.size(); ++s) {
            if (slots[s].factor == Factor::Y && slots[s].basis == 0) {
                t(static_cast<Eigen::Index>(s)) = 1.0;
            }
        }
        return t;
    }

    /// Fixed per-row state matrix: Jordan block of the basis pole.
    [[nodiscard]] RealMatrix row_state_matrix() const {
        RealMatrix a = pole * RealMatrix::Identity(order, order);
        for (int s = 1; s < order; ++s) {
            a(s, s - 1) = 1.0;
        }
        return a;
    }

    /// State index (within a row block) driven by basis function l >= 1.
    [[nodiscard]] int state_of_basis(int l) const { return order - l; }
};

/// Builds the free-entry masks: Y diagonal with feedthrough and all basis
/// coefficients, X per pattern entry (Free: feedthrough + basis; Delayed(k):
/// no feedthrough and basis l >= k; Zero: nothing). Slots are grouped per
/// subcontroller row: X entries in column order, then Y_ii.
inline FactorParameterization build_factor_parameterization(const SparsityPattern& pattern, int entry_order,
                                                            double basis_pole = 0.0) {
    if (!(std::abs(basis_pole) < 1.0)) {
        std::ostringstream os;
        os << "basis pole " << basis_pole << " is not inside the unit disc";
        throw Error(Errc::BadPole, os.str());
    }
    if (entry_order < 1) {
        throw Error(Errc::Config, "entry order must be >= 1");
    }
    FactorParameterization p;
    p.pattern = pattern;
    p.order = entry_order;
    p.pole = basis_pole;
    for (std::size_t i = 0; i < pattern.rows(); ++i) {
        for (std::size_t j = 0; j < pattern.cols(); ++j) {
            const auto& e = pattern.at(i, j);
            if (e.kind == EntryKind::Zero) {
                continue;
            }
            const int first = e.kind == EntryKind::Free ? 0 : e.delay;
            for (int l = first; l <= entry_order; ++l) {
                p.slots.push_back({Factor::X, i, j, l});
            }
        }
        for (int l = 0; l <= entry_order; ++l) {
            p.slots.push_back({Factor::Y, i, i, l});
        }
    }
    return p;
}

/// Values of the basis functions 1, 1/(z-p), ..., 1/(z-p)^order at z.
inline std::vector<cdouble> basis_values(const FactorParameterization& p, cdouble z) {
    std::vector<cdouble> v(static_cast<std::size_t>(p.order) + 1);
    v[0] = 1.0;
    const cdouble q = 1.0 / (z - p.pole);
    for (int l = 1; l <= p.order; ++l) {
        v[static_cast<std::size_t>(l)] = v[static_cast<std::size_t>(l) - 1] * q;
    }
    return v;
}

/// theta -> X(e^{jw}), Y(e^{jw}) on a grid. Both maps are linear (no constant
/// term): slot s contributes theta_s * coeff(s, k) to one entry.
class FactorMaps {
public:
    FactorMaps(std::shared_ptr<const FactorParameterization> param, FrequencyGrid grid)
        : param_(std::move(param)), grid_(std::move(grid)) {
        basis_.resize(grid_.size());
        for (std::size_t k = 0; k < grid_.size(); ++k) {
            basis_[k] = basis_values(*param_, std::polar(1.0, grid_.omegas[k] * grid_.Ts));
        }
    }

    [[nodiscard]] const FactorParameterization& param() const noexcept { return *param_; }
    [[nodiscard]] const FrequencyGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t size() const noexcept { return grid_.size(); }

    [[nodiscard]] cdouble coeff(std::size_t slot, std::size_t k) const {
        return basis_[k][static_cast<std::size_t>(param_->slots[slot].basis)];
    }

    /// Coefficient matrices of slot s at grid point k: (dX/dtheta_s, dY/dtheta_s).
    [[nodiscard]] std::pair<ComplexMatrix, ComplexMatrix> slot_matrices(std::size_t s, std::size_t k) const {
        const auto& p = *param_;
        ComplexMatrix dx = ComplexMatrix::Zero(static_cast<Eigen::Index>(p.n_u()), static_cast<Eigen::Index>(p.n_y()));
        ComplexMatrix dy = ComplexMatrix::Zero(static_cast<Eigen::Index>(p.n_u()), static_cast<Eigen::Index>(p.n_u()));
        const auto& sl = p.slots[s];
        (sl.factor == Factor::X ? dx : dy)(static_cast<Eigen::Index>(sl.row), static_cast<Eigen::Index>(sl.col)) =
            coeff(s, k);
        return {dx, dy};
    }

    [[nodiscard]] ComplexMatrix X(const RealVector& theta, std::size_t k) const { return eval(theta, k, Factor::X); }
    [[nodiscard]] ComplexMatrix Y(const RealVector& theta, std::size_t k) const { return eval(theta, k, Factor::Y); }

private:
    [[nodiscard]] ComplexMatrix eval(const RealVector& theta, std::size_t k, Factor f) const {
        const auto& p = *param_;
        if (theta.size() != static_cast<Eigen::Index>(p.size())) {
            throw Error(Errc::DimensionMismatch, "theta length does not match parameterization");
        }
        const auto cols = f == Factor::X ? p.n_y() : p.n_u();
        ComplexMatrix m = ComplexMatrix::Zero(static_cast<Eigen::Index>(p.n_u()), static_cast<Eigen::Index>(cols));
        for (std::size_t s = 0; s < p.slots.size(); ++s) {
            const auto& sl = p.slots[s];
            if (sl.factor == f) {
                m(static_cast<Eigen::Index>(sl.row), static_cast<Eigen::Index>(sl.col)) +=
                    theta(static_cast<Eigen::Index>(s)) * basis_[k][static_cast<std::size_t>(sl.basis)];
            }
        }
        return m;
    }

    std::shared_ptr<const FactorParameterization> param_;
    FrequencyGrid grid_;
    std::vector<std::vector<cdouble>> basis_;
};

inline FactorMaps realize_factors(const FactorParameterization& param, const FrequencyGrid& grid) {
    grid.validate();
    return FactorMaps(std::make_shared<const FactorParameterization>(param), grid);
}

/// A concrete controller in the parameterized class.
struct ControllerFactors {
    std::shared_ptr<const FactorParameterization> param;
    RealVector theta;

    [[nodiscard]] ComplexMatrix X(cdouble z) const { return eval(z, Factor::X); }
    [[nodiscard]] ComplexMatrix Y(cdouble z) const { return eval(z, Factor::Y); }

    /// K(z) = Y(z)^-1 X(z).
    [[nodiscard]] ComplexMatrix K(cdouble z) const {
        const ComplexMatrix y = Y(z);
        return y.partialPivLu().solve(X(z));
    }

private:
    [[nodiscard]] ComplexMatrix eval(cdouble z, Factor f) const {
        const auto& p = *param;
        const auto bv = basis_values(p, z);
        const auto cols = f == Factor::X ? p.n_y() : p.n_u();
        ComplexMatrix m = ComplexMatrix::Zero(static_cast<Eigen::Index>(p.n_u()), static_cast<Eigen::Index>(cols));
        for (std::size_t s = 0; s < p.slots.size(); ++s) {
            const auto& sl = p.slots[s];
            if (sl.factor == f) {
                m(static_cast<Eigen::Index>(sl.row), static_cast<Eigen::Index>(sl.col)) +=
                    theta(static_cast<Eigen::Index>(s)) * bv[static_cast<std::size_t>(sl.basis)];
            }
        }
        return m;
    }
};

inline ControllerFactors make_factors(const FactorParameterization& param, const RealVector& theta) {
    if (theta.size() != static_cast<Eigen::Index>(param.size())) {
        throw Error(Errc::DimensionMismatch, "theta length does not match parameterization");
    }
    return ControllerFactors{std::make_shared<const FactorParameterization>(param), theta};
}

/// State-space data of [Y X] sharing the per-row Jordan blocks.
struct FactorRealization {
    RealMatrix A, C, BY, BX, DY, DX;
};

inline FactorRealization factor_realization(const ControllerFactors& f) {
    const auto& p = *f.param;
    const auto m = static_cast<Eigen::Index>(p.n_u());
    const auto py = static_cast<Eigen::Index>(p.n_y());
    const Eigen::Index r = p.order;
    FactorRealization out;
    out.A = RealMatrix::Zero(m * r, m * r);
    out.C = RealMatrix::Zero(m, m * r);
    out.BY = RealMatrix::Zero(m * r, m);
    out.BX = RealMatrix::Zero(m * r, py);
    out.DY = RealMatrix::Zero(m, m);
    out.DX = RealMatrix::Zero(m, py);
    const RealMatrix blk = p.row_state_matrix();
    for (Eigen::Index i = 0; i < m; ++i) {
        out.A.block(i * r, i * r, r, r) = blk;
        out.C(i, i * r + r - 1) = 1.0;
    }
    for (std::size_t s = 0; s < p.slots.size(); ++s) {
        const auto& sl = p.slots[s];
        const double v = f.theta(static_cast<Eigen::Index>(s));
        const auto i = static_cast<Eigen::Index>(sl.row);
        const auto j = static_cast<Eigen::Index>(sl.col);
        if (sl.basis == 0) {
            (sl.factor == Factor::X ? out.DX : out.DY)(i, j) += v;
        } else {
            const Eigen::Index state = i * r + p.state_of_basis(sl.basis);
            (sl.factor == Factor::X ? out.BX : out.BY)(state, j) += v;
        }
    }
    return out;
}

/// Minimum |D_Y(i,i)| accepted when inverting Y's feedthrough.
inline constexpr double kMinDY = 1e-12;

/// Realization of K = Y^-1 X from the shared-state realization of [Y X]:
///   A - BY DY^-1 C,  BX - BY DY^-1 DX,  DY^-1 C,  DY^-1 DX.
inline StateSpaceModel realize_controller(const ControllerFactors& f, double Ts) {
    const FactorRealization r = factor_realization(f);
    const auto m = r.DY.rows();
    for (Eigen::Index i = 0; i < m; ++i) {
        if (!(std::abs(r.DY(i, i)) > kMinDY)) {
            std::ostringstream os;
            os << "D_Y(" << i << "," << i << ")=" << r.DY(i, i);
            throw Error(Errc::SingularDY, os.str());
        }
    }
    const RealVector dinv = r.DY.diagonal().cwiseInverse();
    StateSpaceModel k;
    k.Ts = Ts;
    k.C = dinv.asDiagonal() * r.C;
    k.D = dinv.asDiagonal() * r.DX;
    k.A = r.A - r.BY * k.C;
    k.B = r.BX - r.BY * k.D;
    k.n_w = 0;
    k.n_z = 0;
    return k;
}

/// Samples K = Y^-1 X on the grid.
inline std::vector<ComplexMatrix> sample_controller(const ControllerFactors& f, const FrequencyGrid& grid) {
    std::vector<ComplexMatrix> out(grid.size());
    parallel_for(grid.size(), [&](std::size_t k) { out[k] = f.K(std::polar(1.0, grid.omegas[k] * grid.Ts)); });
    return out;
}

/// Smallest sigma_min(Y(e^{jw})) over the grid.
inline double min_y_singular_value(const ControllerFactors& f, const FrequencyGrid& grid) {
    double mn = std::numeric_limits<double>::infinity();
    for (double w : grid.omegas) {
        mn = std::min(mn, min_singular_value(f.Y(std::polar(1.0, w * grid.Ts))));
    }
    return mn;
}

// ---------------------------------------------------------------------------
// Rational transfer matrices and the explicit left factorization.

/// Polynomial in z, coefficients in descending powers.
struct Polynomial {
    std::vector<double> c{0.0};

    [[nodiscard]] int degree() const {
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (c[i] != 0.0) {
                return static_cast<int>(c.size() - 1 - i);
            }
        }
        return -1; // zero polynomial
    }
    [[nodiscard]] bool is_zero() const { return degree() < 0; }

    [[nodiscard]] cdouble operator()(cdouble z) const {
        cdouble acc = 0.0;
        for (double a : c) {
            acc = acc * z + a;
        }
        return acc;
    }

    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        Polynomial r;
        r.c.assign(a.c.size() + b.c.size() - 1, 0.0);
        for (std::size_t i = 0; i < a.c.size(); ++i) {
            for (std::size_t j = 0; j < b.c.size(); ++j) {
                r.c[i + j] += a.c[i] * b.c[j];
            }
        }
        return r;
    }

    static Polynomial constant(double v) { return Polynomial{{v}}; }

    /// (z - rho)^d.
    static Polynomial power_of_root(double rho, int d) {
        Polynomial r = constant(1.0);
        const Polynomial lin{{1.0, -rho}};
        for (int i = 0; i < d; ++i) {
            r = r * lin;
        }
        return r;
    }
};

struct RationalEntry {
    Polynomial num = Polynomial::constant(0.0);
    Polynomial den = Polynomial::constant(1.0);

    [[nodiscard]] cdouble operator()(cdouble z) const { return num(z) / den(z); }
    [[nodiscard]] bool proper() const { return num.is_zero() || num.degree() <= den.degree(); }
};

struct RationalMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<RationalEntry> entries; // row-major

    RationalMatrix() = default;
    RationalMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), entries(r * c) {}

    [[nodiscard]] const RationalEntry& at(std::size_t i, std::size_t j) const { return entries.at(i * cols + j); }
    RationalEntry& at(std::size_t i, std::size_t j) { return entries.at(i * cols + j); }

    [[nodiscard]] ComplexMatrix operator()(cdouble z) const {
        ComplexMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < cols; ++j) {
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = at(i, j)(z);
            }
        }
        return m;
    }
};

/// Explicit stable factors with Y = y(z) I.
struct RationalFactors {
    RationalMatrix X;
    RationalEntry y;

    [[nodiscard]] ComplexMatrix Y(cdouble z) const {
        const auto n = static_cast<Eigen::Index>(X.rows);
        return y(z) * ComplexMatrix::Identity(n, n);
    }
    /// Y^-1 X at z.
    [[nodiscard]] ComplexMatrix K(cdouble z) const { return X(z) / y(z); }
};

/// y = prod a_ij / (z - rho)^d with d = deg prod a_ij, X_ij = y K_ij. Both are
/// proper with all poles at rho, and Y^-1 X = K.
inline RationalFactors left_factorize_rational(const RationalMatrix& K, double rho) {
    if (!(std::abs(rho) < 1.0)) {
        throw Error(Errc::BadPole, "rho must lie inside the unit disc");
    }
    Polynomial prod = Polynomial::constant(1.0);
    for (std::size_t i = 0; i < K.rows; ++i) {
        for (std::size_t j = 0; j < K.cols; ++j) {
            const auto& e = K.at(i, j);
            if (e.den.is_zero()) {
                throw Error(Errc::ImproperEntry, "zero denominator");
            }
            if (!e.proper()) {
                std::ostringstream os;
                os << "entry (" << i << "," << j << ") has numerator degree " << e.num.degree()
                   << " > denominator degree " << e.den.degree();
                throw Error(Errc::ImproperEntry, os.str());
            }
            prod = prod * e.den;
        }
    }
    const int d = prod.degree();
    const Polynomial lambda = Polynomial::power_of_root(rho, d);
    RationalFactors f;
    f.y = RationalEntry{prod, lambda};
    f.X = RationalMatrix(K.rows, K.cols);
    for (std::size_t i = 0; i < K.rows; ++i) {
        for (std::size_t j = 0; j < K.cols; ++j) {
            const auto& e = K.at(i, j);
            if (e.num.is_zero()) {
                f.X.at(i, j) = RationalEntry{Polynomial::constant(0.0), lambda};
                continue;
            }
            Polynomial others = Polynomial::constant(1.0);
            for (std::size_t a = 0; a < K.rows; ++a) {
                for (std::size_t b = 0; b < K.cols; ++b) {
                    if (a != i || b != j) {
                        others = others * K.at(a, b).den;
                    }
                }
            }
            f.X.at(i, j) = RationalEntry{e.num * others, lambda};
        }
    }
    return f;
}

// ---------------------------------------------------------------------------

struct PatternReport {
    double max_zero_entry = 0.0;          // max |K_ij| over grid at Zero entries
    double max_delayed_feedthrough = 0.0; // max |D_K(i,j)| at Delayed entries
    std::vector<std::pair<std::size_t, std::size_t>> violations;
    bool pass = true;
};

/// Checks that K = Y^-1 X belongs to the pattern: Zero entries vanish on the
/// grid and Delayed entries have no direct feedthrough in the realization.
inline PatternReport verify_pattern(const ControllerFactors& f, const SparsityPattern& pattern,
                                    const FrequencyGrid& grid, double tol) {
    PatternReport rep;
    const auto& p = *f.param;
    if (pattern.rows() != p.n_u() || pattern.cols() != p.n_y()) {
        throw Error(Errc::DimensionMismatch, "pattern does not match controller dimensions");
    }
    std::vector<std::vector<double>> zero_mag(pattern.rows(), std::vector<double>(pattern.cols(), 0.0));
    for (double w : grid.omegas) {
        const ComplexMatrix k = f.K(std::polar(1.0, w * grid.Ts));
        for (std::size_t i = 0; i < pattern.rows(); ++i) {
            for (std::size_t j = 0; j < pattern.cols(); ++j) {
                if (pattern.is_zero(i, j)) {
                    zero_mag[i][j] = std::max(zero_mag[i][j],
                                              std::abs(k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))));
                }
            }
        }
    }
    const StateSpaceModel real = realize_controller(f, grid.Ts);
    for (std::size_t i = 0; i < pattern.rows(); ++i) {
        for (std::size_t j = 0; j < pattern.cols(); ++j) {
            const auto& e = pattern.at(i, j);
            bool bad = false;
            if (e.kind == EntryKind::Zero) {
                rep.max_zero_entry = std::max(rep.max_zero_entry, zero_mag[i][j]);
                bad = zero_mag[i][j] > tol;
            } else if (e.kind == EntryKind::Delayed) {
                const double ft = std::abs(real.D(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
                rep.max_delayed_feedthrough = std::max(rep.max_delayed_feedthrough, ft);
                bad = ft > tol;
            }
            if (bad) {
                rep.violations.emplace_back(i, j);
                rep.pass = false;
            }
        }
    }
    return rep;
}

} // namespace ddsr
