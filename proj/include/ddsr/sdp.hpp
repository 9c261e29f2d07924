#pragma once

// Primal-dual interior-point solver for linear matrix inequality programs
//
//   minimize    c' y
//   subject to  F0_b + sum_i y_i F_ib  >= 0   (real symmetric blocks b)
//               g0_r + sum_i y_i g_ir  >= 0   (scalar rows r)
//
// The program is handled as the dual of the standard-form SDP
// min <C,X> s.t. A(X) = b, X >= 0 with C = F0, A_i = -F_i, b = -c, and solved
// with the HKM search direction and Mehrotra predictor-corrector steps from an
// infeasible starting point.
//
// Variables that appear in exactly one block and no scalar row ("local"
// variables, e.g. per-frequency slack matrices) are eliminated block by block
// from the Schur complement system, so the dense factorization only involves
// the variables shared between blocks.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ddsr/error.hpp"
#include "ddsr/hermitian.hpp"

namespace ddsr::sdp {

struct LmiTerm {
    std::size_t var = 0;
    RealMatrix F;
};

/// F0 + sum_t y[terms[t].var] * terms[t].F >= 0.
struct LmiBlock {
    RealMatrix F0;
    std::vector<LmiTerm> terms;

    [[nodiscard]] Eigen::Index dim() const noexcept { return F0.rows(); }
};

/// g0 + sum coeffs >= 0.
struct LinearRow {
    double g0 = 0.0;
    std::vector<std::pair<std::size_t, double>> coeffs;
};

struct Program {
    std::size_t num_vars = 0;
    RealVector cost;
    std::vector<LmiBlock> blocks;
    std::vector<LinearRow> rows;

    /// Largest violation max(0, -lambda_min) over blocks and rows at y.
    [[nodiscard]] double max_violation(const RealVector& y) const {
        double worst = 0.0;
        for (const auto& b : blocks) {
            RealMatrix s = b.F0;
            for (const auto& t : b.terms) {
                s += y(static_cast<Eigen::Index>(t.var)) * t.F;
            }
            if (s.rows() > 0) {
                Eigen::SelfAdjointEigenSolver<RealMatrix> es(s, Eigen::EigenvaluesOnly);
                worst = std::max(worst, -es.eigenvalues()(0));
            }
        }
        for (const auto& r : rows) {
            double v = r.g0;
            for (const auto& [i, g] : r.coeffs) {
                v += g * y(static_cast<Eigen::Index>(i));
            }
            worst = std::max(worst, -v);
        }
        return worst;
    }
};

enum class Status { Optimal, Infeasible, Unbounded, NumericalFailure };

inline const char* to_string(Status s) {
    switch (s) {
    case Status::Optimal: return "Optimal";
    case Status::Infeasible: return "Infeasible";
    case Status::Unbounded: return "Unbounded";
    case Status::NumericalFailure: return "NumericalFailure";
    }
    return "Unknown";
}

struct Settings {
    double feas_tol = 1e-7;
    double gap_tol = 1e-7;
    double near_feas_tol = 1e-5; // primal residual accepted when progress stalls
    double infeas_tol = 1e-8;    // certificate ratio for infeasibility/unboundedness
    int max_iter = 120;
    bool scale_variables = true;
};

struct Result {
    Status status = Status::NumericalFailure;
    RealVector y;
    double objective = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    double primal_infeasibility = 0.0;
    double dual_infeasibility = 0.0;
    double relative_gap = 0.0;
    double max_violation = 0.0;
    std::string message;
};

namespace detail {

using Blocks = std::vector<RealMatrix>;

inline double inner(const Blocks& a, const Blocks& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i].cwiseProduct(b[i]).sum();
    }
    return s;
}

inline double norm(const Blocks& a) { return std::sqrt(inner(a, a)); }

/// Step to the boundary of the PSD cone from a PD point along d (infinite if
/// the direction never leaves the cone).
inline double max_step(const Eigen::LLT<RealMatrix>& chol, const RealMatrix& d) {
    if (d.rows() == 0) {
        return std::numeric_limits<double>::infinity();
    }
    const auto L = chol.matrixL();
    RealMatrix t = L.solve(d);
    t = L.solve(t.transpose()).transpose();
    t = 0.5 * (t + t.transpose());
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(t, Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues()(0);
    return lmin < 0.0 ? -1.0 / lmin : std::numeric_limits<double>::infinity();
}

inline double max_step_lp(const RealVector& x, const RealVector& d) {
    double a = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (d(i) < 0.0) {
            a = std::min(a, -x(i) / d(i));
        }
    }
    return a;
}

/// Dense factorization with escalating diagonal regularization when the
/// matrix is numerically semidefinite.
inline bool robust_llt(const RealMatrix& m, Eigen::LLT<RealMatrix>& out) {
    if (m.rows() == 0) {
        out.compute(m);
        return true;
    }
    out.compute(m);
    if (out.info() == Eigen::Success) {
        return true;
    }
    const double base = std::max(m.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    for (double eps = 1e-14; eps <= 1e-6; eps *= 100.0) {
        RealMatrix r = m;
        r.diagonal().array() += eps * base;
        out.compute(r);
        if (out.info() == Eigen::Success) {
            return true;
        }
    }
    return false;
}

/// Interior-point state and the per-iteration Schur machinery.
class Solver {
public:
    Solver(const Program& prog, const Settings& cfg) : prog_(prog), cfg_(cfg) { setup(); }

    Result run();

private:
    struct BlockInfo {
        std::vector<std::size_t> vars;  // variables in this block (sorted, unique)
        std::vector<std::size_t> local; // subset appearing nowhere else
        std::vector<std::size_t> global;
        std::vector<RealMatrix> F;      // coefficient per entry of vars (scaled)
        RealMatrix F0;
    };

    struct SchurFactor {
        // Per block: LLT of the local-local part and M_LL^-1 M_LG.
        std::vector<Eigen::LLT<RealMatrix>> local_llt;
        std::vector<RealMatrix> local_solve; // |L| x |G_b|
        std::vector<RealMatrix> local_global; // M_LG, |L| x |G_b|
        Eigen::LLT<RealMatrix> reduced;
    };

    void setup();
    void apply_A(const Blocks& W, const RealVector& w_lp, RealVector& out) const;
    void apply_At(const RealVector& y, Blocks& out, RealVector& out_lp) const;
    bool factor_schur(const Blocks& X, const std::vector<Eigen::LLT<RealMatrix>>& zchol, const Blocks& Zinv,
                      const RealVector& x_lp, const RealVector& z_lp, SchurFactor& f) const;
    RealVector solve_schur(const SchurFactor& f, const RealVector& rhs) const;

    const Program& prog_;
    Settings cfg_;
    std::size_t nv_ = 0;
    RealVector scale_;        // y = scale_ .* yhat
    RealVector b_;            // -c scaled
    std::vector<BlockInfo> blocks_;
    // LP rows in standard form: C_lp = g0, A_lp(r, i) = -g_ri (scaled).
    RealVector c_lp_;
    RealMatrix a_lp_;         // rows x nv (dense, rows are few)
    std::vector<std::size_t> global_vars_;
    std::vector<Eigen::Index> global_pos_; // var -> index in reduced system or -1
    std::vector<int> local_owner_;         // var -> owning block or -1
};

inline void Solver::setup() {
    nv_ = prog_.num_vars;
    if (static_cast<std::size_t>(prog_.cost.size()) != nv_) {
        throw Error(Errc::DimensionMismatch, "cost vector length differs from variable count");
    }
    // Column scaling: each variable's coefficient data normalized to unit norm.
    std::vector<double> colnorm(nv_, 0.0);
    for (const auto& b : prog_.blocks) {
        for (const auto& t : b.terms) {
            if (t.var >= nv_ || t.F.rows() != b.F0.rows() || t.F.cols() != b.F0.cols()) {
                throw Error(Errc::DimensionMismatch, "LMI term does not match block or variable range");
            }
            colnorm[t.var] += t.F.squaredNorm();
        }
    }
    for (const auto& r : prog_.rows) {
        for (const auto& [i, g] : r.coeffs) {
            if (i >= nv_) {
                throw Error(Errc::DimensionMismatch, "linear row variable out of range");
            }
            colnorm[i] += g * g;
        }
    }
    scale_ = RealVector::Ones(static_cast<Eigen::Index>(nv_));
    for (std::size_t i = 0; i < nv_; ++i) {
        if (colnorm[i] == 0.0) {
            if (prog_.cost(static_cast<Eigen::Index>(i)) != 0.0) {
                throw Error(Errc::SolverFailed, "variable with cost but no constraint makes the program unbounded");
            }
        } else if (cfg_.scale_variables) {
            scale_(static_cast<Eigen::Index>(i)) = 1.0 / std::sqrt(colnorm[i]);
        }
    }
    b_ = -prog_.cost.cwiseProduct(scale_);

    // Variable ownership.
    std::vector<int> count(nv_, 0);
    std::vector<int> owner(nv_, -1);
    for (std::size_t bi = 0; bi < prog_.blocks.size(); ++bi) {
        std::vector<std::size_t> seen;
        for (const auto& t : prog_.blocks[bi].terms) {
            seen.push_back(t.var);
        }
        std::sort(seen.begin(), seen.end());
        seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
        for (auto v : seen) {
            ++count[v];
            owner[v] = static_cast<int>(bi);
        }
    }
    for (const auto& r : prog_.rows) {
        for (const auto& [i, g] : r.coeffs) {
            count[i] += 2; // never local
        }
    }
    local_owner_.assign(nv_, -1);
    global_pos_.assign(nv_, -1);
    for (std::size_t i = 0; i < nv_; ++i) {
        if (count[i] == 1) {
            local_owner_[i] = owner[i];
        } else {
            global_pos_[i] = static_cast<Eigen::Index>(global_vars_.size());
            global_vars_.push_back(i);
        }
    }

    blocks_.resize(prog_.blocks.size());
    for (std::size_t bi = 0; bi < prog_.blocks.size(); ++bi) {
        const auto& src = prog_.blocks[bi];
        auto& dst = blocks_[bi];
        dst.F0 = 0.5 * (src.F0 + src.F0.transpose());
        std::vector<std::size_t> vars;
        for (const auto& t : src.terms) {
            vars.push_back(t.var);
        }
        std::sort(vars.begin(), vars.end());
        vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
        dst.vars = vars;
        dst.F.assign(vars.size(), RealMatrix::Zero(src.F0.rows(), src.F0.cols()));
        for (const auto& t : src.terms) {
            const auto pos = static_cast<std::size_t>(std::lower_bound(vars.begin(), vars.end(), t.var) - vars.begin());
            dst.F[pos] += 0.5 * (t.F + t.F.transpose()) * scale_(static_cast<Eigen::Index>(t.var));
        }
        for (auto v : vars) {
            (local_owner_[v] == static_cast<int>(bi) ? dst.local : dst.global).push_back(v);
        }
    }

    const auto nr = static_cast<Eigen::Index>(prog_.rows.size());
    c_lp_.resize(nr);
    a_lp_ = RealMatrix::Zero(nr, static_cast<Eigen::Index>(nv_));
    for (Eigen::Index r = 0; r < nr; ++r) {
        const auto& row = prog_.rows[static_cast<std::size_t>(r)];
        c_lp_(r) = row.g0;
        for (const auto& [i, g] : row.coeffs) {
            a_lp_(r, static_cast<Eigen::Index>(i)) -= g * scale_(static_cast<Eigen::Index>(i));
        }
    }
}

/// out_i = <A_i, W> = -sum_b <F_ib, W_b> + A_lp(:, i)' w_lp.
inline void Solver::apply_A(const Blocks& W, const RealVector& w_lp, RealVector& out) const {
    out = RealVector::Zero(static_cast<Eigen::Index>(nv_));
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto& b = blocks_[bi];
        for (std::size_t t = 0; t < b.vars.size(); ++t) {
            out(static_cast<Eigen::Index>(b.vars[t])) -= b.F[t].cwiseProduct(W[bi]).sum();
        }
    }
    if (a_lp_.rows() > 0) {
        out.noalias() += a_lp_.transpose() * w_lp;
    }
}

/// A^T y = -sum_i y_i F_i.
inline void Solver::apply_At(const RealVector& y, Blocks& out, RealVector& out_lp) const {
    out.resize(blocks_.size());
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto& b = blocks_[bi];
        out[bi] = RealMatrix::Zero(b.F0.rows(), b.F0.cols());
        for (std::size_t t = 0; t < b.vars.size(); ++t) {
            out[bi] -= y(static_cast<Eigen::Index>(b.vars[t])) * b.F[t];
        }
    }
    out_lp = a_lp_ * y;
}

inline bool Solver::factor_schur(const Blocks& X, const std::vector<Eigen::LLT<RealMatrix>>& zchol,
                                 const Blocks& Zinv, const RealVector& x_lp, const RealVector& z_lp,
                                 SchurFactor& f) const {
    (void)Zinv;
    const auto ng = static_cast<Eigen::Index>(global_vars_.size());
    RealMatrix red = RealMatrix::Zero(ng, ng);
    f.local_llt.resize(blocks_.size());
    f.local_solve.resize(blocks_.size());
    f.local_global.resize(blocks_.size());

    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto& b = blocks_[bi];
        const auto n = b.F0.rows();
        const auto nvb = static_cast<Eigen::Index>(b.vars.size());
        if (nvb == 0 || n == 0) {
            continue;
        }
        // M_ij = tr(F_i X F_j Z^-1) = <P_i, P_j>, P_j = Lx' F_j Lz^-T where
        // X = Lx Lx' and Z = Lz Lz'.
        Eigen::LLT<RealMatrix> xchol(X[bi]);
        if (xchol.info() != Eigen::Success) {
            return false;
        }
        const RealMatrix Lx = xchol.matrixL();
        RealMatrix P(n * n, nvb);
        for (Eigen::Index t = 0; t < nvb; ++t) {
            RealMatrix q = Lx.transpose() * b.F[static_cast<std::size_t>(t)];
            // q * Lz^-T  ==  (Lz^-1 q')'
            RealMatrix s = zchol[bi].matrixL().solve(q.transpose());
            P.col(t) = Eigen::Map<const RealVector>(s.data(), n * n);
        }
        RealMatrix M(nvb, nvb);
        M.setZero();
        M.selfadjointView<Eigen::Lower>().rankUpdate(P.transpose());
        M = M.selfadjointView<Eigen::Lower>();

        // Split into local / global positions within this block.
        std::vector<Eigen::Index> lpos, gpos;
        for (Eigen::Index t = 0; t < nvb; ++t) {
            (local_owner_[b.vars[static_cast<std::size_t>(t)]] == static_cast<int>(bi) ? lpos : gpos).push_back(t);
        }
        const auto nl = static_cast<Eigen::Index>(lpos.size());
        const auto ngb = static_cast<Eigen::Index>(gpos.size());
        RealMatrix Mgg(ngb, ngb);
        for (Eigen::Index a = 0; a < ngb; ++a) {
            for (Eigen::Index c = 0; c < ngb; ++c) {
                Mgg(a, c) = M(gpos[static_cast<std::size_t>(a)], gpos[static_cast<std::size_t>(c)]);
            }
        }
        if (nl > 0) {
            RealMatrix Mll(nl, nl), Mlg(nl, ngb);
            for (Eigen::Index a = 0; a < nl; ++a) {
                for (Eigen::Index c = 0; c < nl; ++c) {
                    Mll(a, c) = M(lpos[static_cast<std::size_t>(a)], lpos[static_cast<std::size_t>(c)]);
                }
                for (Eigen::Index c = 0; c < ngb; ++c) {
                    Mlg(a, c) = M(lpos[static_cast<std::size_t>(a)], gpos[static_cast<std::size_t>(c)]);
                }
            }
            if (!robust_llt(Mll, f.local_llt[bi])) {
                return false;
            }
            f.local_global[bi] = Mlg;
            f.local_solve[bi] = f.local_llt[bi].solve(Mlg);
            Mgg.noalias() -= Mlg.transpose() * f.local_solve[bi];
        }
        for (Eigen::Index a = 0; a < ngb; ++a) {
            const auto ga = global_pos_[b.vars[static_cast<std::size_t>(gpos[static_cast<std::size_t>(a)])]];
            for (Eigen::Index c = 0; c < ngb; ++c) {
                const auto gc = global_pos_[b.vars[static_cast<std::size_t>(gpos[static_cast<std::size_t>(c)])]];
                red(ga, gc) += Mgg(a, c);
            }
        }
    }
    if (a_lp_.rows() > 0) {
        const RealVector d = x_lp.cwiseQuotient(z_lp);
        RealMatrix Ag(a_lp_.rows(), ng);
        for (Eigen::Index g = 0; g < ng; ++g) {
            Ag.col(g) = a_lp_.col(static_cast<Eigen::Index>(global_vars_[static_cast<std::size_t>(g)]));
        }
        red.noalias() += Ag.transpose() * d.asDiagonal() * Ag;
    }
    red = 0.5 * (red + red.transpose());
    return robust_llt(red, f.reduced);
}

inline RealVector Solver::solve_schur(const SchurFactor& f, const RealVector& rhs) const {
    const auto ng = static_cast<Eigen::Index>(global_vars_.size());
    RealVector rg(ng);
    for (Eigen::Index g = 0; g < ng; ++g) {
        rg(g) = rhs(static_cast<Eigen::Index>(global_vars_[static_cast<std::size_t>(g)]));
    }
    // Per block local rhs and the correction to the reduced rhs.
    std::vector<RealVector> rl(blocks_.size());
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto& b = blocks_[bi];
        if (b.local.empty()) {
            continue;
        }
        RealVector v(static_cast<Eigen::Index>(b.local.size()));
        std::size_t a = 0;
        for (auto var : b.vars) {
            if (local_owner_[var] == static_cast<int>(bi)) {
                v(static_cast<Eigen::Index>(a++)) = rhs(static_cast<Eigen::Index>(var));
            }
        }
        rl[bi] = v;
        const RealVector corr = f.local_solve[bi].transpose() * v;
        std::size_t c = 0;
        for (auto var : b.vars) {
            if (local_owner_[var] != static_cast<int>(bi)) {
                rg(global_pos_[var]) -= corr(static_cast<Eigen::Index>(c++));
            }
        }
    }
    const RealVector dg = ng > 0 ? RealVector(f.reduced.solve(rg)) : RealVector();
    RealVector out = RealVector::Zero(static_cast<Eigen::Index>(nv_));
    for (Eigen::Index g = 0; g < ng; ++g) {
        out(static_cast<Eigen::Index>(global_vars_[static_cast<std::size_t>(g)])) = dg(g);
    }
    for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
        const auto& b = blocks_[bi];
        if (b.local.empty()) {
            continue;
        }
        RealVector dgb(static_cast<Eigen::Index>(b.global.size()));
        std::size_t c = 0;
        for (auto var : b.vars) {
            if (local_owner_[var] != static_cast<int>(bi)) {
                dgb(static_cast<Eigen::Index>(c++)) = dg(global_pos_[var]);
            }
        }
        const RealVector dl = f.local_llt[bi].solve(rl[bi] - f.local_global[bi] * dgb);
        std::size_t a = 0;
        for (auto var : b.vars) {
            if (local_owner_[var] == static_cast<int>(bi)) {
                out(static_cast<Eigen::Index>(var)) = dl(static_cast<Eigen::Index>(a++));
            }
        }
    }
    return out;
}

inline Result Solver::run() {
    Result res;
    const std::size_t nb = blocks_.size();
    const auto nr = c_lp_.size();

    // Standard-form data norms.
    Blocks C(nb);
    for (std::size_t bi = 0; bi < nb; ++bi) {
        C[bi] = blocks_[bi].F0;
    }
    const double normC = std::sqrt(norm(C) * norm(C) + c_lp_.squaredNorm());
    const double normb = b_.norm();

    // Infeasible starting point (scaled identities).
    double total_dim = static_cast<double>(nr);
    Blocks X(nb), Z(nb);
    for (std::size_t bi = 0; bi < nb; ++bi) {
        const auto& b = blocks_[bi];
        const auto n = b.F0.rows();
        total_dim += static_cast<double>(n);
        double fmax = 0.0;
        double ratio = 0.0;
        for (std::size_t t = 0; t < b.vars.size(); ++t) {
            const double fn = b.F[t].norm();
            fmax = std::max(fmax, fn);
            ratio = std::max(ratio, (1.0 + std::abs(b_(static_cast<Eigen::Index>(b.vars[t])))) / (1.0 + fn));
        }
        const double sn = std::sqrt(static_cast<double>(n));
        const double xi = std::max({10.0, sn, sn * ratio});
        const double eta = std::max({10.0, sn, fmax, b.F0.norm()});
        X[bi] = xi * RealMatrix::Identity(n, n);
        Z[bi] = eta * RealMatrix::Identity(n, n);
    }
    RealVector x_lp = RealVector::Constant(nr, std::max(10.0, 1.0 + normb));
    RealVector z_lp = RealVector::Constant(nr, std::max(10.0, 1.0 + (nr > 0 ? c_lp_.cwiseAbs().maxCoeff() : 0.0)));
    if (nr == 0) {
        x_lp.resize(0);
        z_lp.resize(0);
    }
    if (total_dim == 0.0) {
        res.status = Status::Optimal;
        res.y = RealVector::Zero(static_cast<Eigen::Index>(nv_));
        res.objective = 0.0;
        return res;
    }
    RealVector y = RealVector::Zero(static_cast<Eigen::Index>(nv_));

    Blocks AtY, Rd(nb);
    RealVector AtY_lp, Rd_lp, AX, Rp;
    std::vector<Eigen::LLT<RealMatrix>> zchol(nb), xchol(nb);
    Blocks Zinv(nb);
    SchurFactor schur;
    int stalls = 0;
    // Best dual-feasible point seen with a small gap, used when the primal
    // residual stalls short of feas_tol.
    RealVector best_y;
    double best_pinf = std::numeric_limits<double>::infinity();

    auto finish = [&](Status st, const std::string& msg) {
        res.status = st;
        res.y = y.cwiseProduct(scale_);
        res.objective = prog_.cost.dot(res.y);
        res.message = msg;
        res.max_violation = prog_.max_violation(res.y);
        return res;
    };
    auto fail = [&](const std::string& msg) {
        if (best_y.size() > 0) {
            y = best_y;
            res.primal_infeasibility = best_pinf;
            return finish(Status::Optimal, "converged with reduced primal accuracy after: " + msg);
        }
        return finish(Status::NumericalFailure, msg);
    };

    for (int iter = 0; iter < cfg_.max_iter; ++iter) {
        res.iterations = iter;
        apply_At(y, AtY, AtY_lp);
        for (std::size_t bi = 0; bi < nb; ++bi) {
            Rd[bi] = C[bi] - Z[bi] - AtY[bi];
        }
        Rd_lp = c_lp_ - z_lp - AtY_lp;
        apply_A(X, x_lp, AX);
        Rp = b_ - AX;

        const double pobj = inner(C, X) + c_lp_.dot(x_lp);
        const double dobj = b_.dot(y);
        const double gap = inner(X, Z) + x_lp.dot(z_lp);
        const double mu = gap / total_dim;
        const double rel_gap = gap / (1.0 + std::abs(pobj) + std::abs(dobj));
        const double pinf = Rp.norm() / (1.0 + normb);
        double rd_abs = Rd_lp.size() > 0 ? Rd_lp.cwiseAbs().maxCoeff() : 0.0;
        for (const auto& r : Rd) {
            rd_abs = std::max(rd_abs, r.norm());
        }
        const double dinf = std::sqrt(norm(Rd) * norm(Rd) + Rd_lp.squaredNorm()) / (1.0 + normC);
        res.primal_infeasibility = pinf;
        res.dual_infeasibility = dinf;
        res.relative_gap = rel_gap;

        if (!std::isfinite(pobj) || !std::isfinite(dobj) || !std::isfinite(gap)) {
            return finish(Status::NumericalFailure, "non-finite iterate");
        }
        if (rel_gap <= cfg_.gap_tol && pinf <= cfg_.feas_tol && rd_abs <= cfg_.feas_tol) {
            return finish(Status::Optimal, "converged");
        }
        if (rel_gap <= cfg_.gap_tol && rd_abs <= cfg_.feas_tol && pinf <= cfg_.near_feas_tol && pinf < best_pinf) {
            best_y = y;
            best_pinf = pinf;
        }
        // Certificates. A primal ray (A(X) ~ 0, <C,X> < 0) proves the LMI
        // infeasible; a dual ray (b'y > 0, A'y <= 0) proves it unbounded.
        if (pobj < 0.0 && AX.norm() / -pobj <= cfg_.infeas_tol) {
            return finish(Status::Infeasible, "primal ray certificate");
        }
        if (dobj > 0.0 && std::sqrt(norm(AtY) * norm(AtY) + AtY_lp.squaredNorm()) > 0.0) {
            Blocks ray(nb);
            double viol = 0.0;
            for (std::size_t bi = 0; bi < nb; ++bi) {
                if (AtY[bi].rows() > 0) {
                    Eigen::SelfAdjointEigenSolver<RealMatrix> es(AtY[bi], Eigen::EigenvaluesOnly);
                    viol = std::max(viol, es.eigenvalues()(es.eigenvalues().size() - 1));
                }
            }
            if (AtY_lp.size() > 0) {
                viol = std::max(viol, AtY_lp.maxCoeff());
            }
            if (std::max(viol, 0.0) / dobj <= cfg_.infeas_tol && dobj > 1e8 * (1.0 + normC)) {
                return finish(Status::Unbounded, "dual ray certificate");
            }
        }

        for (std::size_t bi = 0; bi < nb; ++bi) {
            zchol[bi].compute(Z[bi]);
            xchol[bi].compute(X[bi]);
            if (zchol[bi].info() != Eigen::Success || xchol[bi].info() != Eigen::Success) {
                return fail("iterate left the cone");
            }
            Zinv[bi] = zchol[bi].solve(RealMatrix::Identity(Z[bi].rows(), Z[bi].cols()));
        }
        if (!factor_schur(X, zchol, Zinv, x_lp, z_lp, schur)) {
            return fail("Schur complement factorization failed");
        }

        // Search direction for a given centering target and second-order term.
        Blocks dX(nb), dZ(nb);
        RealVector dx_lp, dz_lp, dy;
        auto direction = [&](double sigma_mu, const Blocks* H, const RealVector* h_lp) {
            Blocks R1(nb), R2(nb);
            for (std::size_t bi = 0; bi < nb; ++bi) {
                const auto n = X[bi].rows();
                RealMatrix rc = sigma_mu * RealMatrix::Identity(n, n);
                if (H != nullptr) {
                    rc -= (*H)[bi];
                }
                R1[bi] = rc * Zinv[bi] - X[bi];
                R2[bi] = X[bi] * Rd[bi] * Zinv[bi];
            }
            RealVector rc_lp = RealVector::Constant(nr, sigma_mu);
            if (h_lp != nullptr) {
                rc_lp -= *h_lp;
            }
            const RealVector r1_lp = rc_lp.cwiseQuotient(z_lp) - x_lp;
            const RealVector r2_lp = x_lp.cwiseProduct(Rd_lp).cwiseQuotient(z_lp);
            RealVector a1, a2;
            apply_A(R1, r1_lp, a1);
            apply_A(R2, r2_lp, a2);
            const RealVector rhs = Rp - a1 + a2;
            dy = solve_schur(schur, rhs);
            Blocks Atdy;
            RealVector Atdy_lp;
            apply_At(dy, Atdy, Atdy_lp);
            for (std::size_t bi = 0; bi < nb; ++bi) {
                dZ[bi] = Rd[bi] - Atdy[bi];
                RealMatrix d = R1[bi] - X[bi] * dZ[bi] * Zinv[bi];
                dX[bi] = 0.5 * (d + d.transpose());
            }
            dz_lp = Rd_lp - Atdy_lp;
            dx_lp = r1_lp - x_lp.cwiseProduct(dz_lp).cwiseQuotient(z_lp);
        };
        auto steps = [&](double& ap, double& ad) {
            ap = max_step_lp(x_lp, dx_lp);
            ad = max_step_lp(z_lp, dz_lp);
            for (std::size_t bi = 0; bi < nb; ++bi) {
                ap = std::min(ap, max_step(xchol[bi], dX[bi]));
                ad = std::min(ad, max_step(zchol[bi], dZ[bi]));
            }
        };

        // Predictor.
        direction(0.0, nullptr, nullptr);
        double ap = 0.0, ad = 0.0;
        steps(ap, ad);
        const double ap1 = std::min(1.0, ap);
        const double ad1 = std::min(1.0, ad);
        double gap_aff = 0.0;
        for (std::size_t bi = 0; bi < nb; ++bi) {
            gap_aff += (X[bi] + ap1 * dX[bi]).cwiseProduct(Z[bi] + ad1 * dZ[bi]).sum();
        }
        gap_aff += (x_lp + ap1 * dx_lp).dot(z_lp + ad1 * dz_lp);
        const double expon = std::max(1.0, 3.0 * std::min(ap1, ad1) * std::min(ap1, ad1));
        const double sigma = gap_aff > 0.0 ? std::min(1.0, std::pow(gap_aff / gap, expon)) : 0.0;

        // Corrector.
        Blocks H(nb);
        for (std::size_t bi = 0; bi < nb; ++bi) {
            H[bi] = dX[bi] * dZ[bi];
        }
        const RealVector h_lp = dx_lp.cwiseProduct(dz_lp);
        direction(sigma * mu, &H, &h_lp);
        steps(ap, ad);
        const double tau = 0.9 + 0.09 * std::min(ap1, ad1);
        ap = std::min(1.0, tau * ap);
        ad = std::min(1.0, tau * ad);

        // Backtrack when rounding puts the new point on the cone boundary.
        bool inside = false;
        Blocks Xn(nb), Zn(nb);
        for (int attempt = 0; attempt < 30 && !inside; ++attempt) {
            inside = true;
            for (std::size_t bi = 0; bi < nb && inside; ++bi) {
                Xn[bi] = X[bi] + ap * dX[bi];
                Zn[bi] = Z[bi] + ad * dZ[bi];
                Xn[bi] = 0.5 * (Xn[bi] + Xn[bi].transpose());
                Zn[bi] = 0.5 * (Zn[bi] + Zn[bi].transpose());
                inside = Eigen::LLT<RealMatrix>(Xn[bi]).info() == Eigen::Success &&
                         Eigen::LLT<RealMatrix>(Zn[bi]).info() == Eigen::Success;
            }
            const RealVector xn = x_lp + ap * dx_lp;
            const RealVector zn = z_lp + ad * dz_lp;
            inside = inside && (nr == 0 || (xn.minCoeff() > 0.0 && zn.minCoeff() > 0.0));
            if (!inside) {
                ap *= 0.8;
                ad *= 0.8;
            }
        }
        if (!inside) {
            return fail("iterate left the cone");
        }
        X = std::move(Xn);
        Z = std::move(Zn);
        x_lp += ap * dx_lp;
        z_lp += ad * dz_lp;
        y += ad * dy;

        stalls = (std::max(ap, ad) < 1e-8) ? stalls + 1 : 0;
        if (stalls >= 3) {
            return fail("step length stalled");
        }
    }
    res.iterations = cfg_.max_iter;
    return fail("iteration limit reached");
}

} // namespace detail

inline Result solve(const Program& prog, const Settings& cfg = {}) {
    detail::Solver s(prog, cfg);
    return s.run();
}

} // namespace ddsr::sdp
