#pragma once

// Per-frequency LMIs for structured H2 / Hinf / spatial-regret synthesis in
// the left-factored controller class K = Y^-1 X, and the convex-concave outer
// iteration around a stabilizing controller.
//
// With Phi = (Y - X G22) G12^L and Psi = I - G12 G12^L the closed loop is
// T = Phi^R (Phi G11 + X G21) + Psi G11, and T*T <= Gamma is equivalent to
//
//   [ Gamma - (Psi G11)*(Psi G11)   (Phi G11 + X G21)* ]
//   [ Phi G11 + X G21               Phi Phi*           ]  >= 0.
//
// Phi Phi* is replaced by its lower bound Phi_c Phi* + Phi Phi_c* - Phi_c Phi_c*
// around the current iterate, which makes the constraint affine in theta.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ddsr/error.hpp"
#include "ddsr/evaluation.hpp"
#include "ddsr/frf.hpp"
#include "ddsr/grid.hpp"
#include "ddsr/hermitian.hpp"
#include "ddsr/lti.hpp"
#include "ddsr/parallel.hpp"
#include "ddsr/sdp.hpp"
#include "ddsr/structure.hpp"

namespace ddsr {

enum class ObjectiveKind { H2, Hinf, SpatialRegret };

inline const char* to_string(ObjectiveKind k) {
    switch (k) {
    case ObjectiveKind::H2: return "h2";
    case ObjectiveKind::Hinf: return "hinf";
    case ObjectiveKind::SpatialRegret: return "spatial-regret";
    }
    return "unknown";
}

inline ObjectiveKind parse_objective(const std::string& s) {
    if (s == "h2") {
        return ObjectiveKind::H2;
    }
    if (s == "hinf") {
        return ObjectiveKind::Hinf;
    }
    if (s == "spatial-regret") {
        return ObjectiveKind::SpatialRegret;
    }
    throw Error(Errc::Config, "unknown objective '" + s + "' (expected h2, hinf or spatial-regret)");
}

/// Per-frequency affine data of Phi and of W = Phi G11 + X G21.
struct PhiMaps {
    FrequencyGrid grid;
    std::size_t num_theta = 0;
    std::vector<ComplexMatrix> G12L;
    std::vector<ComplexMatrix> Psi;
    std::vector<ComplexMatrix> PsiG11;
    std::vector<ComplexMatrix> PhiC;
    std::vector<std::vector<ComplexMatrix>> dPhi; // [k][slot]
    std::vector<std::vector<ComplexMatrix>> dW;   // [k][slot]

    [[nodiscard]] std::size_t size() const noexcept { return grid.size(); }

    [[nodiscard]] ComplexMatrix Phi(const RealVector& theta, std::size_t k) const {
        ComplexMatrix m = ComplexMatrix::Zero(G12L[k].rows(), G12L[k].cols());
        for (std::size_t s = 0; s < num_theta; ++s) {
            m += theta(static_cast<Eigen::Index>(s)) * dPhi[k][s];
        }
        return m;
    }

    [[nodiscard]] ComplexMatrix W(const RealVector& theta, std::size_t k) const {
        ComplexMatrix m = ComplexMatrix::Zero(dW[k].front().rows(), dW[k].front().cols());
        for (std::size_t s = 0; s < num_theta; ++s) {
            m += theta(static_cast<Eigen::Index>(s)) * dW[k][s];
        }
        return m;
    }
};

inline PhiMaps build_phi_maps(const GeneralizedPlantFrf& plant, const FactorMaps& fm, const RealVector& theta_c,
                              double rank_tol = kDefaultRankTol) {
    plant.validate();
    if (!(plant.grid == fm.grid())) {
        throw Error(Errc::GridMismatch, "factor maps and plant use different grids");
    }
    const auto& p = fm.param();
    if (static_cast<Eigen::Index>(p.n_u()) != plant.n_u() || static_cast<Eigen::Index>(p.n_y()) != plant.n_y()) {
        throw Error(Errc::DimensionMismatch, "controller pattern does not match plant channels");
    }
    if (theta_c.size() != static_cast<Eigen::Index>(p.size())) {
        throw Error(Errc::DimensionMismatch, "theta_c length does not match parameterization");
    }
    const std::size_t n = plant.size();
    PhiMaps m;
    m.grid = plant.grid;
    m.num_theta = p.size();
    m.G12L.resize(n);
    m.Psi.resize(n);
    m.PsiG11.resize(n);
    m.PhiC.resize(n);
    m.dPhi.assign(n, std::vector<ComplexMatrix>(p.size()));
    m.dW.assign(n, std::vector<ComplexMatrix>(p.size()));
    parallel_for(n, [&](std::size_t k) {
        const ComplexMatrix& G12 = plant.G12[k];
        m.G12L[k] = left_inverse(G12, rank_tol);
        m.Psi[k] = ComplexMatrix::Identity(G12.rows(), G12.rows()) - G12 * m.G12L[k];
        m.PsiG11[k] = m.Psi[k] * plant.G11[k];
        for (std::size_t s = 0; s < p.size(); ++s) {
            const auto [dx, dy] = fm.slot_matrices(s, k);
            m.dPhi[k][s] = (dy - dx * plant.G22[k]) * m.G12L[k];
            m.dW[k][s] = m.dPhi[k][s] * plant.G11[k] + dx * plant.G21[k];
        }
        m.PhiC[k] = m.Phi(theta_c, k);
    });
    return m;
}

/// Oracle controller and its sampled closed loop.
struct OracleData {
    ControllerFactors factors;
    ClosedLoopFrf T_hat;
    ObjectiveKind kind = ObjectiveKind::Hinf;
    double value = 0.0;
};

/// One Hermitian affine constraint H0 + sum_v y_v H_v >= 0 at a frequency.
struct ComplexLmiBlock {
    double omega = 0.0;
    ComplexMatrix H0;
    std::vector<std::pair<std::size_t, ComplexMatrix>> terms;

    [[nodiscard]] ComplexMatrix evaluate(const RealVector& y) const {
        ComplexMatrix h = H0;
        for (const auto& [v, H] : terms) {
            h += y(static_cast<Eigen::Index>(v)) * H;
        }
        return h;
    }
};

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

/// Variable layout: theta in [0, num_theta); gamma at gamma_index (Hinf and
/// regret); for H2 the Hermitian Gamma entries of block k start at
/// gamma_offset[k] (n_w real diagonal entries, then real and imaginary parts
/// of the strict upper triangle, row-major).
struct SdpProblem {
    ObjectiveKind kind = ObjectiveKind::Hinf;
    std::size_t num_theta = 0;
    std::size_t gamma_index = kNoIndex;
    std::size_t num_vars = 0;
    Eigen::Index n_w = 0;
    RealVector cost;
    std::vector<ComplexLmiBlock> blocks;
    std::vector<sdp::LinearRow> rows;
    std::vector<std::size_t> gamma_offset;
    std::optional<sdp::LmiBlock> regularizer;
};

struct LmiOptions {
    double theta_bound = 1e4;    // |theta_i| <= bound; 0 disables
    double regularization = 0.0; // weight of ||theta||^2 in the objective
};

namespace detail {

/// Blocks shared by every objective: everything except the Gamma part of the
/// upper-left corner.
inline ComplexLmiBlock base_block(const PhiMaps& maps, std::size_t k, Eigen::Index nw) {
    const ComplexMatrix& Pc = maps.PhiC[k];
    const Eigen::Index nu = Pc.rows();
    const Eigen::Index n = nw + nu;
    ComplexLmiBlock b;
    b.omega = maps.grid.omegas[k];
    b.H0 = ComplexMatrix::Zero(n, n);
    b.H0.topLeftCorner(nw, nw) = -maps.PsiG11[k].adjoint() * maps.PsiG11[k];
    b.H0.bottomRightCorner(nu, nu) = -Pc * Pc.adjoint();
    for (std::size_t s = 0; s < maps.num_theta; ++s) {
        ComplexMatrix H = ComplexMatrix::Zero(n, n);
        const ComplexMatrix& dW = maps.dW[k][s];
        H.bottomLeftCorner(nu, nw) = dW;
        H.topRightCorner(nw, nu) = dW.adjoint();
        const ComplexMatrix cross = Pc * maps.dPhi[k][s].adjoint();
        H.bottomRightCorner(nu, nu) = cross + cross.adjoint();
        b.terms.emplace_back(s, std::move(H));
    }
    return b;
}

inline void add_theta_rows(SdpProblem& P, const LmiOptions& opt) {
    if (opt.theta_bound > 0.0) {
        for (std::size_t s = 0; s < P.num_theta; ++s) {
            P.rows.push_back({opt.theta_bound, {{s, 1.0}}});
            P.rows.push_back({opt.theta_bound, {{s, -1.0}}});
        }
    }
}

/// Epigraph of ||theta||^2: [[t, theta'], [theta, I]] >= 0 with cost w*t.
inline void add_regularizer(SdpProblem& P, const LmiOptions& opt) {
    if (!(opt.regularization > 0.0)) {
        return;
    }
    const std::size_t t = P.num_vars++;
    P.cost.conservativeResize(static_cast<Eigen::Index>(P.num_vars));
    P.cost(static_cast<Eigen::Index>(t)) = opt.regularization;
    const auto n = static_cast<Eigen::Index>(P.num_theta) + 1;
    sdp::LmiBlock b;
    b.F0 = RealMatrix::Zero(n, n);
    b.F0.bottomRightCorner(n - 1, n - 1).setIdentity();
    RealMatrix Ft = RealMatrix::Zero(n, n);
    Ft(0, 0) = 1.0;
    b.terms.push_back({t, Ft});
    for (std::size_t s = 0; s < P.num_theta; ++s) {
        RealMatrix F = RealMatrix::Zero(n, n);
        F(0, static_cast<Eigen::Index>(s) + 1) = F(static_cast<Eigen::Index>(s) + 1, 0) = 1.0;
        b.terms.push_back({s, F});
    }
    P.regularizer = std::move(b);
}

} // namespace detail

/// H2 or Hinf problem over the grid.
inline SdpProblem build_norm_lmi(const GeneralizedPlantFrf& plant, const PhiMaps& maps, ObjectiveKind kind,
                                 const LmiOptions& opt = {}) {
    if (kind == ObjectiveKind::SpatialRegret) {
        throw Error(Errc::Config, "build_norm_lmi handles h2 and hinf only");
    }
    if (!(plant.grid == maps.grid)) {
        throw Error(Errc::GridMismatch, "maps built on a different grid");
    }
    const Eigen::Index nw = plant.n_w();
    const std::size_t n = maps.size();
    SdpProblem P;
    P.kind = kind;
    P.num_theta = maps.num_theta;
    P.n_w = nw;
    P.blocks.resize(n);
    if (kind == ObjectiveKind::Hinf) {
        P.gamma_index = P.num_theta;
        P.num_vars = P.num_theta + 1;
        P.cost = RealVector::Zero(static_cast<Eigen::Index>(P.num_vars));
        P.cost(static_cast<Eigen::Index>(P.gamma_index)) = 1.0;
        parallel_for(n, [&](std::size_t k) {
            ComplexLmiBlock b = detail::base_block(maps, k, nw);
            ComplexMatrix Hg = ComplexMatrix::Zero(b.H0.rows(), b.H0.cols());
            Hg.topLeftCorner(nw, nw).setIdentity();
            b.terms.emplace_back(P.gamma_index, std::move(Hg));
            P.blocks[k] = std::move(b);
        });
    } else {
        const auto per = static_cast<std::size_t>(nw * nw);
        P.num_vars = P.num_theta + n * per;
        P.cost = RealVector::Zero(static_cast<Eigen::Index>(P.num_vars));
        P.gamma_offset.resize(n);
        const auto q = band_quadrature_weights(plant.grid);
        for (std::size_t k = 0; k < n; ++k) {
            P.gamma_offset[k] = P.num_theta + k * per;
            for (Eigen::Index i = 0; i < nw; ++i) {
                P.cost(static_cast<Eigen::Index>(P.gamma_offset[k]) + i) = q[k] / std::numbers::pi;
            }
        }
        parallel_for(n, [&](std::size_t k) {
            ComplexLmiBlock b = detail::base_block(maps, k, nw);
            const Eigen::Index dim = b.H0.rows();
            std::size_t v = P.gamma_offset[k];
            for (Eigen::Index i = 0; i < nw; ++i) {
                ComplexMatrix H = ComplexMatrix::Zero(dim, dim);
                H(i, i) = 1.0;
                b.terms.emplace_back(v++, std::move(H));
            }
            for (Eigen::Index i = 0; i < nw; ++i) {
                for (Eigen::Index j = i + 1; j < nw; ++j) {
                    ComplexMatrix Hr = ComplexMatrix::Zero(dim, dim);
                    Hr(i, j) = Hr(j, i) = 1.0;
                    b.terms.emplace_back(v++, std::move(Hr));
                    ComplexMatrix Hi = ComplexMatrix::Zero(dim, dim);
                    Hi(i, j) = cdouble(0.0, 1.0);
                    Hi(j, i) = cdouble(0.0, -1.0);
                    b.terms.emplace_back(v++, std::move(Hi));
                }
            }
            P.blocks[k] = std::move(b);
        });
    }
    detail::add_theta_rows(P, opt);
    detail::add_regularizer(P, opt);
    return P;
}

/// Spatial-regret problem: Gamma = gamma I + That* That, gamma free in sign.
inline SdpProblem build_regret_lmi(const GeneralizedPlantFrf& plant, const PhiMaps& maps, const OracleData& oracle,
                                   const LmiOptions& opt = {}) {
    if (!(oracle.T_hat.grid == plant.grid) || oracle.T_hat.size() != plant.size() || !(maps.grid == plant.grid)) {
        throw Error(Errc::GridMismatch, "oracle closed loop is sampled on a different grid");
    }
    const Eigen::Index nw = plant.n_w();
    const std::size_t n = maps.size();
    SdpProblem P;
    P.kind = ObjectiveKind::SpatialRegret;
    P.num_theta = maps.num_theta;
    P.n_w = nw;
    P.gamma_index = P.num_theta;
    P.num_vars = P.num_theta + 1;
    P.cost = RealVector::Zero(static_cast<Eigen::Index>(P.num_vars));
    P.cost(static_cast<Eigen::Index>(P.gamma_index)) = 1.0;
    P.blocks.resize(n);
    parallel_for(n, [&](std::size_t k) {
        const ComplexMatrix& Th = oracle.T_hat[k];
        if (Th.rows() != plant.n_z() || Th.cols() != nw) {
            throw Error(Errc::DimensionMismatch, "oracle closed loop has wrong shape");
        }
        ComplexLmiBlock b = detail::base_block(maps, k, nw);
        b.H0.topLeftCorner(nw, nw) += Th.adjoint() * Th;
        ComplexMatrix Hg = ComplexMatrix::Zero(b.H0.rows(), b.H0.cols());
        Hg.topLeftCorner(nw, nw).setIdentity();
        b.terms.emplace_back(P.gamma_index, std::move(Hg));
        P.blocks[k] = std::move(b);
    });
    detail::add_theta_rows(P, opt);
    detail::add_regularizer(P, opt);
    return P;
}

struct SdpSolution {
    RealVector theta;
    double gamma = std::numeric_limits<double>::quiet_NaN();
    std::vector<ComplexMatrix> Gamma; // H2 only, per block
    RealVector y;
    sdp::Status status = sdp::Status::NumericalFailure;
    sdp::Result diagnostics;
    double max_psd_residual = 0.0;
};

/// Hermitian Gamma of block k (H2 problems).
inline ComplexMatrix extract_gamma(const SdpProblem& P, const RealVector& y, std::size_t k) {
    const Eigen::Index nw = P.n_w;
    ComplexMatrix G = ComplexMatrix::Zero(nw, nw);
    auto v = static_cast<Eigen::Index>(P.gamma_offset[k]);
    for (Eigen::Index i = 0; i < nw; ++i) {
        G(i, i) = y(v++);
    }
    for (Eigen::Index i = 0; i < nw; ++i) {
        for (Eigen::Index j = i + 1; j < nw; ++j) {
            const cdouble e(y(v), y(v + 1));
            v += 2;
            G(i, j) = e;
            G(j, i) = std::conj(e);
        }
    }
    return G;
}

/// Embeds every complex block into the real PSD cone and solves.
inline SdpSolution solve_sdp(const SdpProblem& P, const sdp::Settings& settings = {}) {
    sdp::Program prog;
    prog.num_vars = P.num_vars;
    prog.cost = P.cost;
    prog.blocks.resize(P.blocks.size());
    parallel_for(P.blocks.size(), [&](std::size_t k) {
        const auto& cb = P.blocks[k];
        sdp::LmiBlock rb;
        rb.F0 = hermitian_embed(HermitianMatrix(cb.H0));
        rb.terms.reserve(cb.terms.size());
        for (const auto& [v, H] : cb.terms) {
            rb.terms.push_back({v, hermitian_embed(HermitianMatrix(H))});
        }
        prog.blocks[k] = std::move(rb);
    });
    if (P.regularizer) {
        prog.blocks.push_back(*P.regularizer);
    }
    prog.rows = P.rows;

    SdpSolution sol;
    sol.diagnostics = sdp::solve(prog, settings);
    sol.status = sol.diagnostics.status;
    sol.y = sol.diagnostics.y;
    sol.theta = sol.y.head(static_cast<Eigen::Index>(P.num_theta));
    if (P.gamma_index != kNoIndex) {
        sol.gamma = sol.y(static_cast<Eigen::Index>(P.gamma_index));
    } else {
        sol.Gamma.resize(P.blocks.size());
        double g = 0.0;
        for (std::size_t k = 0; k < P.blocks.size(); ++k) {
            sol.Gamma[k] = extract_gamma(P, sol.y, k);
            for (Eigen::Index i = 0; i < P.n_w; ++i) {
                g += P.cost(static_cast<Eigen::Index>(P.gamma_offset[k]) + i) * sol.Gamma[k](i, i).real();
            }
        }
        sol.gamma = g;
    }
    double worst = 0.0;
    for (const auto& b : P.blocks) {
        worst = std::max(worst, psd_residual(HermitianMatrix(b.evaluate(sol.y))));
    }
    sol.max_psd_residual = worst;
    return sol;
}

// ---------------------------------------------------------------------------
// Stability certificates.

/// Total unwrapped phase change of det(Y - X G22) along the grid.
inline double return_difference_phase(const GeneralizedPlantFrf& plant, const ControllerFactors& f) {
    double total = 0.0;
    double prev = 0.0;
    for (std::size_t k = 0; k < plant.size(); ++k) {
        const cdouble z = std::polar(1.0, plant.grid.omegas[k] * plant.grid.Ts);
        const ComplexMatrix Q = f.Y(z) - f.X(z) * plant.G22[k];
        const double ph = std::arg(Q.determinant());
        if (k > 0) {
            double d = ph - prev;
            while (d > std::numbers::pi) {
                d -= 2.0 * std::numbers::pi;
            }
            while (d < -std::numbers::pi) {
                d += 2.0 * std::numbers::pi;
            }
            total += d;
        }
        prev = ph;
    }
    return total;
}

/// Spectral radii within this distance of 1 count as not stabilizing.
inline constexpr double kStabilityMargin = 1e-9;

struct StabilityCertificate {
    bool stable = false;
    double spectral_radius = std::numeric_limits<double>::quiet_NaN(); // model-based
    double phase_change = std::numeric_limits<double>::quiet_NaN();    // model-free
};

// ---------------------------------------------------------------------------
// Outer iteration.

struct SynthesisConfig {
    int max_iter = 30;
    double rel_tol = 1e-4;
    double monotone_slack = 1e-6;
    bool record_timing = true;
    LmiOptions lmi;
    sdp::Settings solver;
};

struct IterationRecord {
    int iter = 0;
    double gamma = 0.0;
    double solve_time = 0.0;
    double spectral_radius = std::numeric_limits<double>::quiet_NaN();
    double phase_change = std::numeric_limits<double>::quiet_NaN();
    sdp::Status status = sdp::Status::Optimal;
    int solver_iterations = 0;
    double psd_residual = 0.0;
};

struct SynthesisReport {
    ObjectiveKind kind = ObjectiveKind::Hinf;
    std::vector<IterationRecord> history;
    ControllerFactors final;
    double initial_spectral_radius = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;

    [[nodiscard]] double final_gamma() const {
        return history.empty() ? std::numeric_limits<double>::quiet_NaN() : history.back().gamma;
    }
};

/// Synthesis failure carrying the report up to the last certified iterate.
class SynthesisError : public Error {
public:
    SynthesisError(Errc code, int iter, const std::string& what, SynthesisReport report)
        : Error(code, "iteration " + std::to_string(iter) + ": " + what), iter_(iter),
          report_(std::move(report)) {}

    [[nodiscard]] int iteration() const noexcept { return iter_; }
    [[nodiscard]] const SynthesisReport& report() const noexcept { return report_; }

private:
    int iter_;
    SynthesisReport report_;
};

namespace detail {

inline StabilityCertificate certify(const GeneralizedPlantFrf& plant, const ControllerFactors& f,
                                    const StateSpaceModel* truth, double reference_phase) {
    StabilityCertificate c;
    c.phase_change = return_difference_phase(plant, f);
    if (truth != nullptr) {
        try {
            c.spectral_radius = closed_loop_spectral_radius(*truth, realize_controller(f, truth->Ts));
            c.stable = c.spectral_radius < 1.0 - kStabilityMargin;
        } catch (const Error&) {
            c.stable = false;
        }
    } else {
        c.stable = std::isfinite(c.phase_change) && std::abs(c.phase_change - reference_phase) < std::numbers::pi;
    }
    return c;
}

} // namespace detail

/// Iterates build maps -> build LMIs -> solve -> accept. With a true model the
/// certificate is the closed-loop spectral radius, otherwise the winding of
/// det(Y - X G22) along the grid relative to the previous iterate.
inline SynthesisReport iterate_synthesis(const GeneralizedPlantFrf& plant, const FactorParameterization& param,
                                         const RealVector& theta_init, ObjectiveKind kind,
                                         const OracleData* oracle, const SynthesisConfig& cfg,
                                         const StateSpaceModel* truth = nullptr) {
    if (kind == ObjectiveKind::SpatialRegret && oracle == nullptr) {
        throw Error(Errc::Config, "spatial-regret synthesis needs oracle data");
    }
    if (cfg.max_iter < 1) {
        throw Error(Errc::Config, "max_iter must be >= 1");
    }
    const FactorMaps fm = realize_factors(param, plant.grid);
    SynthesisReport rep;
    rep.kind = kind;
    rep.final = make_factors(param, theta_init);

    const auto init = detail::certify(plant, rep.final, truth, 0.0);
    rep.initial_spectral_radius = init.spectral_radius;
    if (truth != nullptr && !init.stable) {
        throw SynthesisError(Errc::StabilityLost, 0, "initial controller is not stabilizing", rep);
    }
    double ref_phase = init.phase_change;
    RealVector theta_c = theta_init;
    double prev_gamma = std::numeric_limits<double>::infinity();

    for (int it = 1; it <= cfg.max_iter; ++it) {
        const auto t0 = std::chrono::steady_clock::now();
        const PhiMaps maps = build_phi_maps(plant, fm, theta_c);
        const SdpProblem P = kind == ObjectiveKind::SpatialRegret ? build_regret_lmi(plant, maps, *oracle, cfg.lmi)
                                                                  : build_norm_lmi(plant, maps, kind, cfg.lmi);
        const SdpSolution sol = solve_sdp(P, cfg.solver);
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (sol.status != sdp::Status::Optimal) {
            std::ostringstream os;
            os << "solver status " << sdp::to_string(sol.status) << " (" << sol.diagnostics.message
               << ", pinf=" << sol.diagnostics.primal_infeasibility
               << ", dinf=" << sol.diagnostics.dual_infeasibility << ", gap=" << sol.diagnostics.relative_gap << ")";
            throw SynthesisError(Errc::SolverFailed, it, os.str(), rep);
        }
        const ControllerFactors cand = make_factors(param, sol.theta);
        const auto cert = detail::certify(plant, cand, truth, ref_phase);
        if (!cert.stable) {
            std::ostringstream os;
            os.precision(17);
            os << "candidate controller is not stabilizing (spectral radius " << cert.spectral_radius
               << ", phase change " << cert.phase_change << ")";
            throw SynthesisError(Errc::StabilityLost, it, os.str(), rep);
        }
        IterationRecord r;
        r.iter = it;
        r.gamma = sol.gamma;
        r.solve_time = cfg.record_timing ? dt : 0.0;
        r.spectral_radius = cert.spectral_radius;
        r.phase_change = cert.phase_change;
        r.status = sol.status;
        r.solver_iterations = sol.diagnostics.iterations;
        r.psd_residual = sol.max_psd_residual;
        rep.history.push_back(r);
        rep.final = cand;
        ref_phase = cert.phase_change;
        theta_c = sol.theta;
        if (std::isfinite(prev_gamma) &&
            std::abs(sol.gamma - prev_gamma) <= cfg.rel_tol * std::max(1.0, std::abs(sol.gamma))) {
            rep.converged = true;
            break;
        }
        prev_gamma = sol.gamma;
    }
    return rep;
}

/// True when the gamma history is nonincreasing within the relative slack.
inline bool gamma_nonincreasing(const SynthesisReport& rep, double slack = 1e-6) {
    for (std::size_t i = 1; i < rep.history.size(); ++i) {
        const double a = rep.history[i - 1].gamma;
        const double b = rep.history[i].gamma;
        if (b > a + slack * std::max(1.0, std::abs(a))) {
            return false;
        }
    }
    return true;
}

/// Synthesizes the oracle over a superset pattern, starting from K = 0.
inline OracleData synthesize_oracle(const GeneralizedPlantFrf& plant, const SparsityPattern& superset,
                                    const SparsityPattern& target, ObjectiveKind kind, int order, double pole,
                                    const SynthesisConfig& cfg, const StateSpaceModel* truth = nullptr,
                                    SynthesisReport* report_out = nullptr) {
    if (kind == ObjectiveKind::SpatialRegret) {
        throw Error(Errc::Config, "oracle objective must be h2 or hinf");
    }
    if (!pattern_contains(superset, target)) {
        throw Error(Errc::NotASuperset, "oracle pattern does not contain the controller pattern");
    }
    const FactorParameterization param = build_factor_parameterization(superset, order, pole);
    SynthesisReport rep = iterate_synthesis(plant, param, param.zero_controller(), kind, nullptr, cfg, truth);
    OracleData o;
    o.factors = rep.final;
    o.T_hat = closed_loop_frf(plant, sample_controller(o.factors, plant.grid));
    o.kind = kind;
    o.value = kind == ObjectiveKind::Hinf ? std::pow(hinf_norm(o.T_hat), 2) : h2_norm_squared(o.T_hat);
    if (report_out != nullptr) {
        *report_out = std::move(rep);
    }
    return o;
}

} // namespace ddsr
