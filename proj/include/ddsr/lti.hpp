#pragma once

// Discrete-time state-space models, networked assembly, simulation and exact
// frequency response.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <sstream>
#include <utility>
#include <vector>

#include "ddsr/error.hpp"
#include "ddsr/grid.hpp"
#include "ddsr/hermitian.hpp"
#include "ddsr/parallel.hpp"

namespace ddsr {

/// Complex samples of one transfer matrix on a frequency grid.
struct FrfBlock {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    std::vector<ComplexMatrix> samples;

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    const ComplexMatrix& operator[](std::size_t k) const { return samples[k]; }
    ComplexMatrix& operator[](std::size_t k) { return samples[k]; }
};

/// x+ = A x + B [w; u],  [z; y] = C x + D [w; u].
///
/// The first `n_w` inputs are disturbances and the first `n_z` outputs are
/// performance channels. A plain input/output model (e.g. a controller) has
/// n_w = n_z = 0, so all of its inputs count as u and all outputs as y.
struct StateSpaceModel {
    RealMatrix A;
    RealMatrix B;
    RealMatrix C;
    RealMatrix D;
    double Ts = 1.0;
    Eigen::Index n_w = 0;
    Eigen::Index n_z = 0;

    [[nodiscard]] Eigen::Index states() const noexcept { return A.rows(); }
    [[nodiscard]] Eigen::Index inputs() const noexcept { return B.cols(); }
    [[nodiscard]] Eigen::Index outputs() const noexcept { return C.rows(); }
    [[nodiscard]] Eigen::Index n_u() const noexcept { return inputs() - n_w; }
    [[nodiscard]] Eigen::Index n_y() const noexcept { return outputs() - n_z; }

    [[nodiscard]] RealMatrix B1() const { return B.leftCols(n_w); }
    [[nodiscard]] RealMatrix B2() const { return B.rightCols(n_u()); }
    [[nodiscard]] RealMatrix C1() const { return C.topRows(n_z); }
    [[nodiscard]] RealMatrix C2() const { return C.bottomRows(n_y()); }
    [[nodiscard]] RealMatrix D11() const { return D.topLeftCorner(n_z, n_w); }
    [[nodiscard]] RealMatrix D12() const { return D.topRightCorner(n_z, n_u()); }
    [[nodiscard]] RealMatrix D21() const { return D.bottomLeftCorner(n_y(), n_w); }
    [[nodiscard]] RealMatrix D22() const { return D.bottomRightCorner(n_y(), n_u()); }

    void validate() const {
        const auto n = A.rows();
        const bool ok = A.cols() == n && B.rows() == n && C.cols() == n && D.rows() == C.rows() &&
                        D.cols() == B.cols() && n_w >= 0 && n_w <= B.cols() && n_z >= 0 &&
                        n_z <= C.rows();
        if (!ok) {
            std::ostringstream os;
            os << "inconsistent state-space dimensions A " << A.rows() << "x" << A.cols() << ", B "
               << B.rows() << "x" << B.cols() << ", C " << C.rows() << "x" << C.cols() << ", D "
               << D.rows() << "x" << D.cols() << ", n_w=" << n_w << ", n_z=" << n_z;
            throw Error(Errc::DimensionMismatch, os.str());
        }
        if (!(Ts > 0.0)) {
            throw Error(Errc::DimensionMismatch, "Ts must be positive");
        }
        if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !D.allFinite()) {
            throw Error(Errc::DimensionMismatch, "state-space matrices contain non-finite entries");
        }
    }
};

struct NodeDims {
    Eigen::Index n = 0;  // states
    Eigen::Index m = 0;  // control inputs
    Eigen::Index p = 0;  // measurements
    Eigen::Index nw = 0; // disturbances
    Eigen::Index nz = 0; // performance outputs
};

/// Graph-structured plant. Edge {from, to} means node `from` is a neighbour of
/// node `to`: blocks indexed [to, from] may be nonzero. Every node is its own
/// neighbour. Missing blocks are zero.
struct NetworkedSystem {
    using Key = std::pair<std::size_t, std::size_t>;

    double Ts = 1.0;
    std::vector<NodeDims> nodes;
    std::vector<std::pair<std::size_t, std::size_t>> edges;

    std::map<Key, RealMatrix> A, B1, C1, C2, D11, D21;
    std::map<std::size_t, RealMatrix> B2, D12, D22;

    [[nodiscard]] bool is_neighbour(std::size_t i, std::size_t j) const {
        if (i == j) {
            return true;
        }
        for (const auto& [from, to] : edges) {
            if (from == j && to == i) {
                return true;
            }
        }
        return false;
    }
};

/// Per-bus swing-equation parameters (per unit).
struct PowerGridParams {
    std::size_t bus_count = 5;
    std::vector<double> inertia;
    std::vector<double> damping;
    RealMatrix coupling; // symmetric, nonzero on lines
    std::vector<double> self_stiffness; // k_i per bus; empty means the sum of incident couplings
    double Ts = 0.02;

    /// Line graph 1-2-...-N with identical buses.
    static PowerGridParams uniform_line(std::size_t buses, double m, double d, double k, double Ts) {
        PowerGridParams p;
        p.bus_count = buses;
        p.inertia.assign(buses, m);
        p.damping.assign(buses, d);
        p.coupling = RealMatrix::Zero(static_cast<Eigen::Index>(buses), static_cast<Eigen::Index>(buses));
        for (std::size_t i = 0; i + 1 < buses; ++i) {
            const auto a = static_cast<Eigen::Index>(i);
            p.coupling(a, a + 1) = k;
            p.coupling(a + 1, a) = k;
        }
        p.Ts = Ts;
        return p;
    }

    /// Five-bus network used in the case study: m = d = 2, k = 20, Ts = 0.02 s,
    /// every bus with self-stiffness 2k so the end buses stay grounded.
    static PowerGridParams case_study() {
        auto p = uniform_line(5, 2.0, 2.0, 20.0, 0.02);
        p.self_stiffness.assign(5, 40.0);
        return p;
    }
};

/// Time-major record: column t holds the signal at step t, t = 0..T-1.
struct SimulationTrace {
    RealMatrix x, u, w, y, z;

    [[nodiscard]] Eigen::Index steps() const noexcept { return x.cols(); }
};

namespace detail {

struct Offsets {
    std::vector<Eigen::Index> n, m, p, nw, nz;
    Eigen::Index N = 0, M = 0, P = 0, NW = 0, NZ = 0;
};

inline Offsets node_offsets(const std::vector<NodeDims>& nodes) {
    Offsets o;
    for (const auto& d : nodes) {
        o.n.push_back(o.N);
        o.m.push_back(o.M);
        o.p.push_back(o.P);
        o.nw.push_back(o.NW);
        o.nz.push_back(o.NZ);
        o.N += d.n;
        o.M += d.m;
        o.P += d.p;
        o.NW += d.nw;
        o.NZ += d.nz;
    }
    return o;
}

inline void dim_error(std::size_t i, std::size_t j, const char* what) {
    std::ostringstream os;
    os << "block " << what << "[" << i << "," << j << "]";
    throw Error(Errc::DimensionMismatch, os.str());
}

} // namespace detail

/// Monolithic model with block rows/columns in node order.
inline StateSpaceModel assemble_networked(const NetworkedSystem& sys) {
    const auto off = detail::node_offsets(sys.nodes);
    const std::size_t N = sys.nodes.size();
    for (const auto& [from, to] : sys.edges) {
        if (from >= N || to >= N) {
            detail::dim_error(to, from, "edge");
        }
    }

    StateSpaceModel out;
    out.Ts = sys.Ts;
    out.n_w = off.NW;
    out.n_z = off.NZ;
    out.A = RealMatrix::Zero(off.N, off.N);
    out.B = RealMatrix::Zero(off.N, off.NW + off.M);
    out.C = RealMatrix::Zero(off.NZ + off.P, off.N);
    out.D = RealMatrix::Zero(off.NZ + off.P, off.NW + off.M);

    auto place = [&](const std::map<NetworkedSystem::Key, RealMatrix>& blocks, const char* name,
                     auto row_off, auto row_dim, auto col_off, auto col_dim, Eigen::Index base_r,
                     Eigen::Index base_c, RealMatrix& target) {
        for (const auto& [key, blk] : blocks) {
            const auto [i, j] = key;
            if (i >= N || j >= N || !sys.is_neighbour(i, j)) {
                detail::dim_error(i, j, name);
            }
            if (blk.rows() != row_dim(i) || blk.cols() != col_dim(j)) {
                detail::dim_error(i, j, name);
            }
            target.block(base_r + row_off(i), base_c + col_off(j), blk.rows(), blk.cols()) = blk;
        }
    };
    auto n_off = [&](std::size_t i) { return off.n[i]; };
    auto n_dim = [&](std::size_t i) { return sys.nodes[i].n; };
    auto nw_off = [&](std::size_t i) { return off.nw[i]; };
    auto nw_dim = [&](std::size_t i) { return sys.nodes[i].nw; };
    auto nz_off = [&](std::size_t i) { return off.nz[i]; };
    auto nz_dim = [&](std::size_t i) { return sys.nodes[i].nz; };
    auto p_off = [&](std::size_t i) { return off.p[i]; };
    auto p_dim = [&](std::size_t i) { return sys.nodes[i].p; };

    place(sys.A, "A", n_off, n_dim, n_off, n_dim, 0, 0, out.A);
    place(sys.B1, "B1", n_off, n_dim, nw_off, nw_dim, 0, 0, out.B);
    place(sys.C1, "C1", nz_off, nz_dim, n_off, n_dim, 0, 0, out.C);
    place(sys.C2, "C2", p_off, p_dim, n_off, n_dim, off.NZ, 0, out.C);
    place(sys.D11, "D11", nz_off, nz_dim, nw_off, nw_dim, 0, 0, out.D);
    place(sys.D21, "D21", p_off, p_dim, nw_off, nw_dim, off.NZ, 0, out.D);

    auto place_diag = [&](const std::map<std::size_t, RealMatrix>& blocks, const char* name, auto row_off,
                          auto row_dim, Eigen::Index base_r, Eigen::Index base_c, RealMatrix& target) {
        for (const auto& [i, blk] : blocks) {
            if (i >= N || blk.rows() != row_dim(i) || blk.cols() != sys.nodes[i].m) {
                detail::dim_error(i, i, name);
            }
            target.block(base_r + row_off(i), base_c + off.m[i], blk.rows(), blk.cols()) = blk;
        }
    };
    place_diag(sys.B2, "B2", n_off, n_dim, 0, off.NW, out.B);
    place_diag(sys.D12, "D12", nz_off, nz_dim, 0, off.NW, out.D);
    place_diag(sys.D22, "D22", p_off, p_dim, off.NZ, off.NW, out.D);

    out.validate();
    return out;
}

/// Swing dynamics of a bus network. Node i has state [phase; frequency], one
/// disturbance entering both the frequency dynamics and the measurement, one
/// control input, the phase as measurement, and performance output
/// z = [phase deviation; control input].
inline NetworkedSystem build_power_grid(const PowerGridParams& p) {
    const std::size_t N = p.bus_count;
    if (N < 2 || p.inertia.size() != N || p.damping.size() != N ||
        p.coupling.rows() != static_cast<Eigen::Index>(N) || p.coupling.cols() != static_cast<Eigen::Index>(N) ||
        (!p.self_stiffness.empty() && p.self_stiffness.size() != N)) {
        throw Error(Errc::DimensionMismatch, "power grid parameters inconsistent with bus_count");
    }
    if (!(p.Ts > 0.0)) {
        throw Error(Errc::DimensionMismatch, "Ts must be positive");
    }
    const double Ts = p.Ts;
    NetworkedSystem sys;
    sys.Ts = Ts;
    sys.nodes.assign(N, NodeDims{2, 1, 1, 1, 2});
    for (std::size_t i = 0; i < N; ++i) {
        if (!(p.inertia[i] > 0.0)) {
            throw Error(Errc::DimensionMismatch, "inertia must be positive");
        }
        for (std::size_t j = 0; j < N; ++j) {
            const auto a = static_cast<Eigen::Index>(i);
            const auto b = static_cast<Eigen::Index>(j);
            if (i != j && p.coupling(a, b) != 0.0) {
                if (p.coupling(a, b) != p.coupling(b, a)) {
                    throw Error(Errc::DimensionMismatch, "coupling must be symmetric");
                }
                sys.edges.emplace_back(j, i);
            }
        }
    }
    for (std::size_t i = 0; i < N; ++i) {
        const auto a = static_cast<Eigen::Index>(i);
        const double mi = p.inertia[i];
        const double di = p.damping[i];
        double ki = 0.0;
        if (!p.self_stiffness.empty()) {
            ki = p.self_stiffness[i];
        } else {
            for (std::size_t j = 0; j < N; ++j) {
                if (j != i) {
                    ki += p.coupling(a, static_cast<Eigen::Index>(j));
                }
            }
        }
        RealMatrix aii(2, 2);
        aii << 1.0, Ts, -(ki / mi) * Ts, 1.0 - (di / mi) * Ts;
        sys.A[{i, i}] = aii;
        for (std::size_t j = 0; j < N; ++j) {
            const double kij = p.coupling(a, static_cast<Eigen::Index>(j));
            if (j != i && kij != 0.0) {
                RealMatrix aij = RealMatrix::Zero(2, 2);
                aij(1, 0) = (kij / mi) * Ts;
                sys.A[{i, j}] = aij;
            }
        }
        sys.B1[{i, i}] = (RealMatrix(2, 1) << 0.0, 1.0).finished();
        sys.B2[i] = (RealMatrix(2, 1) << 0.0, Ts / mi).finished();
        sys.C1[{i, i}] = (RealMatrix(2, 2) << 1.0, 0.0, 0.0, 0.0).finished();
        sys.D12[i] = (RealMatrix(2, 1) << 0.0, 1.0).finished();
        sys.C2[{i, i}] = (RealMatrix(1, 2) << 1.0, 0.0).finished();
        sys.D21[{i, i}] = RealMatrix::Ones(1, 1);
    }
    return sys;
}

/// Runs the state recursion for T steps from x0. Each signal matrix has one
/// column per step and may be longer than T. Empty u or w are read as zero when
/// the model has no such channels.
inline SimulationTrace simulate(const StateSpaceModel& model, const RealMatrix& u, const RealMatrix& w,
                                const RealVector& x0, Eigen::Index T) {
    model.validate();
    const auto n = model.states();
    const auto nu = model.n_u();
    const auto nw = model.n_w;
    auto check = [&](const RealMatrix& s, Eigen::Index rows, const char* name) {
        if (rows == 0) {
            return;
        }
        if (s.rows() != rows || s.cols() < T) {
            std::ostringstream os;
            os << name << " sequence is " << s.rows() << "x" << s.cols() << ", need " << rows << "x>=" << T;
            throw Error(Errc::DimensionMismatch, os.str());
        }
    };
    check(u, nu, "u");
    check(w, nw, "w");
    if (x0.size() != n) {
        throw Error(Errc::DimensionMismatch, "x0 has wrong length");
    }
    SimulationTrace tr;
    tr.x.resize(n, T);
    tr.u = nu > 0 ? RealMatrix(u.leftCols(T)) : RealMatrix(0, T);
    tr.w = nw > 0 ? RealMatrix(w.leftCols(T)) : RealMatrix(0, T);
    tr.y.resize(model.n_y(), T);
    tr.z.resize(model.n_z, T);

    const RealMatrix B1 = model.B1(), B2 = model.B2(), C1 = model.C1(), C2 = model.C2();
    const RealMatrix D11 = model.D11(), D12 = model.D12(), D21 = model.D21(), D22 = model.D22();
    RealVector x = x0;
    for (Eigen::Index t = 0; t < T; ++t) {
        tr.x.col(t) = x;
        RealVector next = model.A * x;
        RealVector zt = C1 * x;
        RealVector yt = C2 * x;
        if (nw > 0) {
            next.noalias() += B1 * tr.w.col(t);
            zt.noalias() += D11 * tr.w.col(t);
            yt.noalias() += D21 * tr.w.col(t);
        }
        if (nu > 0) {
            next.noalias() += B2 * tr.u.col(t);
            zt.noalias() += D12 * tr.u.col(t);
            yt.noalias() += D22 * tr.u.col(t);
        }
        tr.z.col(t) = zt;
        tr.y.col(t) = yt;
        x = next;
    }
    return tr;
}

/// Relative threshold on sigma_min(zI - A) for declaring a pole on the grid.
inline constexpr double kPoleOnGridTol = 1e-12;

/// C (zI - A)^-1 B + D at z = e^{j omega Ts} for every grid frequency.
inline FrfBlock frequency_response(const StateSpaceModel& model, const FrequencyGrid& grid) {
    model.validate();
    const auto n = model.states();
    FrfBlock out;
    out.rows = model.outputs();
    out.cols = model.inputs();
    out.samples.resize(grid.size());
    const ComplexMatrix A = model.A.cast<cdouble>();
    const ComplexMatrix B = model.B.cast<cdouble>();
    const ComplexMatrix C = model.C.cast<cdouble>();
    const ComplexMatrix D = model.D.cast<cdouble>();
    const double scale = std::max(1.0, model.A.norm());
    parallel_for(grid.size(), [&](std::size_t k) {
        const double omega = grid.omegas[k];
        const cdouble z = std::polar(1.0, omega * model.Ts);
        if (n == 0) {
            out.samples[k] = D;
            return;
        }
        const ComplexMatrix zia = z * ComplexMatrix::Identity(n, n) - A;
        Eigen::PartialPivLU<ComplexMatrix> lu(zia);
        const double rc = lu.rcond();
        if (!(rc > kPoleOnGridTol / scale)) {
            std::ostringstream os;
            os.precision(17);
            os << "omega=" << omega << " (rcond " << rc << ")";
            throw Error(Errc::PoleOnGrid, os.str());
        }
        out.samples[k] = C * lu.solve(B) + D;
    });
    return out;
}

/// Evaluates the model at a single complex point z (used by oracles and tests).
inline ComplexMatrix evaluate_at(const StateSpaceModel& model, cdouble z) {
    const auto n = model.states();
    if (n == 0) {
        return model.D.cast<cdouble>();
    }
    const ComplexMatrix zia = z * ComplexMatrix::Identity(n, n) - model.A.cast<cdouble>();
    return model.C.cast<cdouble>() * zia.partialPivLu().solve(model.B.cast<cdouble>()) + model.D.cast<cdouble>();
}

inline double spectral_radius(const RealMatrix& A) {
    if (A.rows() == 0) {
        return 0.0;
    }
    Eigen::EigenSolver<RealMatrix> es(A, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Threshold on sigma_min(I - D22 DK) for a well-posed interconnection.
inline constexpr double kWellPosedTol = 1e-12;

/// Closes u = K y around the plant and returns the map w -> z. The result has
/// all inputs flagged as disturbances and all outputs as performance channels;
/// the state is [plant state; controller state].
inline StateSpaceModel close_loop(const StateSpaceModel& plant, const StateSpaceModel& controller) {
    plant.validate();
    controller.validate();
    const auto ny = plant.n_y();
    const auto nu = plant.n_u();
    if (controller.inputs() != ny || controller.outputs() != nu) {
        std::ostringstream os;
        os << "controller is " << controller.outputs() << "x" << controller.inputs() << ", plant needs " << nu
           << "x" << ny;
        throw Error(Errc::DimensionMismatch, os.str());
    }
    const RealMatrix D22 = plant.D22();
    const RealMatrix& Dk = controller.D;
    const RealMatrix ret = RealMatrix::Identity(ny, ny) - D22 * Dk;
    const double smin = ny == 0 ? 1.0 : Eigen::JacobiSVD<RealMatrix>(ret).singularValues().minCoeff();
    if (!(smin > kWellPosedTol)) {
        throw Error(Errc::IllPosedInterconnection, "I - D22*DK is singular");
    }
    // y = E (C2 x + D21 w + D22 Ck xi), u = Ck xi + Dk y.
    const RealMatrix E = ret.inverse();
    const auto n = plant.states();
    const auto nk = controller.states();
    const RealMatrix C2 = plant.C2(), D21 = plant.D21();
    const RealMatrix &Ak = controller.A, &Bk = controller.B, &Ck = controller.C;

    const RealMatrix y_x = E * C2;
    const RealMatrix y_xi = E * D22 * Ck;
    const RealMatrix y_w = E * D21;
    const RealMatrix u_x = Dk * y_x;
    const RealMatrix u_xi = Ck + Dk * y_xi;
    const RealMatrix u_w = Dk * y_w;

    StateSpaceModel cl;
    cl.Ts = plant.Ts;
    cl.A.resize(n + nk, n + nk);
    cl.A.topLeftCorner(n, n) = plant.A + plant.B2() * u_x;
    cl.A.topRightCorner(n, nk) = plant.B2() * u_xi;
    cl.A.bottomLeftCorner(nk, n) = Bk * y_x;
    cl.A.bottomRightCorner(nk, nk) = Ak + Bk * y_xi;
    cl.B.resize(n + nk, plant.n_w);
    cl.B.topRows(n) = plant.B1() + plant.B2() * u_w;
    cl.B.bottomRows(nk) = Bk * y_w;
    cl.C.resize(plant.n_z, n + nk);
    cl.C.leftCols(n) = plant.C1() + plant.D12() * u_x;
    cl.C.rightCols(nk) = plant.D12() * u_xi;
    cl.D = plant.D11() + plant.D12() * u_w;
    cl.n_w = plant.n_w;
    cl.n_z = plant.n_z;
    return cl;
}

/// Spectral radius of the closed-loop state matrix under u = K y.
inline double closed_loop_spectral_radius(const StateSpaceModel& plant, const StateSpaceModel& controller) {
    return spectral_radius(close_loop(plant, controller).A);
}

} // namespace ddsr
