#include <cmath>
#include <numbers>
#include <random>

#include <catch_amalgamated.hpp>

#include "ddsr/lti.hpp"
#include "ddsr/structure.hpp"

using namespace ddsr;
using Catch::Matchers::WithinAbs;

namespace {

StateSpaceModel scalar(double a, double b, double c, double d, double Ts = 1.0) {
    StateSpaceModel m;
    m.A = RealMatrix::Constant(1, 1, a);
    m.B = RealMatrix::Constant(1, 1, b);
    m.C = RealMatrix::Constant(1, 1, c);
    m.D = RealMatrix::Constant(1, 1, d);
    m.Ts = Ts;
    return m;
}

FrequencyGrid grid_of(std::vector<double> w, double Ts) {
    FrequencyGrid g;
    g.Ts = Ts;
    g.omegas = std::move(w);
    return g;
}

} // namespace

TEST_CASE("networked assembly of small systems") {
    NetworkedSystem one;
    one.nodes = {NodeDims{1, 1, 1, 0, 0}};
    one.A[{0, 0}] = RealMatrix::Constant(1, 1, 0.3);
    one.B2[0] = RealMatrix::Constant(1, 1, 1.0);
    one.C2[{0, 0}] = RealMatrix::Constant(1, 1, 1.0);
    const auto m1 = assemble_networked(one);
    REQUIRE(m1.states() == 1);
    REQUIRE(m1.A(0, 0) == 0.3);

    NetworkedSystem two;
    two.nodes = {NodeDims{1, 1, 1, 0, 0}, NodeDims{2, 1, 1, 0, 0}};
    two.A[{0, 0}] = RealMatrix::Constant(1, 1, 0.5);
    two.A[{1, 1}] = RealMatrix::Identity(2, 2) * 0.2;
    const auto m2 = assemble_networked(two);
    REQUIRE(m2.states() == 3);
    REQUIRE(m2.A.topRightCorner(1, 2).isZero(0.0));
    REQUIRE(m2.A.bottomLeftCorner(2, 1).isZero(0.0));

    NetworkedSystem bad = two;
    bad.A[{0, 1}] = RealMatrix::Ones(1, 2);
    REQUIRE_THROWS_AS(assemble_networked(bad), Error);
}

TEST_CASE("power grid blocks match the swing formulas") {
    const auto p = PowerGridParams::case_study();
    const auto sys = build_power_grid(p);
    RealMatrix aii(2, 2);
    aii << 1.0, 0.02, -0.4, 0.98;
    REQUIRE((sys.A.at({2, 2}) - aii).norm() < 1e-15);
    RealMatrix aij = RealMatrix::Zero(2, 2);
    aij(1, 0) = 0.2;
    REQUIRE((sys.A.at({2, 1}) - aij).norm() < 1e-15);
    REQUIRE((sys.A.at({2, 3}) - aij).norm() < 1e-15);
    RealMatrix b2(2, 1);
    b2 << 0.0, 0.01;
    REQUIRE((sys.B2.at(2) - b2).norm() < 1e-15);

    const auto m = assemble_networked(sys);
    REQUIRE(m.states() == 10);
    REQUIRE(m.n_w == 5);
    REQUIRE(m.n_z == 10);
    REQUIRE(m.n_u() == 5);
    REQUIRE(m.n_y() == 5);
    // Block tridiagonal: no coupling beyond nearest neighbours.
    for (Eigen::Index i = 0; i < 5; ++i) {
        for (Eigen::Index j = 0; j < 5; ++j) {
            if (std::abs(i - j) > 1) {
                REQUIRE(m.A.block(2 * i, 2 * j, 2, 2).isZero(0.0));
            }
        }
    }
    REQUIRE(spectral_radius(m.A) < 1.0);
}

TEST_CASE("sum-of-couplings stiffness leaves a rigid mode") {
    auto p = PowerGridParams::case_study();
    p.self_stiffness.clear();
    const auto m = assemble_networked(build_power_grid(p));
    REQUIRE_THAT(spectral_radius(m.A), WithinAbs(1.0, 1e-9));
    // Interior buses are unaffected by the choice.
    REQUIRE_THAT(build_power_grid(p).A.at({1, 1})(1, 0), WithinAbs(-0.4, 1e-15));
    REQUIRE_THAT(build_power_grid(p).A.at({0, 0})(1, 0), WithinAbs(-0.2, 1e-15));
}

TEST_CASE("simulation examples") {
    const auto integ = scalar(1.0, 1.0, 1.0, 0.0);
    RealMatrix u = RealMatrix::Zero(1, 6);
    u(0, 0) = 1.0;
    const auto tr = simulate(integ, u, RealMatrix(), RealVector::Zero(1), 6);
    REQUIRE(tr.x(0, 0) == 0.0);
    for (Eigen::Index t = 1; t < 6; ++t) {
        REQUIRE(tr.x(0, t) == 1.0);
    }

    const auto grid = assemble_networked(build_power_grid(PowerGridParams::case_study()));
    const auto zero = simulate(grid, RealMatrix::Zero(5, 20), RealMatrix::Zero(5, 20), RealVector::Zero(10), 20);
    REQUIRE(zero.x.isZero(0.0));
    REQUIRE(zero.z.isZero(0.0));
    REQUIRE_THROWS_AS(simulate(grid, RealMatrix::Zero(4, 20), RealMatrix::Zero(5, 20), RealVector::Zero(10), 20),
                      Error);
}

TEST_CASE("simulation satisfies the state recursion and is reproducible") {
    const auto m = assemble_networked(build_power_grid(PowerGridParams::case_study()));
    std::mt19937 rng(3);
    std::normal_distribution<double> n;
    RealMatrix u(5, 50), w(5, 50);
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        u.data()[i] = n(rng);
        w.data()[i] = n(rng);
    }
    RealVector x0 = RealVector::Zero(10);
    x0(3) = 0.5;
    const auto a = simulate(m, u, w, x0, 50);
    const auto b = simulate(m, u, w, x0, 50);
    REQUIRE(a.x == b.x);
    REQUIRE(a.z == b.z);
    REQUIRE(a.x.col(0) == x0);
    for (Eigen::Index t = 0; t + 1 < 50; ++t) {
        const RealVector next = m.A * a.x.col(t) + m.B1() * w.col(t) + m.B2() * u.col(t);
        REQUIRE((a.x.col(t + 1) - next).norm() <= 1e-12 * (1.0 + next.norm()));
        const RealVector y = m.C2() * a.x.col(t) + m.D21() * w.col(t) + m.D22() * u.col(t);
        REQUIRE((a.y.col(t) - y).norm() <= 1e-12 * (1.0 + y.norm()));
    }
}

TEST_CASE("frequency response examples") {
    const auto m = scalar(0.5, 1.0, 1.0, 0.0);
    const double nyq = std::numbers::pi * (1.0 - 1e-12);
    const auto fr = frequency_response(m, grid_of({0.0, nyq}, 1.0));
    REQUIRE_THAT(fr[0](0, 0).real(), WithinAbs(2.0, 1e-12));
    REQUIRE_THAT(fr[0](0, 0).imag(), WithinAbs(0.0, 1e-12));
    REQUIRE_THAT(fr[1](0, 0).real(), WithinAbs(-2.0 / 3.0, 1e-9));

    auto stat = scalar(0.5, 0.0, 1.0, 3.0);
    const auto fs = frequency_response(stat, grid_of({0.1, 1.0, 2.0}, 1.0));
    for (std::size_t k = 0; k < 3; ++k) {
        REQUIRE(fs[k](0, 0) == cdouble(3.0, 0.0));
    }

    const auto integ = scalar(1.0, 1.0, 1.0, 0.0);
    try {
        (void)frequency_response(integ, grid_of({0.0, 1.0}, 1.0));
        FAIL("expected PoleOnGrid");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::PoleOnGrid);
    }
}

TEST_CASE("network frequency response equals per-node evaluation") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    NetworkedSystem sys;
    sys.Ts = 0.1;
    sys.nodes = {NodeDims{1, 1, 1, 1, 1}, NodeDims{2, 1, 1, 1, 1}, NodeDims{1, 1, 1, 1, 1}};
    sys.edges = {{0, 1}, {1, 2}};
    auto rnd = [&](Eigen::Index r, Eigen::Index c) {
        RealMatrix m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            m.data()[i] = u(rng);
        }
        return m;
    };
    const Eigen::Index n[] = {1, 2, 1};
    for (std::size_t i = 0; i < 3; ++i) {
        sys.A[{i, i}] = rnd(n[i], n[i]);
        sys.B1[{i, i}] = rnd(n[i], 1);
        sys.B2[i] = rnd(n[i], 1);
        sys.C1[{i, i}] = rnd(1, n[i]);
        sys.C2[{i, i}] = rnd(1, n[i]);
        sys.D21[{i, i}] = rnd(1, 1);
        sys.D12[i] = rnd(1, 1);
    }
    sys.A[{1, 0}] = rnd(2, 1);
    sys.A[{2, 1}] = rnd(1, 2);
    const auto m = assemble_networked(sys);
    const auto g = grid_of({0.3, 1.7, 12.0}, sys.Ts);
    const auto fr = frequency_response(m, g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const cdouble z = std::exp(cdouble(0.0, g.omegas[k] * sys.Ts));
        const ComplexMatrix direct = evaluate_at(m, z);
        REQUIRE((fr[k] - direct).norm() <= 1e-12 * (1.0 + direct.norm()));
        // Input 0 of node 0 never reaches node 0's sensor except through its own state.
        const ComplexMatrix a00 = sys.A.at({0, 0}).cast<cdouble>();
        const cdouble g_node = (sys.C2.at({0, 0}).cast<cdouble>() *
                                (z * ComplexMatrix::Identity(1, 1) - a00).inverse() *
                                sys.B2.at(0).cast<cdouble>())(0, 0);
        REQUIRE(std::abs(fr[k](m.n_z + 0, m.n_w + 0) - g_node) <= 1e-12);
    }
}

TEST_CASE("Parseval: impulse energy on bus 1 matches the frequency integral") {
    const auto m = assemble_networked(build_power_grid(PowerGridParams::case_study()));
    const Eigen::Index T = 4000;
    RealMatrix w = RealMatrix::Zero(5, T);
    w(0, 0) = 1.0;
    const auto tr = simulate(m, RealMatrix::Zero(5, T), w, RealVector::Zero(10), T);
    const double time_energy = tr.z.squaredNorm();

    const std::size_t N = 40000;
    std::vector<double> om(N);
    for (std::size_t k = 0; k < N; ++k) {
        om[k] = (static_cast<double>(k) + 0.5) * std::numbers::pi / (m.Ts * static_cast<double>(N));
    }
    const auto fr = frequency_response(m, grid_of(om, m.Ts));
    double freq_energy = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
        freq_energy += fr[k].block(0, 0, m.n_z, 1).squaredNorm();
    }
    freq_energy /= static_cast<double>(N); // (1/pi) * integral over [0, pi] in normalized frequency
    REQUIRE(std::abs(time_energy - freq_energy) <= 0.01 * time_energy);
}

TEST_CASE("closed-loop spectral radius examples") {
    const auto plant_grid = assemble_networked(build_power_grid(PowerGridParams::case_study()));
    StateSpaceModel zero;
    zero.A = RealMatrix::Zero(0, 0);
    zero.B = RealMatrix::Zero(0, 5);
    zero.C = RealMatrix::Zero(5, 0);
    zero.D = RealMatrix::Zero(5, 5);
    zero.Ts = plant_grid.Ts;
    REQUIRE_THAT(closed_loop_spectral_radius(plant_grid, zero), WithinAbs(spectral_radius(plant_grid.A), 1e-14));

    // x+ = 0.5 x + u, y = x, K = -0.5.
    StateSpaceModel p = scalar(0.5, 1.0, 1.0, 0.0);
    const auto k = scalar(0.0, 0.0, 0.0, -0.5);
    StateSpaceModel kstatic;
    kstatic.A = RealMatrix::Zero(0, 0);
    kstatic.B = RealMatrix::Zero(0, 1);
    kstatic.C = RealMatrix::Zero(1, 0);
    kstatic.D = RealMatrix::Constant(1, 1, -0.5);
    REQUIRE_THAT(closed_loop_spectral_radius(p, kstatic), WithinAbs(0.0, 1e-15));
    REQUIRE_THAT(closed_loop_spectral_radius(p, k), WithinAbs(0.0, 1e-15));

    // y = x + u with K = 1 is ill posed.
    StateSpaceModel q = scalar(0.5, 1.0, 1.0, 1.0);
    kstatic.D(0, 0) = 1.0;
    try {
        (void)closed_loop_spectral_radius(q, kstatic);
        FAIL("expected IllPosedInterconnection");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::IllPosedInterconnection);
    }
}

TEST_CASE("controller realization reproduces Y^-1 X") {
    SparsityPattern one(1, 1);
    one.at(0, 0) = {EntryKind::Free, 0};
    const auto param = build_factor_parameterization(one, 1, 0.0);
    REQUIRE(param.size() == 4);

    // X = 1/z and Y = 1 - 0.5/z give K = 1/(z - 0.5).
    RealVector theta = RealVector::Zero(4);
    for (std::size_t s = 0; s < param.size(); ++s) {
        const auto& sl = param.slots[s];
        if (sl.factor == Factor::X && sl.basis == 1) {
            theta(static_cast<Eigen::Index>(s)) = 1.0;
        }
        if (sl.factor == Factor::Y && sl.basis == 0) {
            theta(static_cast<Eigen::Index>(s)) = 1.0;
        }
        if (sl.factor == Factor::Y && sl.basis == 1) {
            theta(static_cast<Eigen::Index>(s)) = -0.5;
        }
    }
    const auto f = make_factors(param, theta);
    const auto k = realize_controller(f, 1.0);
    for (double w : {0.0, 0.4, 1.3, 3.0}) {
        const cdouble z = std::exp(cdouble(0.0, w));
        const cdouble expect = 1.0 / (z - 0.5);
        REQUIRE(std::abs(evaluate_at(k, z)(0, 0) - expect) <= 1e-12);
    }

    const auto zero = realize_controller(make_factors(param, param.zero_controller()), 1.0);
    REQUIRE(zero.D.isZero(0.0));
    REQUIRE(evaluate_at(zero, cdouble(0.3, 0.8)).norm() == 0.0);
}
