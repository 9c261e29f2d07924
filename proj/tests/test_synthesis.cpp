#include <numbers>
#include <random>

#include <catch_amalgamated.hpp>

#include "ddsr/case_study.hpp"
#include "ddsr/synthesis.hpp"

using namespace ddsr;
using Catch::Matchers::WithinAbs;

namespace {

FrfBlock constant_block(const FrequencyGrid& g, const ComplexMatrix& m) {
    FrfBlock b;
    b.rows = m.rows();
    b.cols = m.cols();
    b.samples.assign(g.size(), m);
    return b;
}

/// G11 = G12 = G21 = 1, G22 = 0.
GeneralizedPlantFrf desk_plant() {
    GeneralizedPlantFrf p;
    p.grid = make_log_grid(0.01, 3.0, 20, 1.0);
    const ComplexMatrix one = ComplexMatrix::Ones(1, 1);
    p.G11 = p.G12 = p.G21 = constant_block(p.grid, one);
    p.G22 = constant_block(p.grid, ComplexMatrix::Zero(1, 1));
    return p;
}

SparsityPattern free_scalar() {
    SparsityPattern s(1, 1);
    s.at(0, 0) = {EntryKind::Free, 0};
    return s;
}

/// Oracle with static gain k_hat = -1, so T_hat = 0.
OracleData desk_oracle(const GeneralizedPlantFrf& plant) {
    const auto p = build_factor_parameterization(free_scalar(), 1, 0.0);
    RealVector t = p.zero_controller();
    for (std::size_t s = 0; s < p.size(); ++s) {
        if (p.slots[s].factor == Factor::X && p.slots[s].basis == 0) {
            t(static_cast<Eigen::Index>(s)) = -1.0;
        }
    }
    OracleData o;
    o.factors = make_factors(p, t);
    o.T_hat = closed_loop_frf(plant, sample_controller(o.factors, plant.grid));
    o.kind = ObjectiveKind::Hinf;
    o.value = 0.0;
    return o;
}

SynthesisConfig quiet_config(int max_iter) {
    SynthesisConfig c;
    c.max_iter = max_iter;
    c.record_timing = false;
    return c;
}

struct GridCase {
    StateSpaceModel model;
    GeneralizedPlantFrf plant;
};

GridCase five_bus(std::size_t points) {
    GridCase c;
    c.model = assemble_networked(build_power_grid(PowerGridParams::case_study()));
    c.plant = sample_generalized_plant(c.model, make_log_grid(1e-2, std::numbers::pi / c.model.Ts, points, c.model.Ts));
    return c;
}

RealVector random_theta(std::mt19937& rng, std::size_t n, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    RealVector t(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        t(i) = u(rng);
    }
    return t;
}

} // namespace

TEST_CASE("objective names") {
    REQUIRE(parse_objective("h2") == ObjectiveKind::H2);
    REQUIRE(parse_objective(to_string(ObjectiveKind::SpatialRegret)) == ObjectiveKind::SpatialRegret);
    REQUIRE_THROWS_AS(parse_objective("l1"), Error);
}

TEST_CASE("phi maps at the zero controller") {
    const auto gc = five_bus(30);
    const auto param = build_factor_parameterization(case_study_pattern({}), 2, 0.0);
    const auto fm = realize_factors(param, gc.plant.grid);
    const auto maps = build_phi_maps(gc.plant, fm, param.zero_controller());
    for (std::size_t k = 0; k < maps.size(); ++k) {
        REQUIRE((maps.PhiC[k] - maps.G12L[k]).norm() <= 1e-12);
        const ComplexMatrix& Psi = maps.Psi[k];
        REQUIRE((Psi * gc.plant.G12[k]).norm() <= 1e-10);
        REQUIRE((Psi - Psi.adjoint()).norm() <= 1e-10);
        REQUIRE((Psi * Psi - Psi).norm() <= 1e-10);
    }

    // Square invertible G12.
    const auto desk = desk_plant();
    const auto dp = build_factor_parameterization(free_scalar(), 1, 0.0);
    const auto dm = build_phi_maps(desk, realize_factors(dp, desk.grid), dp.zero_controller());
    for (const auto& P : dm.Psi) {
        REQUIRE(P.norm() <= 1e-14);
    }
}

TEST_CASE("linearized block is exact at the current iterate and a lower bound elsewhere") {
    const auto gc = five_bus(30);
    const auto param = build_factor_parameterization(case_study_pattern({}), 2, 0.0);
    const auto fm = realize_factors(param, gc.plant.grid);
    std::mt19937 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        RealVector theta_c = param.zero_controller() + random_theta(rng, param.size(), 0.5);
        const auto maps = build_phi_maps(gc.plant, fm, theta_c);
        const RealVector theta = theta_c + random_theta(rng, param.size(), 2.0);
        const std::size_t k = static_cast<std::size_t>(trial) % maps.size();
        const ComplexMatrix Phi = maps.Phi(theta, k);
        const ComplexMatrix& Pc = maps.PhiC[k];
        const ComplexMatrix lin = Pc * Phi.adjoint() + Phi * Pc.adjoint() - Pc * Pc.adjoint();
        REQUIRE(psd_residual(HermitianMatrix(Phi * Phi.adjoint() - lin)) <= 1e-9);
        REQUIRE((maps.Phi(theta_c, k) - Pc).norm() <= 1e-12);

        const auto P = build_norm_lmi(gc.plant, maps, ObjectiveKind::Hinf);
        RealVector y(static_cast<Eigen::Index>(P.num_vars));
        y.head(static_cast<Eigen::Index>(P.num_theta)) = theta_c;
        y(static_cast<Eigen::Index>(P.gamma_index)) = 1.0;
        const ComplexMatrix H = P.blocks[k].evaluate(y);
        const Eigen::Index nw = gc.plant.n_w();
        const Eigen::Index nu = Pc.rows();
        REQUIRE((H.bottomRightCorner(nu, nu) - Pc * Pc.adjoint()).norm() <= 1e-10 * (1.0 + Pc.squaredNorm()));
        REQUIRE((H - H.adjoint()).norm() <= 1e-10 * (1.0 + H.norm()));
        REQUIRE((H.bottomLeftCorner(nu, nw) - maps.W(theta_c, k)).norm() <= 1e-10 * (1.0 + H.norm()));
    }
}

TEST_CASE("regret blocks reduce to the hinf blocks when the oracle closed loop is zero") {
    const auto desk = desk_plant();
    const auto p = build_factor_parameterization(free_scalar(), 1, 0.0);
    const auto maps = build_phi_maps(desk, realize_factors(p, desk.grid), p.zero_controller());
    OracleData zero;
    zero.T_hat.grid = desk.grid;
    zero.T_hat.samples.assign(desk.size(), ComplexMatrix::Zero(1, 1));
    const auto hinf = build_norm_lmi(desk, maps, ObjectiveKind::Hinf);
    const auto reg = build_regret_lmi(desk, maps, zero);
    REQUIRE(hinf.num_vars == reg.num_vars);
    REQUIRE(hinf.blocks.size() == reg.blocks.size());
    for (std::size_t k = 0; k < hinf.blocks.size(); ++k) {
        REQUIRE((hinf.blocks[k].H0 - reg.blocks[k].H0).norm() == 0.0);
        REQUIRE(hinf.blocks[k].terms.size() == reg.blocks[k].terms.size());
        for (std::size_t t = 0; t < hinf.blocks[k].terms.size(); ++t) {
            REQUIRE(hinf.blocks[k].terms[t].first == reg.blocks[k].terms[t].first);
            REQUIRE((hinf.blocks[k].terms[t].second - reg.blocks[k].terms[t].second).norm() == 0.0);
        }
    }

    OracleData shifted = zero;
    shifted.T_hat.grid = make_log_grid(0.01, 2.0, 20, 1.0);
    try {
        (void)build_regret_lmi(desk, maps, shifted);
        FAIL("expected GridMismatch");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::GridMismatch);
    }
}

TEST_CASE("desk plant constraint is gamma >= |1 + k|^2") {
    const auto desk = desk_plant();
    const auto p = build_factor_parameterization(free_scalar(), 1, 0.0);
    const auto maps = build_phi_maps(desk, realize_factors(p, desk.grid), p.zero_controller());
    const auto P = build_norm_lmi(desk, maps, ObjectiveKind::Hinf);
    for (double k : {-2.0, -1.0, -0.5, 0.0, 1.5}) {
        RealVector y = RealVector::Zero(static_cast<Eigen::Index>(P.num_vars));
        y.head(static_cast<Eigen::Index>(P.num_theta)) = p.zero_controller();
        for (std::size_t s = 0; s < p.size(); ++s) {
            if (p.slots[s].factor == Factor::X && p.slots[s].basis == 0) {
                y(static_cast<Eigen::Index>(s)) = k;
            }
        }
        const double bound = (1.0 + k) * (1.0 + k);
        y(static_cast<Eigen::Index>(P.gamma_index)) = bound + 1e-6;
        REQUIRE(psd_residual(HermitianMatrix(P.blocks[3].evaluate(y))) == 0.0);
        y(static_cast<Eigen::Index>(P.gamma_index)) = bound - 1e-3;
        REQUIRE(psd_residual(HermitianMatrix(P.blocks[3].evaluate(y))) > 0.0);
    }
}

TEST_CASE("desk plant syntheses reach the analytic optimum") {
    const auto desk = desk_plant();
    const auto p = build_factor_parameterization(free_scalar(), 1, 0.0);

    const auto hinf = iterate_synthesis(desk, p, p.zero_controller(), ObjectiveKind::Hinf, nullptr, quiet_config(10));
    REQUIRE(hinf.history.size() <= 10);
    REQUIRE(std::abs(hinf.final_gamma()) <= 1e-3);
    REQUIRE(gamma_nonincreasing(hinf));

    const auto oracle = desk_oracle(desk);
    const auto sr = iterate_synthesis(desk, p, p.zero_controller(), ObjectiveKind::SpatialRegret, &oracle,
                                      quiet_config(10));
    REQUIRE(sr.history.size() <= 10);
    REQUIRE(std::abs(sr.final_gamma()) <= 1e-3);
    const auto T = closed_loop_frf(desk, sample_controller(sr.final, desk.grid));
    REQUIRE(spatial_regret_value(T, oracle.T_hat).value >= -1e-6);

    const auto h2 = iterate_synthesis(desk, p, p.zero_controller(), ObjectiveKind::H2, nullptr, quiet_config(10));
    REQUIRE(h2.final_gamma() <= 1e-3);

    const auto one = iterate_synthesis(desk, p, p.zero_controller(), ObjectiveKind::Hinf, nullptr, quiet_config(1));
    REQUIRE(one.history.size() == 1);

    REQUIRE_THROWS_AS(iterate_synthesis(desk, p, p.zero_controller(), ObjectiveKind::SpatialRegret, nullptr,
                                        quiet_config(3)),
                      Error);
}

TEST_CASE("oracle over the target class itself") {
    const auto desk = desk_plant();
    const auto o = synthesize_oracle(desk, free_scalar(), free_scalar(), ObjectiveKind::Hinf, 1, 0.0,
                                     quiet_config(10));
    REQUIRE(o.value <= 1e-3);
    const auto p = build_factor_parameterization(free_scalar(), 1, 0.0);
    const auto sr =
        iterate_synthesis(desk, p, p.zero_controller(), ObjectiveKind::SpatialRegret, &o, quiet_config(10));
    const auto T = closed_loop_frf(desk, sample_controller(sr.final, desk.grid));
    const double reg = spatial_regret_value(T, o.T_hat).value;
    REQUIRE(reg >= -1e-6);
    REQUIRE(reg <= 1e-3);
    REQUIRE(spatial_regret_value(o.T_hat, o.T_hat).value == 0.0);
}

TEST_CASE("oracle pattern must contain the target") {
    const auto desk = desk_plant();
    SparsityPattern zero(1, 1);
    try {
        (void)synthesize_oracle(desk, zero, free_scalar(), ObjectiveKind::Hinf, 1, 0.0, quiet_config(3));
        FAIL("expected NotASuperset");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::NotASuperset);
    }
    REQUIRE_THROWS_AS(synthesize_oracle(desk, free_scalar(), free_scalar(), ObjectiveKind::SpatialRegret, 1, 0.0,
                                        quiet_config(3)),
                      Error);
}

TEST_CASE("five-bus h2 iterates are monotone, stabilizing and structured") {
    const auto gc = five_bus(40);
    const auto pattern = case_study_pattern({});
    const auto param = build_factor_parameterization(pattern, 2, 0.0);
    const auto rep = iterate_synthesis(gc.plant, param, param.zero_controller(), ObjectiveKind::H2, nullptr,
                                       quiet_config(4), &gc.model);
    REQUIRE_FALSE(rep.history.empty());
    REQUIRE(gamma_nonincreasing(rep));
    for (const auto& r : rep.history) {
        REQUIRE(r.spectral_radius < 1.0);
        REQUIRE(r.psd_residual <= 1e-6);
    }
    const auto check = verify_pattern(rep.final, pattern, gc.plant.grid, 1e-10);
    REQUIRE(check.pass);
}
