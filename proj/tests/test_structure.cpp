#include <cmath>
#include <numbers>
#include <random>

#include <catch_amalgamated.hpp>

#include "ddsr/grid.hpp"
#include "ddsr/lti.hpp"
#include "ddsr/structure.hpp"

using namespace ddsr;
using Catch::Matchers::WithinAbs;

namespace {

using Strings = std::vector<std::vector<std::string>>;

SparsityPattern case_pattern() { return pattern_from_graph(5, chain_edges(5, 1)); }

SparsityPattern oracle_pattern() {
    auto e = chain_edges(5, 0);
    for (std::size_t i = 2; i < 5; ++i) {
        e.push_back({0, i, 0});
    }
    return pattern_from_graph(5, e);
}

RealVector random_theta(std::mt19937& rng, const FactorParameterization& p) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    RealVector t(static_cast<Eigen::Index>(p.size()));
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        t(i) = u(rng);
    }
    // Keep D_Y away from zero.
    for (std::size_t s = 0; s < p.size(); ++s) {
        if (p.slots[s].factor == Factor::Y && p.slots[s].basis == 0) {
            t(static_cast<Eigen::Index>(s)) = 2.0 + u(rng);
        }
    }
    return t;
}

Polynomial random_poly(std::mt19937& rng, int degree, bool monic_stable) {
    std::uniform_real_distribution<double> root(-0.9, 0.9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    if (monic_stable) {
        Polynomial p = Polynomial::constant(1.0);
        for (int i = 0; i < degree; ++i) {
            p = p * Polynomial{{1.0, -root(rng)}};
        }
        return p;
    }
    Polynomial p;
    p.c.resize(static_cast<std::size_t>(degree) + 1);
    for (auto& c : p.c) {
        c = u(rng);
    }
    return p;
}

} // namespace

TEST_CASE("patterns from communication graphs") {
    const auto p3 = pattern_from_graph(3, chain_edges(3, 0));
    REQUIRE(p3.to_strings() == Strings{{"x", "x", "0"}, {"x", "x", "x"}, {"0", "x", "x"}});

    const auto k = case_pattern();
    REQUIRE(k.to_strings() == Strings{{"x", "z^-1", "0", "0", "0"},
                                      {"z^-1", "x", "z^-1", "0", "0"},
                                      {"0", "z^-1", "x", "z^-1", "0"},
                                      {"0", "0", "z^-1", "x", "z^-1"},
                                      {"0", "0", "0", "z^-1", "x"}});

    const auto o = oracle_pattern();
    REQUIRE(o.to_strings() == Strings{{"x", "x", "0", "0", "0"},
                                      {"x", "x", "x", "0", "0"},
                                      {"x", "x", "x", "x", "0"},
                                      {"x", "0", "x", "x", "x"},
                                      {"x", "0", "0", "x", "x"}});
    REQUIRE(pattern_contains(o, k));
    REQUIRE_FALSE(pattern_contains(k, o));

    REQUIRE_THROWS_AS(pattern_from_graph(3, {{0, 3, 0}}), Error);
}

TEST_CASE("pattern entry strings round-trip") {
    const auto k = case_pattern();
    REQUIRE(SparsityPattern::from_strings(k.to_strings()) == k);
    REQUIRE(SparsityPattern::parse_entry("z^-3") == PatternEntry{EntryKind::Delayed, 3});
    REQUIRE_THROWS_AS(SparsityPattern::parse_entry("z^-0"), Error);
    REQUIRE_THROWS_AS(SparsityPattern::parse_entry("y"), Error);
}

TEST_CASE("parameterization sizes") {
    SparsityPattern one(1, 1);
    one.at(0, 0) = {EntryKind::Free, 0};
    REQUIRE(build_factor_parameterization(one, 2, 0.6).size() == 6);

    // X: 5 Free entries with 3 slots + 8 Delayed(1) entries with 2 slots; Y: 5 x 3.
    REQUIRE(build_factor_parameterization(case_pattern(), 2, 0.0).size() == 46);
    // X: 16 Free entries with 3 slots; Y: 5 x 3.
    REQUIRE(build_factor_parameterization(oracle_pattern(), 2, 0.0).size() == 63);

    SparsityPattern zero(2, 2);
    const auto pz = build_factor_parameterization(zero, 2, 0.0);
    REQUIRE(pz.size() == 6);
    for (const auto& s : pz.slots) {
        REQUIRE(s.factor == Factor::Y);
        REQUIRE(s.row == s.col);
    }

    REQUIRE_THROWS_AS(build_factor_parameterization(one, 2, 1.0), Error);
    REQUIRE_THROWS_AS(build_factor_parameterization(one, 0, 0.0), Error);
}

TEST_CASE("factor maps are linear and match the fixed basis") {
    SparsityPattern one(1, 1);
    one.at(0, 0) = {EntryKind::Free, 0};
    const auto p = build_factor_parameterization(one, 2, 0.6);
    FrequencyGrid g;
    g.Ts = 1.0;
    g.omegas = {0.0, 0.5, 2.0};
    const auto maps = realize_factors(p, g);

    const RealVector zero = RealVector::Zero(static_cast<Eigen::Index>(p.size()));
    for (std::size_t k = 0; k < g.size(); ++k) {
        REQUIRE(maps.X(zero, k).norm() == 0.0);
        REQUIRE(maps.Y(zero, k).norm() == 0.0);
    }

    // B = [1; 0] drives the head of the Jordan chain: 1/(z - 0.6)^2, 6.25 at z = 1.
    RealVector t = zero;
    for (std::size_t s = 0; s < p.size(); ++s) {
        if (p.slots[s].factor == Factor::X && p.state_of_basis(p.slots[s].basis) == 0 && p.slots[s].basis > 0) {
            t(static_cast<Eigen::Index>(s)) = 1.0;
        }
    }
    REQUIRE_THAT(maps.X(t, 0)(0, 0).real(), WithinAbs(6.25, 1e-12));
    REQUIRE_THAT(maps.X(t, 0)(0, 0).imag(), WithinAbs(0.0, 1e-12));

    std::mt19937 rng(1);
    const auto big = build_factor_parameterization(case_pattern(), 2, 0.3);
    const auto g2 = make_log_grid(0.01, std::numbers::pi / 0.02, 25, 0.02);
    const auto m2 = realize_factors(big, g2);
    for (int trial = 0; trial < 100; ++trial) {
        const RealVector a = random_theta(rng, big);
        const RealVector b = random_theta(rng, big);
        const std::size_t k = static_cast<std::size_t>(trial) % g2.size();
        REQUIRE((m2.X(a + b, k) - m2.X(a, k) - m2.X(b, k)).norm() <= 1e-12);
        REQUIRE((m2.Y(a + b, k) - m2.Y(a, k) - m2.Y(b, k)).norm() <= 1e-12);

        const auto f = make_factors(big, a);
        const cdouble z = std::polar(1.0, g2.omegas[k] * g2.Ts);
        REQUIRE((m2.X(a, k) - f.X(z)).norm() <= 1e-12);
        REQUIRE((m2.Y(a, k) - f.Y(z)).norm() <= 1e-12);

        // Against the state-space realization of the factors.
        const auto r = factor_realization(f);
        const ComplexMatrix res = (z * ComplexMatrix::Identity(r.A.rows(), r.A.cols()) - r.A.cast<cdouble>()).inverse();
        const ComplexMatrix x_ss = r.C.cast<cdouble>() * res * r.BX.cast<cdouble>() + r.DX.cast<cdouble>();
        const ComplexMatrix y_ss = r.C.cast<cdouble>() * res * r.BY.cast<cdouble>() + r.DY.cast<cdouble>();
        REQUIRE((x_ss - f.X(z)).norm() <= 1e-10 * (1.0 + x_ss.norm()));
        REQUIRE((y_ss - f.Y(z)).norm() <= 1e-10 * (1.0 + y_ss.norm()));
    }
}

TEST_CASE("structure preservation and delay enforcement") {
    std::mt19937 rng(2);
    const auto pat = case_pattern();
    const auto p = build_factor_parameterization(pat, 2, 0.0);
    const auto g = make_log_grid(0.01, std::numbers::pi / 0.02, 60, 0.02);
    for (int trial = 0; trial < 10; ++trial) {
        const auto f = make_factors(p, random_theta(rng, p));
        const auto rep = verify_pattern(f, pat, g, 1e-12);
        REQUIRE(rep.pass);
        REQUIRE(rep.max_zero_entry == 0.0);
        REQUIRE(rep.max_delayed_feedthrough == 0.0);
        const auto k = realize_controller(f, 0.02);
        for (double w : {0.1, 3.0, 40.0}) {
            const cdouble z = std::polar(1.0, w * 0.02);
            REQUIRE((evaluate_at(k, z) - f.K(z)).norm() <= 1e-8 * (1.0 + f.K(z).norm()));
        }
    }

    // A Zero entry perturbed through the realization is reported.
    auto f = make_factors(p, random_theta(rng, p));
    SparsityPattern stricter = pat;
    stricter.at(0, 1) = {EntryKind::Zero, 0};
    const auto bad = verify_pattern(f, stricter, g, 1e-12);
    REQUIRE_FALSE(bad.pass);
    REQUIRE(bad.violations.size() == 1);
    REQUIRE(bad.violations.front() == std::pair<std::size_t, std::size_t>{0, 1});

    // Checking a Free-feedthrough controller against a delayed pattern flags it.
    const auto po = build_factor_parameterization(oracle_pattern(), 2, 0.0);
    const auto fo = make_factors(po, random_theta(rng, po));
    SparsityPattern delayed = oracle_pattern();
    delayed.at(1, 0) = {EntryKind::Delayed, 1};
    REQUIRE_FALSE(verify_pattern(fo, delayed, g, 1e-12).pass);
}

TEST_CASE("singular D_Y is rejected by the realization") {
    const auto p = build_factor_parameterization(case_pattern(), 2, 0.0);
    RealVector t = RealVector::Zero(static_cast<Eigen::Index>(p.size()));
    try {
        (void)realize_controller(make_factors(p, t), 0.02);
        FAIL("expected SingularDY");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::SingularDY);
    }
}

TEST_CASE("left factorization examples") {
    RationalMatrix zero(1, 1);
    const auto f0 = left_factorize_rational(zero, 0.0);
    REQUIRE(f0.K(cdouble(0.3, 0.2)).norm() == 0.0);
    REQUIRE(std::abs(f0.y(cdouble(0.3, 0.2)) - 1.0) == 0.0);

    RationalMatrix k(1, 1);
    k.at(0, 0) = RationalEntry{Polynomial::constant(1.0), Polynomial{{1.0, -0.5}}};
    const auto f = left_factorize_rational(k, 0.0);
    for (double w : {0.1, 1.0, 2.5}) {
        const cdouble z = std::polar(1.0, w);
        REQUIRE(std::abs(f.y(z) - (z - 0.5) / z) <= 1e-14);
        REQUIRE(std::abs(f.X.at(0, 0)(z) - 1.0 / z) <= 1e-14);
    }

    RationalMatrix two(2, 2);
    two.at(0, 0) = RationalEntry{Polynomial::constant(1.0), Polynomial{{1.0, 0.2}}};
    two.at(1, 1) = RationalEntry{Polynomial{{2.0, 0.0}}, Polynomial{{1.0, -0.4}}};
    const auto f2 = left_factorize_rational(two, 0.1);
    REQUIRE(f2.X.at(0, 1).num.is_zero());
    REQUIRE(f2.X.at(1, 0).num.is_zero());

    RationalMatrix improper(1, 1);
    improper.at(0, 0) = RationalEntry{Polynomial{{1.0, 0.0, 0.0}}, Polynomial{{1.0, 0.5}}};
    REQUIRE_THROWS_AS(left_factorize_rational(improper, 0.0), Error);
}

TEST_CASE("left factorization round trip on random controllers") {
    std::mt19937 rng(9);
    std::uniform_int_distribution<int> deg(0, 4);
    const auto g = make_log_grid(0.01, std::numbers::pi, 100, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(trial % 2);
        RationalMatrix K(n, n);
        for (auto& e : K.entries) {
            const int d = deg(rng) % (n == 1 ? 5 : 3);
            e = RationalEntry{random_poly(rng, d, false), random_poly(rng, d, true)};
        }
        const auto f = left_factorize_rational(K, 0.2);
        double err = 0.0;
        for (double w : g.omegas) {
            const cdouble z = std::polar(1.0, w);
            err = std::max(err, (f.K(z) - K(z)).cwiseAbs().maxCoeff());
        }
        REQUIRE(err <= 1e-9);
    }
}
