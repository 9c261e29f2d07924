#include <random>

#include <catch_amalgamated.hpp>

#include "ddsr/sdp.hpp"

using namespace ddsr;
using namespace ddsr::sdp;
using Catch::Matchers::WithinAbs;

namespace {

RealMatrix mat2(double a, double b, double c, double d) {
    RealMatrix m(2, 2);
    m << a, b, c, d;
    return m;
}

RealMatrix scalar(double v) { return RealMatrix::Constant(1, 1, v); }

/// min t s.t. t I - A >= 0.
Program max_eig_program(const RealMatrix& A) {
    Program p;
    p.num_vars = 1;
    p.cost = RealVector::Ones(1);
    p.blocks.push_back({-A, {{0, RealMatrix::Identity(A.rows(), A.cols())}}});
    return p;
}

} // namespace

TEST_CASE("two by two block with unit coupling") {
    Program p;
    p.num_vars = 1;
    p.cost = RealVector::Ones(1);
    p.blocks.push_back({mat2(0, 1, 1, 0), {{0, RealMatrix::Identity(2, 2)}}});
    const auto r = solve(p);
    REQUIRE(r.status == Status::Optimal);
    REQUIRE_THAT(r.y(0), WithinAbs(1.0, 1e-6));
    REQUIRE(p.max_violation(r.y) <= 1e-7);
}

TEST_CASE("uncoupled nonnegative variable") {
    Program p;
    p.num_vars = 1;
    p.cost = RealVector::Ones(1);
    p.blocks.push_back({scalar(0.0), {{0, scalar(1.0)}}});
    const auto r = solve(p);
    REQUIRE(r.status == Status::Optimal);
    REQUIRE_THAT(r.y(0), WithinAbs(0.0, 1e-6));
}

TEST_CASE("two variable trace problem") {
    // min y0 + y1 s.t. [[y0, 1], [1, y1]] >= 0 -> y0 = y1 = 1.
    Program p;
    p.num_vars = 2;
    p.cost = RealVector::Ones(2);
    p.blocks.push_back({mat2(0, 1, 1, 0), {{0, mat2(1, 0, 0, 0)}, {1, mat2(0, 0, 0, 1)}}});
    const auto r = solve(p);
    REQUIRE(r.status == Status::Optimal);
    REQUIRE_THAT(r.objective, WithinAbs(2.0, 1e-6));
    REQUIRE_THAT(r.y(0), WithinAbs(1.0, 1e-4));
    REQUIRE_THAT(r.y(1), WithinAbs(1.0, 1e-4));
}

TEST_CASE("linear rows alone") {
    Program p;
    p.num_vars = 1;
    p.cost = RealVector::Ones(1);
    p.rows.push_back({-2.0, {{0, 1.0}}});
    const auto r = solve(p);
    REQUIRE(r.status == Status::Optimal);
    REQUIRE_THAT(r.y(0), WithinAbs(2.0, 1e-6));
}

TEST_CASE("infeasible and unbounded programs are classified") {
    Program inf;
    inf.num_vars = 1;
    inf.cost = RealVector::Ones(1);
    inf.blocks.push_back({scalar(-1.0), {{0, scalar(-1.0)}}}); // y <= -1
    inf.blocks.push_back({scalar(0.0), {{0, scalar(1.0)}}});   // y >= 0
    REQUIRE(solve(inf).status == Status::Infeasible);

    Program unb;
    unb.num_vars = 1;
    unb.cost = RealVector::Ones(1);
    unb.blocks.push_back({scalar(5.0), {{0, scalar(-1.0)}}}); // y <= 5
    REQUIRE(solve(unb).status == Status::Unbounded);
}

TEST_CASE("largest eigenvalue of random symmetric matrices") {
    std::mt19937 rng(3);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index d = 2 + trial % 6;
        RealMatrix a(d, d);
        for (Eigen::Index i = 0; i < d; ++i) {
            for (Eigen::Index j = 0; j < d; ++j) {
                a(i, j) = n(rng);
            }
        }
        a = 0.5 * (a + a.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<RealMatrix> es(a, Eigen::EigenvaluesOnly);
        const auto r = solve(max_eig_program(a));
        REQUIRE(r.status == Status::Optimal);
        REQUIRE_THAT(r.y(0), WithinAbs(es.eigenvalues()(d - 1), 1e-6));
    }
}

TEST_CASE("complex constraint through the embedding") {
    // Hermitian [[2, i], [-i, 2]] has largest eigenvalue 3.
    ComplexMatrix h(2, 2);
    h << 2.0, cdouble(0, 1), cdouble(0, -1), 2.0;
    const auto r = solve(max_eig_program(hermitian_embed(HermitianMatrix(h))));
    REQUIRE(r.status == Status::Optimal);
    REQUIRE_THAT(r.y(0), WithinAbs(3.0, 1e-6));
}
