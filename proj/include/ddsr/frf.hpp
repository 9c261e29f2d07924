#pragma once

// Frequency-response data: estimation from experiments, the four-block
// generalized plant and the rank/boundedness diagnostics the synthesis relies on.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "ddsr/error.hpp"
#include "ddsr/grid.hpp"
#include "ddsr/hermitian.hpp"
#include "ddsr/lti.hpp"
#include "ddsr/parallel.hpp"

namespace ddsr {

/// m experiments of N_s samples: U[k] is m x m and Y[k] is p x m, column e
/// holding experiment e at time k.
struct ExperimentBatch {
    double Ts = 1.0;
    std::vector<RealMatrix> U;
    std::vector<RealMatrix> Y;

    [[nodiscard]] std::size_t samples() const noexcept { return U.size(); }
    [[nodiscard]] Eigen::Index inputs() const { return U.empty() ? 0 : U.front().rows(); }
    [[nodiscard]] Eigen::Index outputs() const { return Y.empty() ? 0 : Y.front().rows(); }
    [[nodiscard]] Eigen::Index experiments() const { return U.empty() ? 0 : U.front().cols(); }

    void validate() const {
        if (U.empty() || U.size() != Y.size()) {
            throw Error(Errc::DimensionMismatch, "experiment batch needs N_s >= 1 and equal U/Y lengths");
        }
        const auto m = inputs();
        const auto p = outputs();
        const auto e = experiments();
        for (std::size_t k = 0; k < U.size(); ++k) {
            if (U[k].rows() != m || U[k].cols() != e || Y[k].rows() != p || Y[k].cols() != e) {
                std::ostringstream os;
                os << "experiment sample " << k << " has inconsistent dimensions";
                throw Error(Errc::DimensionMismatch, os.str());
            }
        }
    }
};

/// Upper bound on cond(sum_k U_k e^{-j omega Ts k}) accepted by the estimator.
inline constexpr double kMaxInputCondition = 1e10;

struct FrfOptions {
    /// Extend both records past N_s by holding their final samples, summed in
    /// closed form. Removes the truncation error of responses that settle to a
    /// nonzero constant (a plant pole at z = 1). Needs omega > 0.
    bool settled_tail = false;
};

/// G22 = [sum_k Y_k e^{-j w Ts k}] [sum_k U_k e^{-j w Ts k}]^-1 at every grid
/// frequency (truncated discrete-time Fourier sums, any omega).
inline FrfBlock estimate_frf(const ExperimentBatch& batch, const FrequencyGrid& grid, const FrfOptions& opt = {}) {
    batch.validate();
    grid.validate();
    if (batch.experiments() != batch.inputs()) {
        throw Error(Errc::DimensionMismatch, "need as many experiments as input channels");
    }
    const auto m = batch.inputs();
    const auto p = batch.outputs();
    const std::size_t ns = batch.samples();
    FrfBlock out;
    out.rows = p;
    out.cols = m;
    out.samples.resize(grid.size());
    parallel_for(grid.size(), [&](std::size_t g) {
        const double omega = grid.omegas[g];
        ComplexMatrix su = ComplexMatrix::Zero(m, m);
        ComplexMatrix sy = ComplexMatrix::Zero(p, m);
        // Recurrence on the phasor keeps the sum O(N_s); re-anchor periodically
        // so rounding in the running product does not accumulate.
        const cdouble step = std::polar(1.0, -omega * grid.Ts);
        cdouble ph(1.0, 0.0);
        for (std::size_t k = 0; k < ns; ++k) {
            if (k % 256 == 0) {
                ph = std::polar(1.0, -omega * grid.Ts * static_cast<double>(k));
            }
            su += ph * batch.U[k].cast<cdouble>();
            sy += ph * batch.Y[k].cast<cdouble>();
            ph *= step;
        }
        if (opt.settled_tail) {
            if (!(omega > 0.0)) {
                throw Error(Errc::BadRange, "settled-tail estimation needs omega > 0");
            }
            const double th = omega * grid.Ts;
            const cdouble tail = std::polar(1.0, -th * static_cast<double>(ns)) / (1.0 - std::polar(1.0, -th));
            su += tail * batch.U.back().cast<cdouble>();
            sy += tail * batch.Y.back().cast<cdouble>();
        }
        const double cond = condition_number(su);
        if (!(cond < kMaxInputCondition)) {
            std::ostringstream os;
            os.precision(17);
            os << "omega=" << omega << " cond=" << cond;
            throw Error(Errc::SingularInputSpectrum, os.str());
        }
        out.samples[g] = su.transpose().partialPivLu().solve(sy.transpose()).transpose();
    });
    return out;
}

/// One unit impulse per input channel: U_k = I * delta_k.
inline std::vector<RealMatrix> impulse_excitation(Eigen::Index m, std::size_t ns) {
    std::vector<RealMatrix> U(ns, RealMatrix::Zero(m, m));
    if (ns > 0) {
        U[0] = RealMatrix::Identity(m, m);
    }
    return U;
}

/// Experiment e drives channel e with a sum of cosines at the given
/// frequencies (rad/s) with phases drawn from a seeded generator.
inline std::vector<RealMatrix> multisine_excitation(Eigen::Index m, std::size_t ns, double Ts,
                                                    const std::vector<double>& freqs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::vector<RealMatrix> U(ns, RealMatrix::Zero(m, m));
    for (Eigen::Index e = 0; e < m; ++e) {
        std::vector<double> ph(freqs.size());
        for (auto& v : ph) {
            v = phase(rng);
        }
        for (std::size_t k = 0; k < ns; ++k) {
            double s = 0.0;
            for (std::size_t f = 0; f < freqs.size(); ++f) {
                s += std::cos(freqs[f] * Ts * static_cast<double>(k) + ph[f]);
            }
            U[k](e, e) = s;
        }
    }
    return U;
}

/// Runs one experiment per column of the excitation on the u -> y channel of
/// the model (w = 0, zero initial state, no feedback).
inline ExperimentBatch run_experiments(const StateSpaceModel& model, const std::vector<RealMatrix>& U) {
    model.validate();
    if (U.empty()) {
        throw Error(Errc::Config, "experiments need N_s >= 1");
    }
    const auto m = model.n_u();
    const auto ne = U.front().cols();
    const auto ns = static_cast<Eigen::Index>(U.size());
    if (U.front().rows() != m) {
        throw Error(Errc::DimensionMismatch, "excitation rows must equal plant inputs");
    }
    StateSpaceModel io = model;
    ExperimentBatch b;
    b.Ts = model.Ts;
    b.U = U;
    b.Y.assign(U.size(), RealMatrix::Zero(model.n_y(), ne));
    for (Eigen::Index e = 0; e < ne; ++e) {
        RealMatrix u(m, ns);
        for (Eigen::Index k = 0; k < ns; ++k) {
            u.col(k) = U[static_cast<std::size_t>(k)].col(e);
        }
        const RealMatrix w = RealMatrix::Zero(model.n_w, ns);
        const auto tr = simulate(io, u, w, RealVector::Zero(model.states()), ns);
        for (Eigen::Index k = 0; k < ns; ++k) {
            b.Y[static_cast<std::size_t>(k)].col(e) = tr.y.col(k);
        }
    }
    return b;
}

/// Four-block plant [[G11, G12], [G21, G22]] sampled on a grid.
struct GeneralizedPlantFrf {
    FrequencyGrid grid;
    FrfBlock G11, G12, G21, G22;

    [[nodiscard]] Eigen::Index n_z() const noexcept { return G11.rows; }
    [[nodiscard]] Eigen::Index n_w() const noexcept { return G11.cols; }
    [[nodiscard]] Eigen::Index n_y() const noexcept { return G21.rows; }
    [[nodiscard]] Eigen::Index n_u() const noexcept { return G12.cols; }
    [[nodiscard]] std::size_t size() const noexcept { return grid.size(); }

    /// Full G at grid point k.
    [[nodiscard]] ComplexMatrix full(std::size_t k) const {
        ComplexMatrix g(n_z() + n_y(), n_w() + n_u());
        g << G11[k], G12[k], G21[k], G22[k];
        return g;
    }

    void validate() const {
        const bool dims = G12.rows == G11.rows && G21.cols == G11.cols && G22.rows == G21.rows &&
                          G22.cols == G12.cols;
        if (!dims) {
            throw Error(Errc::DimensionMismatch, "generalized plant blocks do not partition");
        }
        const std::size_t n = grid.size();
        if (G11.size() != n || G12.size() != n || G21.size() != n || G22.size() != n) {
            throw Error(Errc::GridMismatch, "block sample count differs from grid length");
        }
        for (std::size_t k = 0; k < n; ++k) {
            if (G11[k].rows() != G11.rows || G11[k].cols() != G11.cols || G12[k].rows() != G12.rows ||
                G12[k].cols() != G12.cols || G21[k].rows() != G21.rows || G21[k].cols() != G21.cols ||
                G22[k].rows() != G22.rows || G22[k].cols() != G22.cols) {
                throw Error(Errc::DimensionMismatch, "sample dimensions inconsistent");
            }
        }
    }
};

namespace detail {

inline FrfBlock sub_block(const FrfBlock& full, Eigen::Index r0, Eigen::Index c0, Eigen::Index rows,
                          Eigen::Index cols) {
    FrfBlock b;
    b.rows = rows;
    b.cols = cols;
    b.samples.reserve(full.size());
    for (const auto& s : full.samples) {
        b.samples.emplace_back(s.block(r0, c0, rows, cols));
    }
    return b;
}

} // namespace detail

/// Samples all four blocks from a partitioned state-space model.
inline GeneralizedPlantFrf sample_generalized_plant(const StateSpaceModel& model, const FrequencyGrid& grid) {
    grid.validate();
    const FrfBlock full = frequency_response(model, grid);
    GeneralizedPlantFrf g;
    g.grid = grid;
    g.G11 = detail::sub_block(full, 0, 0, model.n_z, model.n_w);
    g.G12 = detail::sub_block(full, 0, model.n_w, model.n_z, model.n_u());
    g.G21 = detail::sub_block(full, model.n_z, 0, model.n_y(), model.n_w);
    g.G22 = detail::sub_block(full, model.n_z, model.n_w, model.n_y(), model.n_u());
    return g;
}

/// Packages a (typically estimated) G22 with user-defined performance blocks.
inline GeneralizedPlantFrf assemble_generalized_plant(const FrequencyGrid& g22_grid, const FrfBlock& G22,
                                                      const FrequencyGrid& perf_grid, const FrfBlock& G11,
                                                      const FrfBlock& G12, const FrfBlock& G21) {
    if (!(g22_grid == perf_grid)) {
        throw Error(Errc::GridMismatch, "G22 and performance blocks are sampled on different grids");
    }
    GeneralizedPlantFrf g{g22_grid, G11, G12, G21, G22};
    g.validate();
    return g;
}

/// Performance blocks sampled from a model on the estimation grid. The model's
/// own G22 is discarded in favour of the supplied one.
inline GeneralizedPlantFrf assemble_generalized_plant(const FrequencyGrid& g22_grid, const FrfBlock& G22,
                                                      const StateSpaceModel& perf_model) {
    GeneralizedPlantFrf g = sample_generalized_plant(perf_model, g22_grid);
    if (G22.rows != g.G22.rows || G22.cols != g.G22.cols) {
        throw Error(Errc::DimensionMismatch, "estimated G22 does not match model channels");
    }
    if (G22.size() != g22_grid.size()) {
        throw Error(Errc::GridMismatch, "G22 sample count differs from grid length");
    }
    g.G22 = G22;
    g.validate();
    return g;
}

inline constexpr double kDefaultA1RankTol = 1e-6;
inline constexpr double kDefaultA2Bound = 1e6;

struct AssumptionReport {
    std::vector<double> g12_sigma_ratio; // sigma_min / sigma_max of G12 per frequency
    std::vector<double> max_entry;       // max |G_ij| per frequency
    std::vector<double> a1_violations;   // frequencies failing full column rank
    std::vector<double> a2_violations;   // frequencies failing boundedness
    bool a1_pass = true;
    bool a2_pass = true;

    [[nodiscard]] bool pass() const noexcept { return a1_pass && a2_pass; }
};

/// Full column rank of G12 and boundedness of G at every grid frequency.
inline AssumptionReport check_assumptions(const GeneralizedPlantFrf& plant, double rank_tol = kDefaultA1RankTol,
                                          double bound = kDefaultA2Bound) {
    AssumptionReport r;
    const std::size_t n = plant.size();
    r.g12_sigma_ratio.resize(n);
    r.max_entry.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const ComplexMatrix& g12 = plant.G12[k];
        double ratio = 0.0;
        if (g12.rows() >= g12.cols() && g12.size() > 0) {
            Eigen::JacobiSVD<ComplexMatrix> svd(g12);
            const auto& s = svd.singularValues();
            ratio = s(0) > 0.0 ? s(s.size() - 1) / s(0) : 0.0;
        }
        r.g12_sigma_ratio[k] = ratio;
        const ComplexMatrix g = plant.full(k);
        const double mx = g.size() == 0 ? 0.0 : g.cwiseAbs().maxCoeff();
        r.max_entry[k] = std::isfinite(mx) ? mx : std::numeric_limits<double>::infinity();
        if (!(ratio > rank_tol)) {
            r.a1_pass = false;
            r.a1_violations.push_back(plant.grid.omegas[k]);
        }
        if (!(r.max_entry[k] < bound)) {
            r.a2_pass = false;
            r.a2_violations.push_back(plant.grid.omegas[k]);
        }
    }
    return r;
}

} // namespace ddsr
