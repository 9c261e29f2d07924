#pragma once

// Closed-loop frequency responses, norms, the spatial-regret metric and
// time-domain disturbance experiments.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "ddsr/error.hpp"
#include "ddsr/frf.hpp"
#include "ddsr/grid.hpp"
#include "ddsr/hermitian.hpp"
#include "ddsr/lti.hpp"
#include "ddsr/parallel.hpp"
#include "ddsr/structure.hpp"

namespace ddsr {

/// Closed-loop map w -> z sampled on a grid.
struct ClosedLoopFrf {
    FrequencyGrid grid;
    std::vector<ComplexMatrix> samples;

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    const ComplexMatrix& operator[](std::size_t k) const { return samples[k]; }
};

/// Largest condition number of I - G22 K accepted by closed_loop_frf.
inline constexpr double kMaxReturnDifferenceCondition = 1e10;

/// T = G11 + G12 K (I - G22 K)^-1 G21 at every grid point.
inline ClosedLoopFrf closed_loop_frf(const GeneralizedPlantFrf& plant, const std::vector<ComplexMatrix>& K) {
    plant.validate();
    if (K.size() != plant.size()) {
        throw Error(Errc::GridMismatch, "controller samples do not match the plant grid");
    }
    ClosedLoopFrf out{plant.grid, std::vector<ComplexMatrix>(plant.size())};
    parallel_for(plant.size(), [&](std::size_t k) {
        if (K[k].rows() != plant.n_u() || K[k].cols() != plant.n_y()) {
            throw Error(Errc::DimensionMismatch, "controller sample has wrong shape");
        }
        const ComplexMatrix ret = ComplexMatrix::Identity(plant.n_y(), plant.n_y()) - plant.G22[k] * K[k];
        const double cond = condition_number(ret);
        if (!(cond < kMaxReturnDifferenceCondition)) {
            std::ostringstream os;
            os.precision(17);
            os << "I - G22*K has condition " << cond << " at omega=" << plant.grid.omegas[k];
            throw Error(Errc::SingularReturnDifference, os.str());
        }
        out.samples[k] = plant.G11[k] + plant.G12[k] * K[k] * ret.partialPivLu().solve(plant.G21[k]);
    });
    return out;
}

/// Smallest sigma_min(Y) accepted by closed_loop_via_factors.
inline constexpr double kMinYSingularValue = 1e-12;

/// T = Phi^R (Phi G11 + X G21) + Psi G11 with Phi = (Y - X G22) G12^L,
/// Psi = I - G12 G12^L and Phi^R = G12 (Phi G12)^-1.
inline ClosedLoopFrf closed_loop_via_factors(const GeneralizedPlantFrf& plant, const ControllerFactors& f) {
    plant.validate();
    ClosedLoopFrf out{plant.grid, std::vector<ComplexMatrix>(plant.size())};
    parallel_for(plant.size(), [&](std::size_t k) {
        const cdouble z = std::polar(1.0, plant.grid.omegas[k] * plant.grid.Ts);
        const ComplexMatrix X = f.X(z);
        const ComplexMatrix Y = f.Y(z);
        if (!(min_singular_value(Y) > kMinYSingularValue)) {
            std::ostringstream os;
            os.precision(17);
            os << "Y is singular at omega=" << plant.grid.omegas[k];
            throw Error(Errc::SingularY, os.str());
        }
        const ComplexMatrix& G12 = plant.G12[k];
        const ComplexMatrix G12L = left_inverse(G12);
        const ComplexMatrix Phi = (Y - X * plant.G22[k]) * G12L;
        const ComplexMatrix Psi = ComplexMatrix::Identity(G12.rows(), G12.rows()) - G12 * G12L;
        const ComplexMatrix PhiR = G12 * (Phi * G12).partialPivLu().inverse();
        out.samples[k] = PhiR * (Phi * plant.G11[k] + X * plant.G21[k]) + Psi * plant.G11[k];
    });
    return out;
}

/// Max over the grid of the largest singular value.
inline double hinf_norm(const ClosedLoopFrf& T) {
    double m = 0.0;
    for (const auto& s : T.samples) {
        m = std::max(m, max_singular_value(s));
    }
    return m;
}

/// Squared H2 norm (1/2pi) * integral over (-pi, pi] of trace(T*T), computed as
/// the one-sided band integral doubled so that it equals the impulse-response
/// energy sum_k ||h_k||^2.
inline double h2_norm_squared(const ClosedLoopFrf& T) {
    const auto w = band_quadrature_weights(T.grid);
    double s = 0.0;
    for (std::size_t k = 0; k < T.size(); ++k) {
        s += w[k] * T.samples[k].squaredNorm();
    }
    return s / std::numbers::pi;
}

inline double h2_norm(const ClosedLoopFrf& T) { return std::sqrt(h2_norm_squared(T)); }

inline constexpr const char* kH2Convention =
    "H2: (1/2pi) * integral over the full band of trace(T*T), one-sided trapezoid doubled";

struct RegretReport {
    std::vector<double> lambda_max; // per grid point
    std::size_t argmax = 0;
    double argmax_omega = 0.0;
    double value = 0.0;
    bool well_posed = true;
};

/// lambda_max(T*T - That*That) per frequency and its grid maximum.
inline RegretReport spatial_regret_value(const ClosedLoopFrf& T, const ClosedLoopFrf& T_hat, double tol = 1e-6) {
    if (!(T.grid == T_hat.grid) || T.size() != T_hat.size()) {
        throw Error(Errc::GridMismatch, "closed loops sampled on different grids");
    }
    RegretReport r;
    r.lambda_max.resize(T.size());
    for (std::size_t k = 0; k < T.size(); ++k) {
        if (T[k].rows() != T_hat[k].rows() || T[k].cols() != T_hat[k].cols()) {
            throw Error(Errc::DimensionMismatch, "closed loops have different channel counts");
        }
        const ComplexMatrix L = T[k].adjoint() * T[k] - T_hat[k].adjoint() * T_hat[k];
        r.lambda_max[k] = max_eigenvalue(HermitianMatrix(L));
    }
    r.value = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < T.size(); ++k) {
        if (r.lambda_max[k] > r.value) {
            r.value = r.lambda_max[k];
            r.argmax = k;
        }
    }
    if (T.size() == 0) {
        r.value = 0.0;
    } else {
        r.argmax_omega = T.grid.omegas[r.argmax];
    }
    r.well_posed = r.value >= -tol;
    return r;
}

/// Squared induced gain sigma_max(T(e^{jw}))^2 at a grid frequency.
inline double worst_case_frequency_gain(const ClosedLoopFrf& T, double omega) {
    const double s = max_singular_value(T[grid_index(T.grid, omega)]);
    return s * s;
}

/// ||T(e^{jw})[:, col]||^2: twice the steady-state mean of ||z_t||^2 under a
/// unit sinusoid on channel col at an interior frequency.
inline double column_energy_gain(const ClosedLoopFrf& T, std::size_t col, double omega) {
    const std::size_t k = grid_index(T.grid, omega);
    if (col >= static_cast<std::size_t>(T[k].cols())) {
        std::ostringstream os;
        os << "channel " << col << " out of range (" << T[k].cols() << " inputs)";
        throw Error(Errc::BadChannel, os.str());
    }
    return T[k].col(static_cast<Eigen::Index>(col)).squaredNorm();
}

/// Sweeps of the two gains over the whole grid.
inline std::vector<double> worst_case_gain_sweep(const ClosedLoopFrf& T) {
    std::vector<double> v(T.size());
    for (std::size_t k = 0; k < T.size(); ++k) {
        const double s = max_singular_value(T[k]);
        v[k] = s * s;
    }
    return v;
}

inline std::vector<double> column_energy_sweep(const ClosedLoopFrf& T, std::size_t col) {
    std::vector<double> v(T.size());
    for (std::size_t k = 0; k < T.size(); ++k) {
        if (col >= static_cast<std::size_t>(T[k].cols())) {
            throw Error(Errc::BadChannel, "channel out of range");
        }
        v[k] = T[k].col(static_cast<Eigen::Index>(col)).squaredNorm();
    }
    return v;
}

// ---------------------------------------------------------------------------
// Time-domain experiments.

struct SineComponent {
    double omega = 0.0; // rad/s
    double amplitude = 1.0;
    double phase = 0.0;
};

/// Sum of sinusoids injected on the listed disturbance channels.
struct DisturbanceSpec {
    std::vector<std::size_t> channels;
    std::vector<SineComponent> components;
    double horizon = 0.0; // seconds; 0 selects the minimum admissible horizon
    double Ts = 0.0;
};

inline constexpr int kTransientPeriods = 10;
inline constexpr int kAveragePeriods = 40;

/// Fundamental period of the multisine: 2pi / f0 with f0 the largest
/// frequency of which every component is an integer multiple (tolerance
/// 1e-9); falls back to the lowest component.
inline double fundamental_period(const std::vector<SineComponent>& comps) {
    double wmin = std::numeric_limits<double>::infinity();
    for (const auto& c : comps) {
        if (c.omega > 0.0) {
            wmin = std::min(wmin, c.omega);
        }
    }
    if (!std::isfinite(wmin)) {
        return 0.0;
    }
    for (int n = 1; n <= 1000; ++n) {
        const double f0 = wmin / n;
        bool ok = true;
        for (const auto& c : comps) {
            const double r = c.omega / f0;
            if (std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r)) {
                ok = false;
                break;
            }
        }
        if (ok) {
            return 2.0 * std::numbers::pi / f0;
        }
    }
    return 2.0 * std::numbers::pi / wmin;
}

struct EnergyTrace {
    std::vector<double> t;
    std::vector<double> z_norm_sq;
    std::size_t transient_steps = 0;
    double mean_energy = 0.0; // mean ||z_t||^2 over the post-transient window

    /// sqrt of the summed post-transient energy.
    [[nodiscard]] double z_norm() const {
        double s = 0.0;
        for (std::size_t k = transient_steps; k < z_norm_sq.size(); ++k) {
            s += z_norm_sq[k];
        }
        return std::sqrt(s);
    }
};

/// Disturbance samples w_t (one column per step).
inline RealMatrix disturbance_signal(const DisturbanceSpec& d, Eigen::Index n_w, Eigen::Index steps) {
    RealMatrix w = RealMatrix::Zero(n_w, steps);
    for (auto ch : d.channels) {
        if (static_cast<Eigen::Index>(ch) >= n_w) {
            throw Error(Errc::BadChannel, "disturbance channel out of range");
        }
    }
    for (Eigen::Index k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * d.Ts;
        double v = 0.0;
        for (const auto& c : d.components) {
            v += c.amplitude * std::sin(c.omega * t + c.phase);
        }
        for (auto ch : d.channels) {
            w(static_cast<Eigen::Index>(ch), k) = v;
        }
    }
    return w;
}

/// Simulates the closed loop under the disturbance from rest. The first
/// kTransientPeriods fundamental periods are discarded and at least
/// kAveragePeriods are averaged.
inline EnergyTrace time_domain_experiment(const StateSpaceModel& model, const StateSpaceModel& controller,
                                          const DisturbanceSpec& d) {
    if (!(d.Ts > 0.0) || std::abs(d.Ts - model.Ts) > 1e-12 * model.Ts) {
        throw Error(Errc::BadRange, "disturbance sample time must match the model");
    }
    for (const auto& c : d.components) {
        if (!(c.omega >= 0.0) || c.omega >= std::numbers::pi / d.Ts) {
            throw Error(Errc::BadRange, "disturbance frequency outside [0, Nyquist)");
        }
    }
    const StateSpaceModel cl = close_loop(model, controller);
    const double rho = spectral_radius(cl.A);
    if (!(rho < 1.0)) {
        std::ostringstream os;
        os.precision(17);
        os << "closed-loop spectral radius " << rho;
        throw Error(Errc::UnstableClosedLoop, os.str());
    }
    const double period = fundamental_period(d.components);
    const double t_cut = kTransientPeriods * period;
    const double t_min = t_cut + kAveragePeriods * period;
    const double horizon = d.horizon > 0.0 ? d.horizon : t_min;
    if (horizon + 1e-9 < t_min) {
        throw Error(Errc::BadRange, "horizon shorter than the transient cut plus the averaging window");
    }
    const auto steps = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::ceil(horizon / d.Ts)));
    const RealMatrix w = disturbance_signal(d, cl.n_w, steps);

    EnergyTrace e;
    e.t.resize(static_cast<std::size_t>(steps));
    e.z_norm_sq.resize(static_cast<std::size_t>(steps));
    RealVector x = RealVector::Zero(cl.states());
    for (Eigen::Index k = 0; k < steps; ++k) {
        const RealVector z = cl.C * x + cl.D * w.col(k);
        e.t[static_cast<std::size_t>(k)] = static_cast<double>(k) * d.Ts;
        e.z_norm_sq[static_cast<std::size_t>(k)] = z.squaredNorm();
        x = cl.A * x + cl.B * w.col(k);
    }
    e.transient_steps = std::min<std::size_t>(static_cast<std::size_t>(std::ceil(t_cut / d.Ts)),
                                              e.z_norm_sq.size());
    const std::size_t count = e.z_norm_sq.size() - e.transient_steps;
    double s = 0.0;
    for (std::size_t k = e.transient_steps; k < e.z_norm_sq.size(); ++k) {
        s += e.z_norm_sq[k];
    }
    e.mean_energy = count > 0 ? s / static_cast<double>(count) : 0.0;
    return e;
}

/// 100 * (1 - ||z||_candidate / ||z||_baseline) over equal post-transient records.
inline double percent_reduction(const EnergyTrace& candidate, const EnergyTrace& baseline) {
    const double b = std::sqrt(baseline.mean_energy);
    if (!(b > 0.0)) {
        return 0.0;
    }
    return 100.0 * (1.0 - std::sqrt(candidate.mean_energy) / b);
}

} // namespace ddsr
