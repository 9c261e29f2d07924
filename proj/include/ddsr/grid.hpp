#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "ddsr/error.hpp"

namespace ddsr {

enum class GridSpacing { Log, Linear, Custom };

/// Ordered evaluation frequencies (rad/s) inside [0, pi/Ts).
struct FrequencyGrid {
    double Ts = 1.0;
    std::vector<double> omegas;
    GridSpacing spacing = GridSpacing::Custom;

    [[nodiscard]] std::size_t size() const noexcept { return omegas.size(); }
    [[nodiscard]] double nyquist() const noexcept { return std::numbers::pi / Ts; }

    /// Throws BadRange when the invariants (strictly increasing, below Nyquist,
    /// nonnegative, Ts > 0) are violated.
    void validate() const {
        if (!(Ts > 0.0) || !std::isfinite(Ts)) {
            throw Error(Errc::BadRange, "grid sampling period must be positive");
        }
        for (std::size_t k = 0; k < omegas.size(); ++k) {
            const double w = omegas[k];
            if (!(w >= 0.0) || !(w < nyquist())) {
                std::ostringstream os;
                os.precision(17);
                os << "grid frequency " << w << " outside [0, " << nyquist() << ")";
                throw Error(Errc::BadRange, os.str());
            }
            if (k > 0 && !(w > omegas[k - 1])) {
                throw Error(Errc::BadRange, "grid frequencies must be strictly increasing");
            }
        }
    }

    friend bool operator==(const FrequencyGrid& a, const FrequencyGrid& b) {
        return a.Ts == b.Ts && a.omegas == b.omegas;
    }
};

/// Relative pull-back applied when the requested top frequency is exactly Nyquist.
inline constexpr double kNyquistClamp = 1e-9;

/// n logarithmically spaced points in [w_min, w_max]; a top point at Nyquist is
/// pulled inside the half-open band.
inline FrequencyGrid make_log_grid(double w_min, double w_max, std::size_t n, double Ts) {
    if (!(Ts > 0.0)) {
        throw Error(Errc::BadRange, "Ts must be positive");
    }
    const double nyq = std::numbers::pi / Ts;
    if (!(w_min > 0.0) || !(w_max > w_min) || w_max > nyq * (1.0 + 1e-15) || n == 0) {
        std::ostringstream os;
        os.precision(17);
        os << "need 0 < w_min < w_max <= pi/Ts and n >= 1 (w_min=" << w_min << ", w_max=" << w_max
           << ", pi/Ts=" << nyq << ", n=" << n << ")";
        throw Error(Errc::BadRange, os.str());
    }
    FrequencyGrid g;
    g.Ts = Ts;
    g.spacing = GridSpacing::Log;
    g.omegas.resize(n);
    if (n == 1) {
        g.omegas[0] = w_min;
        return g;
    }
    const double top = w_max >= nyq ? (1.0 - kNyquistClamp) * nyq : w_max;
    const double la = std::log10(w_min);
    const double lb = std::log10(top);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / static_cast<double>(n - 1);
        g.omegas[k] = std::pow(10.0, la + t * (lb - la));
    }
    g.omegas.front() = w_min;
    g.omegas.back() = top;
    return g;
}

/// n evenly spaced points in [w_min, w_max], same Nyquist clamp.
inline FrequencyGrid make_linear_grid(double w_min, double w_max, std::size_t n, double Ts) {
    if (!(Ts > 0.0)) {
        throw Error(Errc::BadRange, "Ts must be positive");
    }
    const double nyq = std::numbers::pi / Ts;
    if (!(w_min >= 0.0) || !(w_max > w_min) || w_max > nyq * (1.0 + 1e-15) || n == 0) {
        throw Error(Errc::BadRange, "need 0 <= w_min < w_max <= pi/Ts and n >= 1");
    }
    FrequencyGrid g;
    g.Ts = Ts;
    g.spacing = GridSpacing::Linear;
    g.omegas.resize(n);
    const double top = w_max >= nyq ? (1.0 - kNyquistClamp) * nyq : w_max;
    for (std::size_t k = 0; k < n; ++k) {
        g.omegas[k] = n == 1 ? w_min
                             : w_min + (top - w_min) * static_cast<double>(k) / static_cast<double>(n - 1);
    }
    return g;
}

/// Trapezoid weights for integrating over [0, pi/Ts] in normalized frequency
/// theta = omega*Ts. The first and last samples are held constant out to 0 and
/// pi/Ts so a grid that starts above DC still covers the whole band.
inline std::vector<double> band_quadrature_weights(const FrequencyGrid& g) {
    const std::size_t n = g.size();
    std::vector<double> w(n, 0.0);
    if (n == 0) {
        return w;
    }
    std::vector<double> th(n);
    for (std::size_t k = 0; k < n; ++k) {
        th[k] = g.omegas[k] * g.Ts;
    }
    w.front() += th.front();
    w.back() += std::numbers::pi - th.back();
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double h = th[k + 1] - th[k];
        w[k] += 0.5 * h;
        w[k + 1] += 0.5 * h;
    }
    return w;
}

/// Index of omega in the grid (relative match 1e-12), or throws FrequencyNotOnGrid.
inline std::size_t grid_index(const FrequencyGrid& g, double omega) {
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (std::abs(g.omegas[k] - omega) <= 1e-12 * std::max(1.0, std::abs(omega))) {
            return k;
        }
    }
    std::ostringstream os;
    os.precision(17);
    os << "omega=" << omega << " is not a grid frequency";
    throw Error(Errc::FrequencyNotOnGrid, os.str());
}

} // namespace ddsr
