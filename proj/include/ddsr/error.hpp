#pragma once

#include <stdexcept>
#include <string>

namespace ddsr {

enum class Errc {
    RankDeficient,
    DimensionMismatch,
    PoleOnGrid,
    IllPosedInterconnection,
    SingularDY,
    BadRange,
    SingularInputSpectrum,
    GridMismatch,
    BadEdge,
    BadPole,
    ImproperEntry,
    SolverFailed,
    StabilityLost,
    NotASuperset,
    SingularReturnDifference,
    SingularY,
    FrequencyNotOnGrid,
    BadChannel,
    UnstableClosedLoop,
    Config,
    Io,
};

inline const char* to_string(Errc e) {
    switch (e) {
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::PoleOnGrid: return "PoleOnGrid";
    case Errc::IllPosedInterconnection: return "IllPosedInterconnection";
    case Errc::SingularDY: return "SingularDY";
    case Errc::BadRange: return "BadRange";
    case Errc::SingularInputSpectrum: return "SingularInputSpectrum";
    case Errc::GridMismatch: return "GridMismatch";
    case Errc::BadEdge: return "BadEdge";
    case Errc::BadPole: return "BadPole";
    case Errc::ImproperEntry: return "ImproperEntry";
    case Errc::SolverFailed: return "SolverFailed";
    case Errc::StabilityLost: return "StabilityLost";
    case Errc::NotASuperset: return "NotASuperset";
    case Errc::SingularReturnDifference: return "SingularReturnDifference";
    case Errc::SingularY: return "SingularY";
    case Errc::FrequencyNotOnGrid: return "FrequencyNotOnGrid";
    case Errc::BadChannel: return "BadChannel";
    case Errc::UnstableClosedLoop: return "UnstableClosedLoop";
    case Errc::Config: return "Config";
    case Errc::Io: return "Io";
    }
    return "Unknown";
}

/// Library exception. `code()` identifies the failure; the message carries
/// the numeric evidence (singular values, offending frequency, ...).
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

} // namespace ddsr
