#pragma once

// Text formats: JSON for models, controllers, reports and run configs; CSV for
// sampled data. Every CSV number is printed with 17 significant digits.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ddsr/case_study.hpp"
#include "ddsr/error.hpp"
#include "ddsr/evaluation.hpp"
#include "ddsr/frf.hpp"
#include "ddsr/grid.hpp"
#include "ddsr/lti.hpp"
#include "ddsr/structure.hpp"
#include "ddsr/synthesis.hpp"

namespace ddsr::io {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline std::string fmt(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    if (s == "nan") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    if (s == "inf") {
        return std::numeric_limits<double>::infinity();
    }
    if (s == "-inf") {
        return -std::numeric_limits<double>::infinity();
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) {
        throw Error(Errc::Io, "bad number '" + s + "'");
    }
    return v;
}

inline long parse_index(const std::string& s) {
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size() || v < 0) {
        throw Error(Errc::Io, "bad index '" + s + "'");
    }
    return v;
}

// ---------------------------------------------------------------------------
// Files.

inline void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(Errc::Io, "cannot write " + path.string());
    }
    out << content;
    if (!out) {
        throw Error(Errc::Io, "write failed for " + path.string());
    }
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::Io, "cannot read " + path.string());
    }
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::size_t column(const std::string& name) const {
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (header[c] == name) {
                return c;
            }
        }
        throw Error(Errc::Io, "missing CSV column '" + name + "'");
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

inline CsvTable parse_csv(const std::string& text, const std::string& origin = "CSV") {
    CsvTable t;
    std::istringstream is(text);
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto cells = split_csv_line(line);
        if (first) {
            t.header = std::move(cells);
            first = false;
        } else {
            if (cells.size() != t.header.size()) {
                throw Error(Errc::Io, origin + ": row with " + std::to_string(cells.size()) + " cells, expected " +
                                          std::to_string(t.header.size()));
            }
            t.rows.push_back(std::move(cells));
        }
    }
    if (first) {
        throw Error(Errc::Io, origin + ": empty file");
    }
    return t;
}

inline CsvTable read_csv(const fs::path& path) { return parse_csv(read_file(path), path.string()); }

inline void require_header(const CsvTable& t, const std::vector<std::string>& expected, const std::string& what) {
    if (t.header != expected) {
        std::string e;
        for (const auto& h : expected) {
            e += (e.empty() ? "" : ",") + h;
        }
        throw Error(Errc::Io, what + ": expected header " + e);
    }
}

// ---------------------------------------------------------------------------
// Matrices and state-space models.

inline json matrix_to_json(const RealMatrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json r = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            r.push_back(m(i, j));
        }
        rows.push_back(std::move(r));
    }
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

inline RealMatrix matrix_from_json(const json& j, const std::string& name) {
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
        throw Error(Errc::Io, "matrix '" + name + "' needs rows, cols and data");
    }
    const auto r = j.at("rows").get<Eigen::Index>();
    const auto c = j.at("cols").get<Eigen::Index>();
    const json& d = j.at("data");
    if (r < 0 || c < 0 || !d.is_array() || static_cast<Eigen::Index>(d.size()) != r) {
        throw Error(Errc::Io, "matrix '" + name + "' data does not have the declared row count");
    }
    RealMatrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        const json& row = d.at(static_cast<std::size_t>(i));
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c) {
            throw Error(Errc::Io, "matrix '" + name + "' row " + std::to_string(i) + " has the wrong length");
        }
        for (Eigen::Index k = 0; k < c; ++k) {
            m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
        }
    }
    return m;
}

/// {"format": "ddsr-state-space", "version": 1, "Ts", "n_w", "n_z", "A", "B", "C", "D"}
inline json model_to_json(const StateSpaceModel& m) {
    return json{{"format", "ddsr-state-space"}, {"version", 1},         {"Ts", m.Ts},
                {"n_w", m.n_w},                  {"n_z", m.n_z},        {"A", matrix_to_json(m.A)},
                {"B", matrix_to_json(m.B)},      {"C", matrix_to_json(m.C)}, {"D", matrix_to_json(m.D)}};
}

inline StateSpaceModel model_from_json(const json& j) {
    try {
        if (j.value("format", std::string()) != "ddsr-state-space" || j.value("version", 0) != 1) {
            throw Error(Errc::Io, "not a version-1 ddsr-state-space document");
        }
        StateSpaceModel m;
        m.Ts = j.at("Ts").get<double>();
        m.n_w = j.at("n_w").get<Eigen::Index>();
        m.n_z = j.at("n_z").get<Eigen::Index>();
        m.A = matrix_from_json(j.at("A"), "A");
        m.B = matrix_from_json(j.at("B"), "B");
        m.C = matrix_from_json(j.at("C"), "C");
        m.D = matrix_from_json(j.at("D"), "D");
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw Error(Errc::Io, std::string("state-space document: ") + e.what());
    }
}

inline void save_model(const fs::path& path, const StateSpaceModel& m) { write_file(path, model_to_json(m).dump(2) + "\n"); }

inline json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw Error(Errc::Io, origin + ": " + e.what());
    }
}

inline StateSpaceModel load_model(const fs::path& path) {
    return model_from_json(parse_json(read_file(path), path.string()));
}

// ---------------------------------------------------------------------------
// FRF and experiment CSVs.

struct NamedFrf {
    std::string name;
    const FrfBlock* block;
};

/// omega,block,row,col,re,im, grid-major then block, row, col.
inline std::string frf_csv(const FrequencyGrid& grid, const std::vector<NamedFrf>& blocks) {
    std::ostringstream os;
    os << "omega,block,row,col,re,im\n";
    for (std::size_t k = 0; k < grid.size(); ++k) {
        for (const auto& nb : blocks) {
            const ComplexMatrix& s = (*nb.block)[k];
            for (Eigen::Index i = 0; i < s.rows(); ++i) {
                for (Eigen::Index c = 0; c < s.cols(); ++c) {
                    os << fmt(grid.omegas[k]) << ',' << nb.name << ',' << i << ',' << c << ','
                       << fmt(s(i, c).real()) << ',' << fmt(s(i, c).imag()) << '\n';
                }
            }
        }
    }
    return os.str();
}

struct LoadedFrf {
    FrequencyGrid grid;
    FrfBlock block;
};

inline LoadedFrf parse_frf_csv(const CsvTable& t, const std::string& block, double Ts) {
    require_header(t, {"omega", "block", "row", "col", "re", "im"}, "FRF CSV");
    LoadedFrf out;
    out.grid.Ts = Ts;
    std::map<double, std::map<std::pair<long, long>, cdouble>> data;
    long rows = 0;
    long cols = 0;
    for (const auto& r : t.rows) {
        if (r[1] != block) {
            continue;
        }
        const long i = parse_index(r[2]);
        const long c = parse_index(r[3]);
        rows = std::max(rows, i + 1);
        cols = std::max(cols, c + 1);
        data[parse_double(r[0])][{i, c}] = cdouble(parse_double(r[4]), parse_double(r[5]));
    }
    if (data.empty()) {
        throw Error(Errc::Io, "FRF CSV has no rows for block '" + block + "'");
    }
    out.block.rows = rows;
    out.block.cols = cols;
    for (const auto& [w, entries] : data) {
        if (static_cast<long>(entries.size()) != rows * cols) {
            throw Error(Errc::Io, "FRF CSV block '" + block + "' is incomplete at omega " + fmt(w));
        }
        ComplexMatrix m(rows, cols);
        for (const auto& [ij, v] : entries) {
            m(ij.first, ij.second) = v;
        }
        out.grid.omegas.push_back(w);
        out.block.samples.push_back(std::move(m));
    }
    out.grid.validate();
    return out;
}

inline LoadedFrf load_frf_csv(const fs::path& path, const std::string& block, double Ts) {
    return parse_frf_csv(read_csv(path), block, Ts);
}

/// k,experiment,channel,u,y for one experiment; channels beyond the input or
/// output count leave that cell empty.
inline std::string experiment_csv(const ExperimentBatch& b, Eigen::Index e) {
    std::ostringstream os;
    os << "k,experiment,channel,u,y\n";
    const auto nc = std::max(b.inputs(), b.outputs());
    for (std::size_t k = 0; k < b.samples(); ++k) {
        for (Eigen::Index c = 0; c < nc; ++c) {
            os << k << ',' << e << ',' << c << ',';
            if (c < b.inputs()) {
                os << fmt(b.U[k](c, e));
            }
            os << ',';
            if (c < b.outputs()) {
                os << fmt(b.Y[k](c, e));
            }
            os << '\n';
        }
    }
    return os.str();
}

inline std::string experiment_file_name(Eigen::Index e) { return "experiment_" + std::to_string(e) + ".csv"; }

/// Reassembles a batch from per-experiment tables (any order of rows).
inline ExperimentBatch batch_from_csv(const std::vector<CsvTable>& tables, double Ts) {
    ExperimentBatch b;
    b.Ts = Ts;
    struct Cell {
        std::optional<double> u, y;
    };
    std::map<long, std::map<long, std::map<long, Cell>>> data; // experiment -> k -> channel
    long ns = 0;
    long m = 0;
    long p = 0;
    for (const auto& t : tables) {
        require_header(t, {"k", "experiment", "channel", "u", "y"}, "experiment CSV");
        for (const auto& r : t.rows) {
            const long k = parse_index(r[0]);
            const long e = parse_index(r[1]);
            const long c = parse_index(r[2]);
            Cell& cell = data[e][k][c];
            if (!r[3].empty()) {
                cell.u = parse_double(r[3]);
                m = std::max(m, c + 1);
            }
            if (!r[4].empty()) {
                cell.y = parse_double(r[4]);
                p = std::max(p, c + 1);
            }
            ns = std::max(ns, k + 1);
        }
    }
    const auto ne = static_cast<long>(data.size());
    if (ne == 0 || ns == 0) {
        throw Error(Errc::Io, "no experiment samples");
    }
    if (data.rbegin()->first != ne - 1) {
        throw Error(Errc::Io, "experiment indices are not contiguous from 0");
    }
    b.U.assign(static_cast<std::size_t>(ns), RealMatrix::Zero(m, ne));
    b.Y.assign(static_cast<std::size_t>(ns), RealMatrix::Zero(p, ne));
    for (const auto& [e, steps] : data) {
        if (static_cast<long>(steps.size()) != ns) {
            throw Error(Errc::Io, "experiment " + std::to_string(e) + " has missing time steps");
        }
        for (const auto& [k, chans] : steps) {
            for (const auto& [c, cell] : chans) {
                if (cell.u) {
                    b.U[static_cast<std::size_t>(k)](c, e) = *cell.u;
                }
                if (cell.y) {
                    b.Y[static_cast<std::size_t>(k)](c, e) = *cell.y;
                }
            }
        }
    }
    b.validate();
    return b;
}

// ---------------------------------------------------------------------------
// Controllers and reports.

inline std::string theta_csv(const RealVector& theta) {
    std::ostringstream os;
    os << "index,value\n";
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        os << i << ',' << fmt(theta(i)) << '\n';
    }
    return os.str();
}

inline RealVector parse_theta_csv(const CsvTable& t) {
    require_header(t, {"index", "value"}, "theta CSV");
    RealVector v(static_cast<Eigen::Index>(t.rows.size()));
    std::vector<bool> seen(t.rows.size(), false);
    for (const auto& r : t.rows) {
        const auto i = static_cast<std::size_t>(parse_index(r[0]));
        if (i >= seen.size() || seen[i]) {
            throw Error(Errc::Io, "theta CSV indices must be a permutation of 0..n-1");
        }
        seen[i] = true;
        v(static_cast<Eigen::Index>(i)) = parse_double(r[1]);
    }
    return v;
}

inline json pattern_to_json(const SparsityPattern& p) { return json(p.to_strings()); }

inline SparsityPattern pattern_from_json(const json& j) {
    if (!j.is_array()) {
        throw Error(Errc::Config, "pattern entries must be an array of rows");
    }
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : j) {
        if (!r.is_array()) {
            throw Error(Errc::Config, "pattern row must be an array");
        }
        std::vector<std::string> cells;
        for (const auto& c : r) {
            if (!c.is_string()) {
                throw Error(Errc::Config, "pattern entries must be strings \"0\", \"x\" or \"z^-k\"");
            }
            cells.push_back(c.get<std::string>());
        }
        rows.push_back(std::move(cells));
    }
    return SparsityPattern::from_strings(rows);
}

/// {"format": "ddsr-controller", "version": 1, "pattern", "order", "pole", "theta"}
inline json controller_to_json(const ControllerFactors& f) {
    json theta = json::array();
    for (Eigen::Index i = 0; i < f.theta.size(); ++i) {
        theta.push_back(f.theta(i));
    }
    return json{{"format", "ddsr-controller"},
                {"version", 1},
                {"pattern", pattern_to_json(f.param->pattern)},
                {"order", f.param->order},
                {"pole", f.param->pole},
                {"theta", std::move(theta)}};
}

inline ControllerFactors controller_from_json(const json& j) {
    try {
        if (j.value("format", std::string()) != "ddsr-controller" || j.value("version", 0) != 1) {
            throw Error(Errc::Io, "not a version-1 ddsr-controller document");
        }
        const auto param = build_factor_parameterization(pattern_from_json(j.at("pattern")), j.at("order").get<int>(),
                                                         j.at("pole").get<double>());
        const auto& t = j.at("theta");
        RealVector theta(static_cast<Eigen::Index>(t.size()));
        for (std::size_t i = 0; i < t.size(); ++i) {
            theta(static_cast<Eigen::Index>(i)) = t[i].get<double>();
        }
        return make_factors(param, theta);
    } catch (const json::exception& e) {
        throw Error(Errc::Io, std::string("controller document: ") + e.what());
    }
}

inline void save_controller(const fs::path& path, const ControllerFactors& f) {
    write_file(path, controller_to_json(f).dump(2) + "\n");
}

inline ControllerFactors load_controller(const fs::path& path) {
    return controller_from_json(parse_json(read_file(path), path.string()));
}

inline std::string history_csv(const SynthesisReport& rep) {
    std::ostringstream os;
    os << "iter,gamma,solve_time,spectral_radius\n";
    for (const auto& h : rep.history) {
        os << h.iter << ',' << fmt(h.gamma) << ',' << fmt(h.solve_time) << ',' << fmt(h.spectral_radius) << '\n';
    }
    return os.str();
}

inline json optional_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json report_to_json(const SynthesisReport& rep) {
    json hist = json::array();
    for (const auto& h : rep.history) {
        hist.push_back(json{{"iter", h.iter},
                            {"gamma", optional_number(h.gamma)},
                            {"solve_time", h.solve_time},
                            {"spectral_radius", optional_number(h.spectral_radius)},
                            {"phase_change", optional_number(h.phase_change)},
                            {"status", sdp::to_string(h.status)},
                            {"solver_iterations", h.solver_iterations},
                            {"psd_residual", h.psd_residual}});
    }
    return json{{"objective", to_string(rep.kind)},
                {"converged", rep.converged},
                {"final_gamma", optional_number(rep.final_gamma())},
                {"initial_spectral_radius", optional_number(rep.initial_spectral_radius)},
                {"history", std::move(hist)}};
}

inline std::string sweep_csv(const FrequencyGrid& grid, const std::vector<double>& values) {
    if (values.size() != grid.size()) {
        throw Error(Errc::GridMismatch, "sweep length differs from grid length");
    }
    std::ostringstream os;
    os << "omega,value\n";
    for (std::size_t k = 0; k < grid.size(); ++k) {
        os << fmt(grid.omegas[k]) << ',' << fmt(values[k]) << '\n';
    }
    return os.str();
}

inline std::string energy_csv(const EnergyTrace& e) {
    std::ostringstream os;
    os << "t,z_norm_sq\n";
    for (std::size_t k = 0; k < e.t.size(); ++k) {
        os << fmt(e.t[k]) << ',' << fmt(e.z_norm_sq[k]) << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Run configuration (schema version 1).

inline constexpr int kSchemaVersion = 1;

struct RunConfig {
    CaseStudyConfig study;
    ObjectiveKind objective = ObjectiveKind::SpatialRegret;
    bool oracle_specified = false; // an oracle_pattern section was given
    std::string g22_file;          // FRF CSV replacing the estimated G22
    std::string output_dir;
    unsigned threads = 0;
};

/// Every accepted key, printed by `--help`.
inline const char* config_keys_help() {
    return R"(Config file (JSON, all keys optional except schema_version):
  schema_version            must be 1
  plant.source              "power-grid" (default) or "state-space"
  plant.file                state-space JSON (source = state-space)
  plant.bus_count           number of buses (power-grid)
  plant.inertia             m_i, number or per-bus array
  plant.damping             d_i, number or per-bus array
  plant.coupling            k_ij on every line of the bus chain
  plant.self_stiffness      k_i, number, per-bus array, or null for the sum of incident couplings
  plant.Ts                  sampling period [s]
  plant.g22_file            FRF CSV (block G22) used instead of the estimate
  grid.points               number of log-spaced frequencies
  grid.w_min, grid.w_max    band [rad/s]; w_max = 0 selects pi/Ts
  experiment.samples        N_s per experiment
  experiment.excitation     "impulse" or "multisine"
  experiment.multisine_freqs  excitation frequencies [rad/s]
  experiment.seed           multisine phase seed
  experiment.settled_tail   extrapolate the final sample as a constant tail
  pattern.comm_delay        delay on chain links of the controller pattern
  pattern.entries           explicit pattern, rows of "0", "x", "z^-k"
  oracle_pattern.hub        bus linked to every other bus without delay
  oracle_pattern.entries    explicit oracle pattern
  objective                 "h2", "hinf" or "spatial-regret"
  factor.order, factor.pole basis order and pole of the factor entries
  synthesis.max_iter, synthesis.rel_tol, synthesis.monotone_slack
  synthesis.theta_bound, synthesis.regularization, synthesis.initial_droop
  solver.feas_tol, solver.gap_tol, solver.near_feas_tol, solver.infeas_tol, solver.max_iter
  disturbance.channels      disturbance inputs driven by the multisine
  disturbance.components    [{omega, amplitude, phase}, ...]
  disturbance.horizon       simulated time [s], 0 for the minimum length
  output_dir                default output directory
  threads                   worker cap, 0 for all cores
)";
}

namespace detail {

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) {
            throw Error(Errc::Config, where() + " must be an object");
        }
    }

    /// Rejects keys that were never looked up.
    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) {
                throw Error(Errc::Config, "unknown key '" + prefix() + k + "'");
            }
        }
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    const json& at(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        if (!has(key)) {
            return;
        }
        const json& v = j_.at(key);
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) {
                    throw Error(Errc::Config, "");
                }
            } else if constexpr (std::is_arithmetic_v<T>) {
                if (!v.is_number()) {
                    throw Error(Errc::Config, "");
                }
                if constexpr (std::is_integral_v<T>) {
                    if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<long long>() < 0)) {
                        throw Error(Errc::Config, "");
                    }
                }
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) {
                    throw Error(Errc::Config, "");
                }
            }
            out = v.get<T>();
        } catch (const std::exception&) {
            throw Error(Errc::Config, "key '" + prefix() + key + "' has the wrong type");
        }
    }

    std::vector<double> numbers(const std::string& key) {
        const json& v = at(key);
        std::vector<double> out;
        if (v.is_number()) {
            out.push_back(v.get<double>());
            return out;
        }
        if (!v.is_array()) {
            throw Error(Errc::Config, "key '" + prefix() + key + "' must be a number or an array of numbers");
        }
        for (const auto& x : v) {
            if (!x.is_number()) {
                throw Error(Errc::Config, "key '" + prefix() + key + "' must contain numbers only");
            }
            out.push_back(x.get<double>());
        }
        return out;
    }

    Reader child(const std::string& key) { return Reader(at(key), prefix() + key); }

    [[nodiscard]] std::string prefix() const { return path_.empty() ? "" : path_ + "."; }

private:
    [[nodiscard]] std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline std::vector<double> per_bus(const std::vector<double>& v, std::size_t n, const std::string& key) {
    if (v.size() == 1) {
        return std::vector<double>(n, v.front());
    }
    if (v.size() != n) {
        throw Error(Errc::Config, "key '" + key + "' needs 1 or bus_count values");
    }
    return v;
}

inline std::string resolve(const fs::path& base, const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute()) {
        return p;
    }
    return (base / p).lexically_normal().string();
}

} // namespace detail

/// Parses a version-1 config; relative paths are resolved against `base_dir`.
inline RunConfig parse_run_config(const json& j, const fs::path& base_dir = {}) {
    RunConfig rc;
    CaseStudyConfig& cs = rc.study;
    detail::Reader root(j, "");
    int version = 0;
    if (!root.has("schema_version")) {
        throw Error(Errc::Config, "missing schema_version");
    }
    root.get("schema_version", version);
    if (version != kSchemaVersion) {
        throw Error(Errc::Config, "unsupported schema_version " + std::to_string(version));
    }

    if (root.has("plant")) {
        auto r = root.child("plant");
        std::string source = "power-grid";
        r.get("source", source);
        if (source == "power-grid") {
            std::size_t n = cs.plant.bus_count;
            r.get("bus_count", n);
            if (n < 2) {
                throw Error(Errc::Config, "plant.bus_count must be >= 2");
            }
            double m = 2.0, d = 2.0, k = 20.0, Ts = cs.plant.Ts;
            r.get("Ts", Ts);
            r.get("coupling", k);
            std::vector<double> mv{m}, dv{d};
            if (r.has("inertia")) {
                mv = r.numbers("inertia");
            }
            if (r.has("damping")) {
                dv = r.numbers("damping");
            }
            auto p = PowerGridParams::uniform_line(n, m, d, k, Ts);
            p.inertia = detail::per_bus(mv, n, "plant.inertia");
            p.damping = detail::per_bus(dv, n, "plant.damping");
            p.self_stiffness.assign(n, 2.0 * k);
            if (r.has("self_stiffness")) {
                if (r.at("self_stiffness").is_null()) {
                    p.self_stiffness.clear();
                } else {
                    p.self_stiffness = detail::per_bus(r.numbers("self_stiffness"), n, "plant.self_stiffness");
                }
            }
            cs.plant = p;
        } else if (source == "state-space") {
            std::string file;
            r.get("file", file);
            if (file.empty()) {
                throw Error(Errc::Config, "plant.source = state-space needs plant.file");
            }
            cs.model = load_model(detail::resolve(base_dir, file));
        } else {
            throw Error(Errc::Config, "plant.source must be power-grid or state-space");
        }
        r.get("g22_file", rc.g22_file);
        rc.g22_file = detail::resolve(base_dir, rc.g22_file);
        r.finish();
    }

    if (root.has("grid")) {
        auto r = root.child("grid");
        r.get("points", cs.grid.points);
        r.get("w_min", cs.grid.w_min);
        r.get("w_max", cs.grid.w_max);
        r.finish();
    }

    if (root.has("experiment")) {
        auto r = root.child("experiment");
        r.get("samples", cs.experiment.samples);
        std::string ex = "impulse";
        r.get("excitation", ex);
        if (ex == "impulse") {
            cs.experiment.excitation = Excitation::Impulse;
        } else if (ex == "multisine") {
            cs.experiment.excitation = Excitation::Multisine;
        } else {
            throw Error(Errc::Config, "experiment.excitation must be impulse or multisine");
        }
        if (r.has("multisine_freqs")) {
            cs.experiment.multisine_freqs = r.numbers("multisine_freqs");
        }
        r.get("seed", cs.experiment.seed);
        r.get("settled_tail", cs.experiment.settled_tail);
        r.finish();
    }

    if (root.has("pattern")) {
        auto r = root.child("pattern");
        r.get("comm_delay", cs.comm_delay);
        if (r.has("entries")) {
            cs.pattern = pattern_from_json(r.at("entries"));
        }
        r.finish();
    }

    if (root.has("oracle_pattern")) {
        rc.oracle_specified = true;
        auto r = root.child("oracle_pattern");
        r.get("hub", cs.oracle_hub);
        if (r.has("entries")) {
            cs.oracle_pattern = pattern_from_json(r.at("entries"));
        }
        r.finish();
    }

    if (root.has("objective")) {
        std::string o;
        root.get("objective", o);
        rc.objective = parse_objective(o);
    }

    if (root.has("factor")) {
        auto r = root.child("factor");
        r.get("order", cs.order);
        r.get("pole", cs.pole);
        r.finish();
    }

    if (root.has("synthesis")) {
        auto r = root.child("synthesis");
        r.get("max_iter", cs.synthesis.max_iter);
        r.get("rel_tol", cs.synthesis.rel_tol);
        r.get("monotone_slack", cs.synthesis.monotone_slack);
        r.get("theta_bound", cs.synthesis.lmi.theta_bound);
        r.get("regularization", cs.synthesis.lmi.regularization);
        r.get("initial_droop", cs.initial_droop);
        r.finish();
    }

    if (root.has("solver")) {
        auto r = root.child("solver");
        r.get("feas_tol", cs.synthesis.solver.feas_tol);
        r.get("gap_tol", cs.synthesis.solver.gap_tol);
        r.get("near_feas_tol", cs.synthesis.solver.near_feas_tol);
        r.get("infeas_tol", cs.synthesis.solver.infeas_tol);
        r.get("max_iter", cs.synthesis.solver.max_iter);
        r.finish();
    }

    if (root.has("disturbance")) {
        auto r = root.child("disturbance");
        if (r.has("channels")) {
            cs.disturbance.channels.clear();
            for (double c : r.numbers("channels")) {
                if (c < 0 || c != std::floor(c)) {
                    throw Error(Errc::Config, "disturbance.channels must be nonnegative integers");
                }
                cs.disturbance.channels.push_back(static_cast<std::size_t>(c));
            }
        }
        if (r.has("components")) {
            const json& comps = r.at("components");
            if (!comps.is_array()) {
                throw Error(Errc::Config, "disturbance.components must be an array");
            }
            cs.disturbance.components.clear();
            for (std::size_t i = 0; i < comps.size(); ++i) {
                detail::Reader c(comps[i], "disturbance.components[" + std::to_string(i) + "]");
                SineComponent s;
                c.get("omega", s.omega);
                c.get("amplitude", s.amplitude);
                c.get("phase", s.phase);
                c.finish();
                cs.disturbance.components.push_back(s);
            }
        }
        r.get("horizon", cs.disturbance.horizon);
        r.finish();
    }

    root.get("output_dir", rc.output_dir);
    rc.output_dir = detail::resolve(base_dir, rc.output_dir);
    root.get("threads", rc.threads);
    root.finish();
    return rc;
}

inline RunConfig load_run_config(const fs::path& path) {
    return parse_run_config(parse_json(read_file(path), path.string()), path.parent_path());
}

} // namespace ddsr::io
