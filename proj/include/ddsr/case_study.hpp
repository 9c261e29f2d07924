#pragma once

// End-to-end five-bus pipeline: experiments, FRF estimation, oracle and
// structured syntheses, frequency sweeps and the time-domain comparison.

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ddsr/error.hpp"
#include "ddsr/evaluation.hpp"
#include "ddsr/frf.hpp"
#include "ddsr/grid.hpp"
#include "ddsr/lti.hpp"
#include "ddsr/structure.hpp"
#include "ddsr/synthesis.hpp"

namespace ddsr {

enum class Excitation { Impulse, Multisine };

struct ExperimentConfig {
    std::size_t samples = 4000;
    Excitation excitation = Excitation::Impulse;
    std::vector<double> multisine_freqs; // rad/s, multisine only
    std::uint64_t seed = 1;
    bool settled_tail = false;
};

struct GridConfig {
    std::size_t points = 150;
    double w_min = 1e-2;
    double w_max = 0.0; // 0 selects pi/Ts
};

struct CaseStudyConfig {
    PowerGridParams plant = PowerGridParams::case_study();
    std::optional<StateSpaceModel> model; // replaces the power grid when set
    std::optional<SparsityPattern> pattern;
    std::optional<SparsityPattern> oracle_pattern;
    GridConfig grid;
    ExperimentConfig experiment;
    int order = 2;
    double pole = 0.0;
    int comm_delay = 1;
    std::size_t oracle_hub = 0; // bus whose measurement every oracle row receives
    double initial_droop = 0.0; // K_c = -initial_droop * I
    SynthesisConfig synthesis = [] {
        SynthesisConfig c;
        c.max_iter = 15;
        c.record_timing = false;
        return c;
    }();
    DisturbanceSpec disturbance = [] {
        DisturbanceSpec d;
        d.channels = {0};
        d.components = {{8.0, 1.0, std::numbers::pi / 2.0}, {38.0, 1.0, std::numbers::pi / 2.0}};
        return d;
    }();
};

inline StateSpaceModel case_study_model(const CaseStudyConfig& cfg) {
    if (cfg.model) {
        cfg.model->validate();
        return *cfg.model;
    }
    return assemble_networked(build_power_grid(cfg.plant));
}

inline double case_study_Ts(const CaseStudyConfig& cfg) { return cfg.model ? cfg.model->Ts : cfg.plant.Ts; }

inline std::size_t case_study_nodes(const CaseStudyConfig& cfg) {
    return cfg.model ? static_cast<std::size_t>(cfg.model->n_u()) : cfg.plant.bus_count;
}

inline FrequencyGrid case_study_grid(const CaseStudyConfig& cfg) {
    const double Ts = case_study_Ts(cfg);
    const double top = cfg.grid.w_max > 0.0 ? cfg.grid.w_max : std::numbers::pi / Ts;
    return make_log_grid(cfg.grid.w_min, top, cfg.grid.points, Ts);
}

/// Nearest-neighbour chain with the communication delay (controller class).
inline SparsityPattern case_study_pattern(const CaseStudyConfig& cfg) {
    if (cfg.pattern) {
        return *cfg.pattern;
    }
    const std::size_t n = case_study_nodes(cfg);
    return pattern_from_graph(n, chain_edges(n, cfg.comm_delay));
}

/// Immediate neighbours plus immediate links from the hub to every bus (oracle class).
inline SparsityPattern case_study_oracle_pattern(const CaseStudyConfig& cfg) {
    if (cfg.oracle_pattern) {
        return *cfg.oracle_pattern;
    }
    const std::size_t n = case_study_nodes(cfg);
    auto edges = chain_edges(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (i != cfg.oracle_hub) {
            edges.push_back({cfg.oracle_hub, i, 0});
        }
    }
    return pattern_from_graph(n, edges);
}

/// theta of the static decentralized controller K = -kappa I.
inline RealVector droop_controller(const FactorParameterization& p, double kappa) {
    RealVector t = p.zero_controller();
    for (std::size_t s = 0; s < p.size(); ++s) {
        const auto& sl = p.slots[s];
        if (sl.factor == Factor::X && sl.row == sl.col && sl.basis == 0) {
            t(static_cast<Eigen::Index>(s)) = -kappa;
        }
    }
    return t;
}

inline ExperimentBatch simulate_case_study_experiments(const CaseStudyConfig& cfg, const StateSpaceModel& model) {
    if (cfg.experiment.samples == 0) {
        throw Error(Errc::Config, "experiment samples N_s must be >= 1");
    }
    const auto m = model.n_u();
    const auto U = cfg.experiment.excitation == Excitation::Impulse
                       ? impulse_excitation(m, cfg.experiment.samples)
                       : multisine_excitation(m, cfg.experiment.samples, model.Ts, cfg.experiment.multisine_freqs,
                                              cfg.experiment.seed);
    return run_experiments(model, U);
}

/// Closed loop of one controller evaluated against the true plant.
struct ControllerEvaluation {
    std::string name;
    StateSpaceModel realization;
    ClosedLoopFrf T;
    std::vector<double> worst_case_sweep;
    std::vector<double> column_sweep;
    EnergyTrace energy;
    double hinf = 0.0;
    double h2_squared = 0.0;
    double regret = 0.0;
    double spectral_radius = 0.0;
};

inline ControllerEvaluation evaluate_controller(const std::string& name, const ControllerFactors& f,
                                                const StateSpaceModel& model, const GeneralizedPlantFrf& truth,
                                                const ClosedLoopFrf& T_hat, const DisturbanceSpec& dist) {
    ControllerEvaluation e;
    e.name = name;
    e.realization = realize_controller(f, model.Ts);
    e.spectral_radius = closed_loop_spectral_radius(model, e.realization);
    e.T = closed_loop_frf(truth, sample_controller(f, truth.grid));
    e.worst_case_sweep = worst_case_gain_sweep(e.T);
    e.column_sweep = column_energy_sweep(e.T, dist.channels.empty() ? 0 : dist.channels.front());
    e.hinf = hinf_norm(e.T);
    e.h2_squared = h2_norm_squared(e.T);
    e.regret = spatial_regret_value(e.T, T_hat).value;
    DisturbanceSpec d = dist;
    d.Ts = model.Ts;
    e.energy = time_domain_experiment(model, e.realization, d);
    return e;
}

inline FrfBlock estimate_case_study_frf(const CaseStudyConfig& cfg, const ExperimentBatch& batch) {
    FrfOptions o;
    o.settled_tail = cfg.experiment.settled_tail;
    return estimate_frf(batch, case_study_grid(cfg), o);
}

/// H-infinity controller over the oracle pattern, started from the initial droop.
inline OracleData case_study_oracle(const CaseStudyConfig& cfg, const GeneralizedPlantFrf& plant,
                                    const StateSpaceModel* truth, SynthesisReport* report_out = nullptr) {
    const SparsityPattern pat = case_study_pattern(cfg);
    const SparsityPattern opat = case_study_oracle_pattern(cfg);
    if (!pattern_contains(opat, pat)) {
        throw Error(Errc::NotASuperset, "oracle pattern does not contain the controller pattern");
    }
    const FactorParameterization oparam = build_factor_parameterization(opat, cfg.order, cfg.pole);
    SynthesisReport rep = iterate_synthesis(plant, oparam, droop_controller(oparam, cfg.initial_droop),
                                            ObjectiveKind::Hinf, nullptr, cfg.synthesis, truth);
    OracleData o;
    o.factors = rep.final;
    o.T_hat = closed_loop_frf(plant, sample_controller(o.factors, plant.grid));
    o.kind = ObjectiveKind::Hinf;
    o.value = std::pow(hinf_norm(o.T_hat), 2);
    if (report_out != nullptr) {
        *report_out = std::move(rep);
    }
    return o;
}

/// Structured controller for one objective over the controller pattern.
inline SynthesisReport case_study_synthesis(const CaseStudyConfig& cfg, const GeneralizedPlantFrf& plant,
                                            ObjectiveKind kind, const OracleData* oracle,
                                            const StateSpaceModel* truth) {
    const FactorParameterization param = build_factor_parameterization(case_study_pattern(cfg), cfg.order, cfg.pole);
    return iterate_synthesis(plant, param, droop_controller(param, cfg.initial_droop), kind, oracle, cfg.synthesis,
                             truth);
}

struct CaseStudyResult {
    StateSpaceModel model;
    FrequencyGrid grid;
    ExperimentBatch experiments;
    FrfBlock G22_hat;
    GeneralizedPlantFrf data_plant;  // estimated G22 with model performance blocks
    GeneralizedPlantFrf true_plant;  // all blocks from the model
    SynthesisReport oracle_report, h2_report, hinf_report, sr_report;
    OracleData oracle;
    std::vector<ControllerEvaluation> evaluations; // oracle, h2, hinf, sr
    double reduction_vs_h2 = 0.0;
    double reduction_vs_hinf = 0.0;
    double frf_error = 0.0; // max |G22_hat - G22| over the grid
};

using ProgressFn = std::function<void(const std::string&)>;

/// Error raised by a pipeline stage, labelled with that stage.
class StageError : public Error {
public:
    StageError(const std::string& stage, const Error& inner)
        : Error(inner.code(), "[" + stage + "] " + strip(inner.what())), stage_(stage) {}

    [[nodiscard]] const std::string& stage() const noexcept { return stage_; }

private:
    static std::string strip(const std::string& s) {
        const auto p = s.find(": ");
        return p == std::string::npos ? s : s.substr(p + 2);
    }
    std::string stage_;
};

template <typename F>
auto run_stage(const std::string& stage, const ProgressFn& progress, F&& body) {
    if (progress) {
        progress(stage);
    }
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(stage, e);
    }
}

inline CaseStudyResult run_case_study(const CaseStudyConfig& cfg, const ProgressFn& progress = {}) {
    CaseStudyResult r;
    r.model = run_stage("build-plant", progress, [&] { return case_study_model(cfg); });
    r.grid = case_study_grid(cfg);
    r.experiments = run_stage("simulate-experiments", progress,
                              [&] { return simulate_case_study_experiments(cfg, r.model); });
    r.G22_hat = run_stage("estimate-frf", progress, [&] { return estimate_case_study_frf(cfg, r.experiments); });
    r.data_plant = assemble_generalized_plant(r.grid, r.G22_hat, r.model);
    r.true_plant = sample_generalized_plant(r.model, r.grid);
    for (std::size_t k = 0; k < r.grid.size(); ++k) {
        r.frf_error = std::max(r.frf_error, (r.G22_hat[k] - r.true_plant.G22[k]).cwiseAbs().maxCoeff());
    }

    r.oracle = run_stage("oracle", progress,
                         [&] { return case_study_oracle(cfg, r.data_plant, &r.model, &r.oracle_report); });
    r.h2_report = run_stage("synthesize-h2", progress, [&] {
        return case_study_synthesis(cfg, r.data_plant, ObjectiveKind::H2, nullptr, &r.model);
    });
    r.hinf_report = run_stage("synthesize-hinf", progress, [&] {
        return case_study_synthesis(cfg, r.data_plant, ObjectiveKind::Hinf, nullptr, &r.model);
    });
    r.sr_report = run_stage("synthesize-sr", progress, [&] {
        return case_study_synthesis(cfg, r.data_plant, ObjectiveKind::SpatialRegret, &r.oracle, &r.model);
    });

    run_stage("evaluate", progress, [&] {
        const ClosedLoopFrf T_hat_true = closed_loop_frf(r.true_plant, sample_controller(r.oracle.factors, r.grid));
        const std::pair<const char*, const ControllerFactors*> named[] = {
            {"oracle", &r.oracle.factors}, {"h2", &r.h2_report.final},
            {"hinf", &r.hinf_report.final}, {"sr", &r.sr_report.final}};
        for (const auto& [name, f] : named) {
            r.evaluations.push_back(evaluate_controller(name, *f, r.model, r.true_plant, T_hat_true, cfg.disturbance));
        }
        r.reduction_vs_h2 = percent_reduction(r.evaluations[3].energy, r.evaluations[1].energy);
        r.reduction_vs_hinf = percent_reduction(r.evaluations[3].energy, r.evaluations[2].energy);
        return 0;
    });
    return r;
}

} // namespace ddsr
