#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ddsr/case_study.hpp"
#include "ddsr/io.hpp"
#include "ddsr/parallel.hpp"

namespace fs = std::filesystem;
using namespace ddsr;

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kNumericalError = 2, kStabilityError = 3 };

int exit_code_for(Errc e) {
    switch (e) {
    case Errc::Config:
    case Errc::Io:
    case Errc::NotASuperset:
    case Errc::BadEdge:
    case Errc::BadPole:
    case Errc::BadChannel:
        return kConfigError;
    case Errc::StabilityLost:
    case Errc::UnstableClosedLoop:
        return kStabilityError;
    default:
        return kNumericalError;
    }
}

struct Common {
    std::string config;
    std::string output;
    bool force = false;
    unsigned threads = 0;
    bool threads_set = false;
    std::size_t grid_points = 0;
    bool full_scale = false;
};

io::RunConfig load_config(const Common& c) {
    io::RunConfig rc;
    if (!c.config.empty()) {
        rc = io::load_run_config(c.config);
    }
    if (c.full_scale) {
        rc.study.grid.points = 600;
        rc.study.synthesis.max_iter = 30;
    }
    if (c.grid_points > 0) {
        rc.study.grid.points = c.grid_points;
    }
    set_thread_count(c.threads_set ? c.threads : rc.threads);
    return rc;
}

/// Flag, then DDSR_OUTPUT_DIR, then the config, then ./ddsr_out. A non-empty
/// directory is refused unless forced.
fs::path prepare_output(const Common& c, const io::RunConfig& rc) {
    std::string dir = c.output;
    if (dir.empty()) {
        if (const char* env = std::getenv("DDSR_OUTPUT_DIR"); env != nullptr && *env != '\0') {
            dir = env;
        }
    }
    if (dir.empty()) {
        dir = rc.output_dir;
    }
    if (dir.empty()) {
        dir = "ddsr_out";
    }
    const fs::path p(dir);
    if (fs::exists(p)) {
        if (!fs::is_directory(p)) {
            throw Error(Errc::Config, "output path " + p.string() + " is not a directory");
        }
        if (!fs::is_empty(p) && !c.force) {
            throw Error(Errc::Config, "output directory " + p.string() + " is not empty (use --force)");
        }
    }
    fs::create_directories(p);
    return p;
}

void say(const std::string& s) { std::cerr << s << "\n"; }

GeneralizedPlantFrf data_plant(const io::RunConfig& rc, const StateSpaceModel& model, const std::string& g22_file) {
    const FrequencyGrid grid = case_study_grid(rc.study);
    const std::string file = g22_file.empty() ? rc.g22_file : g22_file;
    if (file.empty()) {
        return sample_generalized_plant(model, grid);
    }
    const auto loaded = io::load_frf_csv(file, "G22", model.Ts);
    return assemble_generalized_plant(loaded.grid, loaded.block, model);
}

void write_controller(const fs::path& out, const std::string& name, const ControllerFactors& f, double Ts) {
    io::save_controller(out / (name + ".json"), f);
    io::write_file(out / ("theta_" + name + ".csv"), io::theta_csv(f.theta));
    io::save_model(out / ("controller_ss_" + name + ".json"), realize_controller(f, Ts));
}

void write_report(const fs::path& out, const std::string& name, const SynthesisReport& rep) {
    io::write_file(out / ("history_" + name + ".csv"), io::history_csv(rep));
    io::write_file(out / ("report_" + name + ".json"), io::report_to_json(rep).dump(2) + "\n");
}

void write_batch(const fs::path& out, const ExperimentBatch& b) {
    for (Eigen::Index e = 0; e < b.experiments(); ++e) {
        io::write_file(out / io::experiment_file_name(e), io::experiment_csv(b, e));
    }
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Common& c) {
    const auto rc = load_config(c);
    const auto model = case_study_model(rc.study);
    const auto batch = simulate_case_study_experiments(rc.study, model);
    const auto out = prepare_output(c, rc);
    io::save_model(out / "plant.json", model);
    write_batch(out, batch);
    say("wrote " + std::to_string(batch.experiments()) + " experiments of " + std::to_string(batch.samples()) +
        " samples to " + out.string());
    return kOk;
}

int cmd_estimate(const Common& c, const std::string& experiments_dir) {
    const auto rc = load_config(c);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(experiments_dir)) {
        const auto name = e.path().filename().string();
        if (name.rfind("experiment_", 0) == 0 && e.path().extension() == ".csv") {
            files.push_back(e.path());
        }
    }
    if (files.empty()) {
        throw Error(Errc::Io, "no experiment_*.csv files in " + experiments_dir);
    }
    std::sort(files.begin(), files.end());
    std::vector<io::CsvTable> tables;
    for (const auto& f : files) {
        tables.push_back(io::read_csv(f));
    }
    const auto batch = io::batch_from_csv(tables, case_study_Ts(rc.study));
    const auto G22 = estimate_case_study_frf(rc.study, batch);
    const auto grid = case_study_grid(rc.study);
    const auto out = prepare_output(c, rc);
    io::write_file(out / "g22.csv", io::frf_csv(grid, {{"G22", &G22}}));
    say("estimated G22 on " + std::to_string(grid.size()) + " frequencies");
    return kOk;
}

int cmd_synthesize(const Common& c, const std::string& g22_file, const std::string& oracle_file,
                   const std::string& objective) {
    auto rc = load_config(c);
    if (!objective.empty()) {
        rc.objective = parse_objective(objective);
    }
    if (rc.objective == ObjectiveKind::SpatialRegret && oracle_file.empty() && !rc.oracle_specified) {
        throw Error(Errc::Config, "spatial-regret needs --oracle or an oracle_pattern section");
    }
    const auto model = case_study_model(rc.study);
    const auto plant = data_plant(rc, model, g22_file);
    const auto out = prepare_output(c, rc);

    std::optional<OracleData> oracle;
    try {
        if (rc.objective == ObjectiveKind::SpatialRegret) {
            if (!oracle_file.empty()) {
                OracleData o;
                o.factors = io::load_controller(oracle_file);
                o.T_hat = closed_loop_frf(plant, sample_controller(o.factors, plant.grid));
                o.kind = ObjectiveKind::Hinf;
                o.value = std::pow(hinf_norm(o.T_hat), 2);
                oracle = std::move(o);
            } else {
                say("synthesizing oracle");
                SynthesisReport orep;
                oracle = case_study_oracle(rc.study, plant, &model, &orep);
                write_controller(out, "oracle", oracle->factors, model.Ts);
                write_report(out, "oracle", orep);
            }
        }
        say("synthesizing " + std::string(to_string(rc.objective)) + " controller");
        const auto rep = case_study_synthesis(rc.study, plant, rc.objective, oracle ? &*oracle : nullptr, &model);
        write_controller(out, "controller", rep.final, model.Ts);
        write_report(out, "controller", rep);
        say("final gamma " + io::fmt(rep.final_gamma()) + " after " + std::to_string(rep.history.size()) +
            " iterations");
    } catch (const SynthesisError& e) {
        write_report(out, "failed", e.report());
        say("synthesis failed at iteration " + std::to_string(e.iteration()));
        throw;
    }
    return kOk;
}

struct EvalRow {
    std::string name;
    ControllerEvaluation eval;
};

std::string summary_table(const std::vector<EvalRow>& rows, bool have_oracle) {
    std::ostringstream os;
    os << kH2Convention << "\n";
    os << "H-infinity: squared largest singular value over the grid\n";
    os << "energy: mean ||z_t||^2 after the transient, bus-disturbance multisine\n\n";
    os << "name,h2_squared,hinf_squared,regret,mean_energy,spectral_radius\n";
    for (const auto& r : rows) {
        os << r.name << ',' << io::fmt(r.eval.h2_squared) << ',' << io::fmt(r.eval.hinf * r.eval.hinf) << ','
           << (have_oracle ? io::fmt(r.eval.regret) : "nan") << ',' << io::fmt(r.eval.energy.mean_energy) << ','
           << io::fmt(r.eval.spectral_radius) << '\n';
    }
    os << "\npercent reduction of ||z|| (row relative to column)\n";
    os << "name";
    for (const auto& b : rows) {
        os << ',' << b.name;
    }
    os << '\n';
    for (const auto& a : rows) {
        os << a.name;
        for (const auto& b : rows) {
            os << ',' << io::fmt(percent_reduction(a.eval.energy, b.eval.energy));
        }
        os << '\n';
    }
    return os.str();
}

void write_evaluation(const fs::path& out, const FrequencyGrid& grid, const EvalRow& r, bool have_oracle,
                      const RegretReport* regret) {
    io::write_file(out / ("sweep_worst_case_" + r.name + ".csv"), io::sweep_csv(grid, r.eval.worst_case_sweep));
    io::write_file(out / ("sweep_column_" + r.name + ".csv"), io::sweep_csv(grid, r.eval.column_sweep));
    if (have_oracle && regret != nullptr) {
        io::write_file(out / ("sweep_regret_" + r.name + ".csv"), io::sweep_csv(grid, regret->lambda_max));
    }
    io::write_file(out / ("energy_" + r.name + ".csv"), io::energy_csv(r.eval.energy));
}

int cmd_evaluate(const Common& c, const std::vector<std::string>& controllers, const std::string& oracle_file) {
    const auto rc = load_config(c);
    if (controllers.empty()) {
        throw Error(Errc::Config, "evaluate needs at least one --controller name=path");
    }
    std::vector<std::pair<std::string, ControllerFactors>> loaded;
    for (const auto& spec : controllers) {
        const auto eq = spec.find('=');
        const std::string name = eq == std::string::npos ? fs::path(spec).stem().string() : spec.substr(0, eq);
        const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
        loaded.emplace_back(name, io::load_controller(path));
    }
    const auto model = case_study_model(rc.study);
    const auto grid = case_study_grid(rc.study);
    const auto truth = sample_generalized_plant(model, grid);
    const bool have_oracle = !oracle_file.empty();
    ClosedLoopFrf T_hat{grid, std::vector<ComplexMatrix>(grid.size(), ComplexMatrix::Zero(truth.n_z(), truth.n_w()))};
    if (have_oracle) {
        T_hat = closed_loop_frf(truth, sample_controller(io::load_controller(oracle_file), grid));
    }
    const auto out = prepare_output(c, rc);

    std::vector<EvalRow> rows;
    int code = kOk;
    for (const auto& [name, f] : loaded) {
        try {
            EvalRow r{name, evaluate_controller(name, f, model, truth, T_hat, rc.study.disturbance)};
            std::optional<RegretReport> reg;
            if (have_oracle) {
                reg = spatial_regret_value(r.eval.T, T_hat);
            }
            write_evaluation(out, grid, r, have_oracle, reg ? &*reg : nullptr);
            rows.push_back(std::move(r));
        } catch (const Error& e) {
            say(name + ": " + e.what());
            code = std::max(code, exit_code_for(e.code()));
        }
    }
    const auto table = summary_table(rows, have_oracle);
    io::write_file(out / "summary.txt", table);
    std::cout << table;
    return code;
}

int cmd_reproduce(const Common& c) {
    const auto rc = load_config(c);
    const auto out = prepare_output(c, rc);
    const auto r = run_case_study(rc.study, [](const std::string& stage) { say("stage " + stage); });

    io::save_model(out / "plant.json", r.model);
    write_batch(out, r.experiments);
    io::write_file(out / "g22.csv", io::frf_csv(r.grid, {{"G22", &r.G22_hat}}));
    write_controller(out, "oracle", r.oracle.factors, r.model.Ts);
    write_report(out, "oracle", r.oracle_report);
    write_controller(out, "h2", r.h2_report.final, r.model.Ts);
    write_report(out, "h2", r.h2_report);
    write_controller(out, "hinf", r.hinf_report.final, r.model.Ts);
    write_report(out, "hinf", r.hinf_report);
    write_controller(out, "sr", r.sr_report.final, r.model.Ts);
    write_report(out, "sr", r.sr_report);

    const ClosedLoopFrf T_hat = r.evaluations.front().T;
    std::vector<EvalRow> rows;
    for (const auto& e : r.evaluations) {
        EvalRow row{e.name, e};
        const auto reg = spatial_regret_value(e.T, T_hat);
        write_evaluation(out, r.grid, row, true, &reg);
        rows.push_back(std::move(row));
    }
    std::ostringstream os;
    os << summary_table(rows, true);
    os << "\nFRF max abs error: " << io::fmt(r.frf_error) << "\n";
    os << "SR reduction vs h2: " << io::fmt(r.reduction_vs_h2) << " %\n";
    os << "SR reduction vs hinf: " << io::fmt(r.reduction_vs_hinf) << " %\n";
    io::write_file(out / "summary.txt", os.str());
    std::cout << os.str();
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Data-driven structured controller synthesis from frequency-response data"};
    app.footer(io::config_keys_help());
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", common.config, "JSON run config")->check(CLI::ExistingFile);
        sub->add_option("-o,--output", common.output, "output directory (else DDSR_OUTPUT_DIR, config, ./ddsr_out)");
        sub->add_flag("--force", common.force, "write into a non-empty output directory");
        sub->add_option("--threads", common.threads, "worker cap, 0 for all cores")
            ->each([&](const std::string&) { common.threads_set = true; });
        sub->add_option("--grid-points", common.grid_points, "override grid.points");
        sub->add_flag("--full-scale", common.full_scale, "600-point grid and 30 outer iterations");
    };

    auto* sim = app.add_subcommand("simulate-experiments", "simulate one experiment per input channel");
    add_common(sim);

    std::string experiments_dir;
    auto* est = app.add_subcommand("estimate-frf", "estimate G22 from experiment CSVs");
    add_common(est);
    est->add_option("--experiments", experiments_dir, "directory with experiment_*.csv")->required();

    std::string g22_file, oracle_file, objective;
    auto* syn = app.add_subcommand("synthesize", "synthesize a structured controller");
    add_common(syn);
    syn->add_option("--g22", g22_file, "FRF CSV for G22 (else plant.g22_file, else the model)");
    syn->add_option("--oracle", oracle_file, "oracle controller JSON for spatial regret");
    syn->add_option("--objective", objective, "h2, hinf or spatial-regret");

    std::vector<std::string> controllers;
    std::string eval_oracle;
    auto* ev = app.add_subcommand("evaluate", "frequency sweeps, time-domain test and summary");
    add_common(ev);
    ev->add_option("--controller", controllers, "name=path of a controller JSON (repeatable)");
    ev->add_option("--oracle", eval_oracle, "oracle controller JSON for the regret column");

    auto* rep = app.add_subcommand("reproduce-case-study", "run the full five-bus pipeline");
    add_common(rep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    try {
        if (sim->parsed()) {
            return cmd_simulate(common);
        }
        if (est->parsed()) {
            return cmd_estimate(common, experiments_dir);
        }
        if (syn->parsed()) {
            return cmd_synthesize(common, g22_file, oracle_file, objective);
        }
        if (ev->parsed()) {
            return cmd_evaluate(common, controllers, eval_oracle);
        }
        if (rep->parsed()) {
            return cmd_reproduce(common);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    }
    return kConfigError;
}
