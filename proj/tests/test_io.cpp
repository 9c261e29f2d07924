#include <random>

#include <catch_amalgamated.hpp>

#include "ddsr/io.hpp"

using namespace ddsr;
using namespace ddsr::io;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ddsr_test_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::Config;
}

std::string error_text(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_CASE("number formatting round-trips exactly") {
    std::mt19937 rng(12);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double v = u(rng) * std::pow(10.0, i % 20 - 10);
        REQUIRE(parse_double(fmt(v)) == v);
    }
    REQUIRE(fmt(0.5) == "0.5");
    REQUIRE(std::isnan(parse_double(fmt(std::nan("")))));
    REQUIRE(parse_double(fmt(-INFINITY)) == -INFINITY);
    REQUIRE(code_of([] { (void)parse_double("1.5x"); }) == Errc::Io);
    REQUIRE(parse_index("42") == 42);
    REQUIRE(code_of([] { (void)parse_index("4.2"); }) == Errc::Io);
}

TEST_CASE("csv parsing") {
    const auto t = parse_csv("a,b,c\r\n1,,3\n\n4,5,\n");
    REQUIRE(t.header == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(t.rows.size() == 2);
    REQUIRE(t.rows[0][1].empty());
    REQUIRE(t.rows[1][2].empty());
    REQUIRE(t.column("c") == 2);
    REQUIRE(code_of([&] { (void)t.column("d"); }) == Errc::Io);
    REQUIRE(code_of([] { (void)parse_csv("a,b\n1\n"); }) == Errc::Io);
    REQUIRE(code_of([] { (void)parse_csv(""); }) == Errc::Io);
    REQUIRE(code_of([] { (void)read_csv("/nonexistent/file.csv"); }) == Errc::Io);
}

TEST_CASE("state-space model json round trip") {
    const auto m = assemble_networked(build_power_grid(PowerGridParams::case_study()));
    const auto dir = scratch_dir("model");
    save_model(dir / "plant.json", m);
    const auto back = load_model(dir / "plant.json");
    REQUIRE(back.A == m.A);
    REQUIRE(back.B == m.B);
    REQUIRE(back.C == m.C);
    REQUIRE(back.D == m.D);
    REQUIRE(back.Ts == m.Ts);
    REQUIRE(back.n_w == m.n_w);
    REQUIRE(back.n_z == m.n_z);

    write_file(dir / "bad.json", "{\"format\": \"something-else\"}");
    REQUIRE(code_of([&] { (void)load_model(dir / "bad.json"); }) == Errc::Io);
    write_file(dir / "broken.json", "{");
    REQUIRE(code_of([&] { (void)load_model(dir / "broken.json"); }) == Errc::Io);
}

TEST_CASE("frf csv round trip") {
    const auto m = assemble_networked(build_power_grid(PowerGridParams::case_study()));
    const auto g = make_log_grid(1e-2, 100.0, 17, m.Ts);
    const auto plant = sample_generalized_plant(m, g);
    const std::string text = frf_csv(g, {{"G22", &plant.G22}, {"G11", &plant.G11}});
    const auto loaded = parse_frf_csv(parse_csv(text), "G22", m.Ts);
    REQUIRE(loaded.grid == g);
    REQUIRE(loaded.block.rows == plant.G22.rows);
    REQUIRE(loaded.block.cols == plant.G22.cols);
    for (std::size_t k = 0; k < g.size(); ++k) {
        REQUIRE(loaded.block[k] == plant.G22[k]);
    }
    REQUIRE(code_of([&] { (void)parse_frf_csv(parse_csv(text), "G12", m.Ts); }) == Errc::Io);
}

TEST_CASE("experiment csv round trip") {
    StateSpaceModel m;
    m.A = RealMatrix::Identity(2, 2) * 0.3;
    m.B = RealMatrix::Ones(2, 2);
    m.C = RealMatrix::Ones(3, 2);
    m.D = RealMatrix::Zero(3, 2);
    m.Ts = 0.25;
    const auto batch = run_experiments(m, impulse_excitation(2, 7));
    std::vector<CsvTable> tables;
    for (Eigen::Index e = 0; e < batch.experiments(); ++e) {
        REQUIRE(experiment_file_name(e) == "experiment_" + std::to_string(e) + ".csv");
        tables.push_back(parse_csv(experiment_csv(batch, e)));
        REQUIRE(tables.back().header == std::vector<std::string>{"k", "experiment", "channel", "u", "y"});
        REQUIRE(tables.back().rows.size() == 7 * 3);
    }
    const auto back = batch_from_csv(tables, m.Ts);
    REQUIRE(back.samples() == batch.samples());
    for (std::size_t k = 0; k < batch.samples(); ++k) {
        REQUIRE(back.U[k] == batch.U[k]);
        REQUIRE(back.Y[k] == batch.Y[k]);
    }
}

TEST_CASE("controller documents round trip") {
    const auto param = build_factor_parameterization(pattern_from_graph(5, chain_edges(5, 1)), 2, 0.1);
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    RealVector t = param.zero_controller();
    for (Eigen::Index i = 0; i < t.size(); ++i) {
        t(i) += u(rng);
    }
    const auto f = make_factors(param, t);
    const auto dir = scratch_dir("controller");
    save_controller(dir / "k.json", f);
    const auto back = load_controller(dir / "k.json");
    REQUIRE(back.theta == f.theta);
    REQUIRE(back.param->pattern == param.pattern);
    REQUIRE(back.param->order == 2);
    REQUIRE(back.param->pole == 0.1);
    const cdouble z = std::polar(1.0, 0.3);
    REQUIRE(back.K(z) == f.K(z));

    REQUIRE(parse_theta_csv(parse_csv(theta_csv(t))) == t);
    REQUIRE(code_of([] { (void)parse_theta_csv(parse_csv("index,value\n0,1\n0,2\n")); }) == Errc::Io);
    REQUIRE(pattern_from_json(pattern_to_json(param.pattern)) == param.pattern);
    REQUIRE(code_of([] { (void)pattern_from_json(json::parse("[[1]]")); }) == Errc::Config);
}

TEST_CASE("report and sweep writers") {
    SynthesisReport rep;
    rep.kind = ObjectiveKind::Hinf;
    IterationRecord r;
    r.iter = 1;
    r.gamma = 2.5;
    rep.history.push_back(r);
    REQUIRE(history_csv(rep) == "iter,gamma,solve_time,spectral_radius\n1,2.5,0,nan\n");
    const auto j = report_to_json(rep);
    REQUIRE(j.at("objective") == "hinf");
    REQUIRE(j.at("final_gamma") == 2.5);
    REQUIRE(j.at("history")[0].at("spectral_radius").is_null());

    const auto g = make_log_grid(1.0, 100.0, 3, 0.001);
    REQUIRE(sweep_csv(g, {1.0, 2.0, 3.0}).starts_with("omega,value\n1,1\n"));
    REQUIRE(code_of([&] { (void)sweep_csv(g, {1.0}); }) == Errc::GridMismatch);

    EnergyTrace e;
    e.t = {0.0, 0.02};
    e.z_norm_sq = {0.0, 1.5};
    REQUIRE(energy_csv(e) == "t,z_norm_sq\n0,0\n0.02,1.5\n");
}

TEST_CASE("run config defaults and overrides") {
    const auto d = parse_run_config(json::parse(R"({"schema_version": 1})"));
    REQUIRE(d.objective == ObjectiveKind::SpatialRegret);
    REQUIRE_FALSE(d.oracle_specified);
    REQUIRE(d.study.grid.points == 150);
    REQUIRE(d.study.plant.self_stiffness == PowerGridParams::case_study().self_stiffness);

    const auto c = parse_run_config(json::parse(R"({
        "schema_version": 1,
        "plant": {"bus_count": 3, "coupling": 10, "inertia": [1, 2, 3], "self_stiffness": null},
        "grid": {"points": 40},
        "experiment": {"samples": 500, "excitation": "multisine", "multisine_freqs": [1, 2]},
        "pattern": {"comm_delay": 2},
        "oracle_pattern": {"hub": 1},
        "objective": "h2",
        "factor": {"order": 3, "pole": 0.2},
        "synthesis": {"max_iter": 5},
        "solver": {"gap_tol": 1e-6},
        "disturbance": {"channels": [2], "components": [{"omega": 4, "amplitude": 2}], "horizon": 100},
        "threads": 2
    })"),
                                    "/base");
    REQUIRE(c.study.plant.bus_count == 3);
    REQUIRE(c.study.plant.inertia == std::vector<double>{1, 2, 3});
    REQUIRE(c.study.plant.self_stiffness.empty());
    REQUIRE(c.study.grid.points == 40);
    REQUIRE(c.study.experiment.excitation == Excitation::Multisine);
    REQUIRE(c.study.comm_delay == 2);
    REQUIRE(c.oracle_specified);
    REQUIRE(c.study.oracle_hub == 1);
    REQUIRE(c.objective == ObjectiveKind::H2);
    REQUIRE(c.study.order == 3);
    REQUIRE(c.study.synthesis.max_iter == 5);
    REQUIRE(c.study.synthesis.solver.gap_tol == 1e-6);
    REQUIRE(c.study.disturbance.channels == std::vector<std::size_t>{2});
    REQUIRE(c.study.disturbance.components.size() == 1);
    REQUIRE(c.study.disturbance.components[0].amplitude == 2.0);
    REQUIRE(c.threads == 2);
}

TEST_CASE("run config errors") {
    auto parse = [](const char* text) { return [text] { (void)parse_run_config(json::parse(text)); }; };
    REQUIRE(code_of(parse(R"({})")) == Errc::Config);
    REQUIRE(code_of(parse(R"({"schema_version": 2})")) == Errc::Config);
    REQUIRE(error_text(parse(R"({"schema_version": 1, "grid": {"pionts": 3}})")).find("grid.pionts") !=
            std::string::npos);
    REQUIRE(error_text(parse(R"({"schema_version": 1, "extra": 1})")).find("'extra'") != std::string::npos);
    REQUIRE(code_of(parse(R"({"schema_version": 1, "plant": {"inertia": [1, 2]}})")) == Errc::Config);
    REQUIRE(code_of(parse(R"({"schema_version": 1, "objective": "lqr"})")) == Errc::Config);
    REQUIRE(code_of(parse(R"({"schema_version": 1, "grid": {"points": "many"}})")) == Errc::Config);
    REQUIRE(code_of(parse(R"({"schema_version": 1, "disturbance": {"channels": [-1]}})")) == Errc::Config);
    REQUIRE(code_of(parse(R"({"schema_version": 1, "plant": {"source": "state-space"}})")) == Errc::Config);

    const auto dir = scratch_dir("config");
    write_file(dir / "c.json", R"({"schema_version": 1, "output_dir": "out"})");
    REQUIRE(load_run_config(dir / "c.json").output_dir == (dir / "out").string());
}
