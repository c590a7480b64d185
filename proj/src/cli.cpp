#include "sslab/cli.hpp"

#include "sslab/config.hpp"
#include "sslab/format.hpp"
#include "sslab/parallel.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace sslab {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitVerifyFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonOptions {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--config", opts.config, "JSON configuration file");
    cmd->add_option("--set", opts.sets, "Override a configuration key, e.g. --set estimator.bandwidth_scale=4")
        ->take_all();
    cmd->add_option("--out", opts.out, "Output directory (overrides output_dir)");
}

RunConfig resolve(const CommonOptions& opts) {
    std::vector<std::string> sets = opts.sets;
    if (!opts.out.empty()) sets.push_back("output_dir=\"" + opts.out + "\"");
    return load_config(opts.config, sets);
}

fs::path output_dir(const RunConfig& cfg) {
    fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    return dir;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json base_meta(const RunConfig& cfg, const std::string& provider) {
    return {{"seed", cfg.seed},
            {"config_hash", cfg.hash()},
            {"runtime_s", 0.0},
            {"provider", provider},
            {"config", cfg.resolved}};
}

// Grid contexts get v = 0 (the control residuals are centered) when the
// estimator conditions on v and the configured contexts leave it out.
GridDesign with_control(GridDesign grid, bool needs_v) {
    if (!needs_v) return grid;
    for (auto& w : grid.contexts)
        if (!w.v) w.v = 0.0;
    return grid;
}

void append_points(TestReport& report, const EvaluationGrid& grid, ChannelMode channel,
                   const std::vector<PointResult>& field) {
    for (std::size_t k = 0; k < grid.points.size(); ++k)
        report.points.push_back(ReportPoint::from(grid.points[k], channel, field[k]));
}

std::size_t count_failures(const std::vector<PointResult>& field) {
    std::size_t bad = 0;
    for (const auto& r : field) bad += r.ok() ? 0 : 1;
    return bad;
}

std::vector<double> residual_values(const std::vector<PointResult>& field) {
    std::vector<double> out;
    for (const auto& r : field)
        out.push_back(r.ok() ? r.residual->residual : std::numeric_limits<double>::quiet_NaN());
    return out;
}

int cmd_simulate(const CommonOptions& opts) {
    const RunConfig cfg = resolve(opts);
    const auto system = make_system(cfg.system);
    SimulatedDataset data = simulate_cross_section(*system, cfg.design, cfg.n, cfg.seed, cfg.endogenous);
    if (cfg.endogenous) data = control_residuals(data, cfg.control);
    const fs::path path = output_dir(cfg) / "data.csv";
    write_dataset_csv(data, path.string());
    std::cout << "simulate: " << system->name() << " n=" << data.size() << " -> " << path.string()
              << '\n';
    return 0;
}

int cmd_oracle_verify(const CommonOptions& opts) {
    const RunConfig cfg = resolve(opts);
    const PopulationOracle oracle(make_system(cfg.system), cfg.oracle);
    const EvaluationGrid grid = build_grid(oracle, cfg.grid);
    const int num_s = oracle.num_inside_goods() + 1;
    struct Row {
        double lhs = 0.0, rhs = 0.0;
        std::string error;
    };
    std::vector<Row> rows(grid.points.size() * static_cast<std::size_t>(num_s));
    parallel_for(grid.points.size(), [&](std::size_t k) {
        const auto& pt = grid.points[k];
        for (int s = 1; s <= num_s; ++s) {
            Row& row = rows[k * static_cast<std::size_t>(num_s) + static_cast<std::size_t>(s - 1)];
            try {
                const QuantileIndices q = quantile_indices(oracle, pt);
                row.lhs = oracle.conditional_expectation_partial(pt.w, s, pt.i, pt.j, pt.y_i, pt.y_j);
                row.rhs = lemma1_rhs(oracle, pt, s, q, ChannelMode::Frozen, cfg.fd);
            } catch (const Error& e) {
                row.error = e.what();
            }
        }
    });
    const fs::path path = output_dir(cfg) / "oracle_verify.csv";
    std::ofstream out(path);
    out << "point_id,s,lhs,rhs,abs_diff,error\n";
    double worst = 0.0;
    std::size_t failed = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const Row& row = rows[r];
        const double diff = row.error.empty() ? std::abs(row.lhs - row.rhs) : std::nan("");
        if (row.error.empty()) worst = std::max(worst, diff);
        else ++failed;
        out << r / static_cast<std::size_t>(num_s) << ',' << r % static_cast<std::size_t>(num_s) + 1
            << ',' << format_double(row.lhs) << ',' << format_double(row.rhs) << ','
            << format_double(diff) << ",\"" << row.error << "\"\n";
    }
    std::cout << "oracle-verify: max |lhs - rhs(frozen)| = " << format_double(worst) << " over "
              << rows.size() - failed << " evaluations (" << failed << " failed), tolerance "
              << format_double(cfg.oracle_verify_tolerance) << '\n';
    return failed == 0 && worst <= cfg.oracle_verify_tolerance ? 0 : kExitVerifyFailed;
}

void write_gap_csv(const HicksianGapReport& gap, const fs::path& path) {
    std::ofstream out(path);
    out << "point_id,level_i,abs_C,norm_D,abs_Dx,material,error\n";
    for (std::size_t k = 0; k < gap.rows.size(); ++k) {
        const auto& r = gap.rows[k];
        out << k << ',' << format_double(r.point.level_i) << ',' << format_double(r.abs_C) << ','
            << format_double(r.norm_D) << ',' << format_double(r.abs_D_x) << ','
            << (r.material ? 1 : 0) << ",\"" << r.error << "\"\n";
    }
}

std::shared_ptr<SimulatedDataset> load_data(const std::string& path, const RunConfig& cfg) {
    auto data = std::make_shared<SimulatedDataset>(read_dataset_csv(path));
    if (data->meta.endogenous && !data->v_hat) *data = control_residuals(*data, cfg.control);
    return data;
}

int cmd_symmetry_check(const CommonOptions& opts, const std::string& data_path) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig cfg = resolve(opts);
    std::unique_ptr<QuantileProvider> provider;
    GridDesign design = cfg.grid;
    std::string kind;
    if (data_path.empty()) {
        provider = std::make_unique<PopulationOracle>(make_system(cfg.system), cfg.oracle);
        kind = "oracle";
    } else {
        auto data = load_data(data_path, cfg);
        design = with_control(design, data->v_hat && cfg.estimator.use_control);
        provider = std::make_unique<KernelProvider>(data, cfg.estimator);
        kind = "estimator";
    }
    const EvaluationGrid grid = build_grid(*provider, design);
    TestReport report;
    report.meta = base_meta(cfg, kind);
    report.meta["dropped_points"] = grid.dropped;
    report.p_value = std::numeric_limits<double>::quiet_NaN(); // no calibration here
    for (ChannelMode ch : cfg.channels) {
        const auto field = evaluate_residual_field(*provider, grid, ch, cfg.fd);
        append_points(report, grid, ch, field);
        if (ch == cfg.test_channel) report.statistic = test_statistic(residual_values(field));
    }
    const fs::path dir = output_dir(cfg);
    const HicksianGapReport gap = hicksian_gap_report(
        *provider, grid.points, kind == "oracle" ? ChannelMode::Frozen : cfg.test_channel, 0.01, cfg.fd);
    write_gap_csv(gap, dir / "welfare_gap.csv");
    report.meta["runtime_s"] = seconds_since(t0);
    write_report(report, (dir / "symmetry.json").string());
    write_residual_csv(report, (dir / "residuals.csv").string());
    std::cout << "symmetry-check: " << kind << " provider, " << grid.points.size()
              << " points, T(" << to_string(cfg.test_channel)
              << ") = " << format_double(report.statistic) << " -> " << (dir / "symmetry.json").string()
              << '\n';
    return 0;
}

int cmd_test(const CommonOptions& opts, const std::string& data_path) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig cfg = resolve(opts);
    auto data = load_data(data_path, cfg);
    const KernelProvider provider(data, cfg.estimator);
    const EvaluationGrid grid =
        build_grid(provider, with_control(cfg.grid, data->v_hat && cfg.estimator.use_control));
    const BootstrapResult boot = bootstrap_pvalue(provider, grid, cfg.test_channel, cfg.B, cfg.seed);

    TestReport report;
    report.meta = base_meta(cfg, "estimator");
    report.meta["dataset_hash"] = hex64(data->content_hash());
    report.meta["dropped_points"] = grid.dropped;
    report.meta["failed_replicates"] = boot.failed;
    report.statistic = boot.statistic;
    report.replicates = boot.replicates;
    report.p_value = boot.p_value;
    std::size_t failed_points = 0;
    for (ChannelMode ch : cfg.channels) {
        if (ch == cfg.test_channel) {
            append_points(report, grid, ch, boot.field);
            failed_points = count_failures(boot.field);
        } else {
            append_points(report, grid, ch, evaluate_residual_field(provider, grid, ch, cfg.fd));
        }
    }
    const fs::path dir = output_dir(cfg);
    report.meta["runtime_s"] = seconds_since(t0);
    write_report(report, (dir / "report.json").string());
    write_residual_csv(report, (dir / "residuals.csv").string());
    std::cout << "test: T = " << format_double(report.statistic)
              << ", p = " << format_double(report.p_value) << " (B = " << cfg.B << ", "
              << grid.points.size() - failed_points << "/" << grid.points.size()
              << " points) -> " << (dir / "report.json").string() << '\n';
    return 0;
}

int cmd_mc_study(const CommonOptions& opts) {
    const RunConfig cfg = resolve(opts);
    const McStudy study = monte_carlo_study(cfg.mc);
    const fs::path dir = output_dir(cfg);
    write_mc_csv(study, (dir / "mc.csv").string());
    std::ofstream out(dir / "mc_replicates.csv");
    out << "system,n,rep,seed,statistic,p_value,error\n";
    for (const auto& r : study.replicates)
        out << r.system << ',' << r.n << ',' << r.rep << ',' << r.seed << ','
            << format_double(r.statistic) << ',' << format_double(r.p_value) << ",\"" << r.error
            << "\"\n";
    std::cout << "mc-study:";
    for (const auto& c : study.cells)
        std::cout << ' ' << c.system << "(n=" << c.n << ") reject=" << format_double(c.reject_rate);
    std::cout << " -> " << (dir / "mc.csv").string() << '\n';
    return 0;
}

int cmd_report(const std::string& report_path, std::string csv_path) {
    const TestReport report = read_report(report_path);
    if (csv_path.empty()) csv_path = fs::path(report_path).replace_extension(".residuals.csv").string();
    write_residual_csv(report, csv_path);
    std::cout << "report: " << report.points.size() << " residual rows -> " << csv_path << '\n';
    return 0;
}

} // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Slutsky symmetry laboratory"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    CommonOptions simulate_opts, verify_opts, check_opts, test_opts, mc_opts;
    std::string check_data, test_data, report_path, report_csv;

    auto* simulate = app.add_subcommand("simulate", "Simulate a cross section");
    add_common(simulate, simulate_opts);
    auto* verify = app.add_subcommand("oracle-verify", "Check the identification formula against the oracle");
    add_common(verify, verify_opts);
    auto* check = app.add_subcommand("symmetry-check", "Residual fields under every channel");
    add_common(check, check_opts);
    check->add_option("--data", check_data, "Dataset CSV (omit to use the population oracle)");
    auto* test = app.add_subcommand("test", "Bootstrap symmetry test on a dataset");
    add_common(test, test_opts);
    test->add_option("--data", test_data, "Dataset CSV")->required();
    auto* mc = app.add_subcommand("mc-study", "Monte Carlo size and power study");
    add_common(mc, mc_opts);
    auto* rep = app.add_subcommand("report", "Render a report as residual-field CSV");
    rep->add_option("--report", report_path, "Report JSON")->required();
    rep->add_option("--csv", report_csv, "Output CSV (default: next to the report)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kExitConfig;
    }

    try {
        if (*simulate) return cmd_simulate(simulate_opts);
        if (*verify) return cmd_oracle_verify(verify_opts);
        if (*check) return cmd_symmetry_check(check_opts, check_data);
        if (*test) return cmd_test(test_opts, test_data);
        if (*mc) return cmd_mc_study(mc_opts);
        if (*rep) return cmd_report(report_path, report_csv);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitConfig;
}

} // namespace sslab
