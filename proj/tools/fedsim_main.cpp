#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedsim/errors.hpp"
#include "fedsim/harness.hpp"

namespace {

using namespace fedsim;

int cmd_run(const std::string& config_path, const std::string& output_dir,
            const std::string& resume) {
    ExperimentConfig cfg = ExperimentConfig::from_json_file(config_path);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    const auto res = run_experiment(cfg, resume);
    std::cout << "rounds_evaluated=" << res.records.size()
              << " final_score_fedavg=" << res.summary.final_score_fedavg;
    if (res.summary.final_score_wima)
        std::cout << " final_score_wima=" << *res.summary.final_score_wima;
    if (res.summary.final_score_swa)
        std::cout << " final_score_swa=" << *res.summary.final_score_swa;
    std::cout << " smoothness_fedavg=" << res.summary.smoothness_fedavg;
    if (res.summary.smoothness_wima)
        std::cout << " smoothness_wima=" << *res.summary.smoothness_wima;
    std::cout << '\n';
    if (!cfg.output_dir.empty()) std::cout << "outputs in " << cfg.output_dir << '\n';
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& axis_name,
              const std::vector<double>& values, const std::string& output_dir) {
    ExperimentConfig cfg = ExperimentConfig::from_json_file(config_path);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    const auto axis = sweep_axis_from_string(axis_name);
    const auto res = sweep(cfg, axis, values);
    for (const auto& c : res.cells) {
        std::cout << to_string(axis) << '=' << c.axis_value << " rep=" << c.replicate
                  << " final_score_fedavg=" << c.summary.final_score_fedavg;
        if (c.summary.final_score_wima)
            std::cout << " final_score_wima=" << *c.summary.final_score_wima;
        if (c.summary.final_score_swa)
            std::cout << " final_score_swa=" << *c.summary.final_score_swa;
        std::cout << '\n';
    }
    if (!cfg.output_dir.empty()) std::cout << "table in " << cfg.output_dir << '\n';
    return 0;
}

int cmd_audit_identity(const std::string& config_path) {
    ExperimentConfig cfg = ExperimentConfig::from_json_file(config_path);
    if (!cfg.server.wima)
        throw UsageError("audit-identity: the config must enable server.wima");
    cfg.audit_identity = true;
    cfg.eval_every = 1;
    const auto res = run_experiment(cfg);
    if (!res.max_identity_residual) {
        std::cout << "no full window reached; nothing to audit\n";
        return 0;
    }
    std::cout << "max_residual=" << *res.max_identity_residual
              << " max_residual_normalized=" << *res.max_identity_residual_normalized << '\n';
    const bool ok = *res.max_identity_residual_normalized <= 1e-9;
    std::cout << (ok ? "identity holds within 1e-9*(1+|w|_inf)\n"
                     : "identity violated beyond 1e-9*(1+|w|_inf)\n");
    return ok ? 0 : 2;
}

int cmd_partition_report(const std::string& config_path, const std::string& out_path) {
    ExperimentConfig cfg = ExperimentConfig::from_json_file(config_path);
    Dataset pool;
    if (cfg.dataset.kind == DatasetConfig::Kind::synthetic) {
        const auto& s = cfg.dataset.synthetic;
        pool = generate_synthetic(s.num_classes, s.input_dim, s.samples_per_class,
                                  s.class_separation, s.seed);
    } else {
        pool = load_csv(cfg.dataset.csv_path, cfg.dataset.csv_num_classes);
    }
    const auto fed = partition_dirichlet(pool, cfg.partition.num_clients, cfg.partition.alpha,
                                         cfg.partition.seed, cfg.partition.test_fraction);
    const std::string manifest = partition_manifest_json(fed);
    if (out_path.empty()) {
        std::cout << manifest << '\n';
    } else {
        std::ofstream out(out_path);
        if (!out) throw IoError("partition-report: cannot write '" + out_path + "'");
        out << manifest << '\n';
        std::cout << "manifest in " << out_path << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated averaging simulator with windowed model averaging"};
    app.require_subcommand(1);

    std::string config_path, output_dir, resume, axis_name, manifest_out;
    std::vector<double> values;

    auto* run = app.add_subcommand("run", "run one experiment from a JSON config");
    run->add_option("config", config_path, "config file")->required();
    run->add_option("--output-dir", output_dir, "override output directory");
    run->add_option("--resume", resume, "checkpoint file to resume from");

    auto* sw = app.add_subcommand("sweep", "run one experiment per axis value, 3 seeds each");
    sw->add_option("config", config_path, "config file")->required();
    sw->add_option("--axis", axis_name, "window_size | participation | swa_start | alpha")
        ->required();
    sw->add_option("--values", values, "axis values")->required()->delimiter(',');
    sw->add_option("--output-dir", output_dir, "override output directory");

    auto* audit = app.add_subcommand(
        "audit-identity", "run with the decay-form oracle every round, report max residual");
    audit->add_option("config", config_path, "config file")->required();

    auto* report = app.add_subcommand("partition-report", "emit the partition manifest JSON");
    report->add_option("config", config_path, "config file")->required();
    report->add_option("--out", manifest_out, "write the manifest to a file");

    try {
        app.parse(argc, argv);
        if (run->parsed()) return cmd_run(config_path, output_dir, resume);
        if (sw->parsed()) return cmd_sweep(config_path, axis_name, values, output_dir);
        if (audit->parsed()) return cmd_audit_identity(config_path);
        if (report->parsed()) return cmd_partition_report(config_path, manifest_out);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return fedsim::exit_code_for(e);
    }
    return 0;
}
