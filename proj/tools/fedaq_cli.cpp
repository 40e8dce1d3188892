#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedaq/experiment.hpp"

namespace fs = std::filesystem;
using fedaq::ConfigError;
using fedaq::ExperimentConfig;
using fedaq::ExperimentResult;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

ExperimentConfig load_with_overrides(const std::string& path, const std::optional<std::string>& out,
                                     const std::optional<std::uint64_t>& seed) {
    ExperimentConfig cfg = fedaq::load_config_file(path);
    if (out) cfg.out_dir = *out;
    if (seed) cfg.seed = *seed;
    fedaq::validate(cfg);
    return cfg;
}

void write_file(const fs::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << contents;
}

void write_run_outputs(const ExperimentConfig& cfg, const ExperimentResult& result) {
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);

    std::ostringstream metrics;
    fedaq::write_metrics_csv(metrics, result.run.history);
    write_file(dir / "metrics.csv", metrics.str());

    std::ostringstream ledger;
    result.run.ledger.write_csv(ledger);
    write_file(dir / "ledger.csv", ledger.str());

    write_file(dir / "config.cfg", fedaq::serialize_config(cfg));
    write_file(dir / "summary.json", fedaq::summary_json(cfg, result).dump(2) + "\n");
}

int cmd_run(const std::string& config_path, const std::optional<std::string>& out,
            const std::optional<std::uint64_t>& seed) {
    const ExperimentConfig cfg = load_with_overrides(config_path, out, seed);
    const ExperimentResult result = fedaq::run_experiment(cfg);
    write_run_outputs(cfg, result);

    const fedaq::EnergyTotals totals = result.run.ledger.total();
    if (!result.run.history.empty()) {
        const fedaq::RoundRecord& last = result.run.history.back();
        std::cout << "rounds=" << result.run.history.size()
                  << " final_test_acc=" << fedaq::format_double(last.test_accuracy)
                  << " final_test_loss=" << fedaq::format_double(last.test_loss) << '\n';
    }
    std::cout << "energy_pj uplink=" << fedaq::format_double(totals.uplink)
              << " downlink=" << fedaq::format_double(totals.downlink)
              << " total=" << fedaq::format_double(totals.total) << '\n';
    for (const std::string& warning : result.run.warnings) {
        std::cerr << "warning: " << warning << '\n';
    }
    std::cout << "wrote " << (fs::path(cfg.out_dir) / "metrics.csv").string() << '\n';
    return 0;
}

int cmd_trace(const std::string& config_path, const std::optional<std::string>& out,
              const std::optional<std::uint64_t>& seed) {
    ExperimentConfig cfg = load_with_overrides(config_path, out, seed);
    cfg = fedaq::as_lossless(cfg);
    const ExperimentResult result = fedaq::run_experiment(cfg);

    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    std::ostringstream ranges;
    fedaq::write_ranges_csv(ranges, result.run.history);
    write_file(dir / "ranges.csv", ranges.str());
    write_file(dir / "config.cfg", fedaq::serialize_config(cfg));

    std::vector<double> up_mean;
    std::vector<double> down;
    for (const fedaq::RoundRecord& rec : result.run.history) {
        double sum = 0.0;
        for (double r : rec.uplink_ranges) sum += r;
        up_mean.push_back(rec.uplink_ranges.empty()
                              ? 0.0
                              : sum / static_cast<double>(rec.uplink_ranges.size()));
        down.push_back(rec.downlink_range);
    }
    const double up_slope = fedaq::least_squares_slope(up_mean);
    const double down_slope = fedaq::least_squares_slope(down);
    std::cout << "uplink_range_slope=" << fedaq::format_double(up_slope)
              << " sign=" << (up_slope < 0 ? "negative" : up_slope > 0 ? "positive" : "zero")
              << '\n';
    std::cout << "downlink_range_slope=" << fedaq::format_double(down_slope)
              << " sign=" << (down_slope < 0 ? "negative" : down_slope > 0 ? "positive" : "zero")
              << '\n';
    std::cout << "wrote " << (dir / "ranges.csv").string() << '\n';
    return 0;
}

bool same_task(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.model_kind == b.model_kind && a.input_dim == b.input_dim &&
           a.hidden_dim == b.hidden_dim && a.classes == b.classes &&
           a.dataset_kind == b.dataset_kind && a.train_samples == b.train_samples &&
           a.test_samples == b.test_samples && a.cluster_spread == b.cluster_spread &&
           a.data_seed == b.data_seed && a.train_images == b.train_images &&
           a.train_labels == b.train_labels && a.test_images == b.test_images &&
           a.test_labels == b.test_labels && a.seed == b.seed;
}

int cmd_compare(const std::vector<std::string>& config_paths, std::optional<double> threshold_acc,
                std::optional<double> threshold_loss, const std::optional<std::string>& out) {
    if (config_paths.size() < 2) throw ConfigError(0, "compare needs at least two configs");
    if (threshold_acc && threshold_loss) {
        throw ConfigError(0, "give either --threshold-acc or --threshold-loss, not both");
    }

    std::vector<ExperimentConfig> configs;
    for (const std::string& path : config_paths) {
        ExperimentConfig cfg = fedaq::load_config_file(path);
        fedaq::validate(cfg);
        configs.push_back(std::move(cfg));
    }
    for (std::size_t i = 1; i < configs.size(); ++i) {
        if (!same_task(configs[0], configs[i])) {
            throw ConfigError(0, "configs must share model, dataset, and seed: " +
                                     config_paths[i] + " differs from " + config_paths[0]);
        }
    }

    std::vector<ExperimentResult> results;
    for (const ExperimentConfig& cfg : configs) results.push_back(fedaq::run_experiment(cfg));

    const bool use_loss = threshold_loss.has_value();
    double threshold = 0.0;
    if (use_loss) {
        threshold = *threshold_loss;
    } else if (threshold_acc) {
        threshold = *threshold_acc;
    } else {
        // Weakest run's best accuracy, so every run has a chance to reach it.
        threshold = 1.0;
        for (const ExperimentResult& r : results) {
            double best = 0.0;
            for (const fedaq::RoundRecord& rec : r.run.history) {
                best = std::max(best, rec.test_accuracy);
            }
            threshold = std::min(threshold, best);
        }
    }

    std::vector<std::optional<double>> energies;
    for (const ExperimentResult& r : results) {
        std::vector<double> metric;
        for (const fedaq::RoundRecord& rec : r.run.history) {
            metric.push_back(use_loss ? rec.test_loss : rec.test_accuracy);
        }
        energies.push_back(fedaq::energy_to_reach(
            r.run.ledger, metric, threshold,
            use_loss ? fedaq::ThresholdKind::AtMost : fedaq::ThresholdKind::AtLeast));
    }

    const fs::path dir(out ? *out : std::string("."));
    fs::create_directories(dir);
    std::ostringstream csv;
    csv << "config,policy,threshold_metric,threshold,energy_pj,reached,saving_pct\n";
    std::cout << "threshold " << (use_loss ? "test_loss <= " : "test_acc >= ")
              << fedaq::format_double(threshold) << '\n';
    const std::optional<double> base = energies[0];
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const std::optional<double>& e = energies[i];
        std::optional<double> saving;
        if (base && e && *base > 0.0) saving = 100.0 * (*base - *e) / *base;
        csv << config_paths[i] << ',' << configs[i].policy_kind << ','
            << (use_loss ? "loss" : "accuracy") << ',' << fedaq::format_double(threshold) << ','
            << (e ? fedaq::format_double(*e) : "") << ',' << (e ? "yes" : "no") << ','
            << (saving ? fedaq::format_double(*saving) : "") << '\n';
        std::cout << config_paths[i] << " [" << configs[i].policy_kind << "]: ";
        if (e) {
            std::cout << fedaq::format_double(*e) << " pJ";
            if (saving) std::cout << " (saving " << fedaq::format_double(*saving) << "%)";
            std::cout << '\n';
        } else {
            std::cout << "threshold not reached\n";
        }
    }
    write_file(dir / "comparison.csv", csv.str());
    std::cout << "wrote " << (dir / "comparison.csv").string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated learning simulator with joint uplink/downlink adaptive quantization"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> config_paths;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<double> threshold_acc;
    std::optional<double> threshold_loss;

    CLI::App* run = app.add_subcommand("run", "Run one experiment and write metrics");
    run->add_option("config", config_path, "experiment config file")->required();
    run->add_option("--out", out_dir, "output directory (overrides config)");
    run->add_option("--seed", seed, "run seed (overrides config)");

    CLI::App* compare = app.add_subcommand("compare", "Run several configs and compare energy");
    compare->add_option("configs", config_paths, "two or more config files")->required();
    compare->add_option("--threshold-acc", threshold_acc, "test accuracy threshold");
    compare->add_option("--threshold-loss", threshold_loss, "test loss threshold");
    compare->add_option("--out", out_dir, "directory for comparison.csv");

    CLI::App* trace = app.add_subcommand("trace", "Lossless run recording the range trace");
    trace->add_option("config", config_path, "experiment config file")->required();
    trace->add_option("--out", out_dir, "output directory (overrides config)");
    trace->add_option("--seed", seed, "run seed (overrides config)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, out_dir, seed);
        if (trace->parsed()) return cmd_trace(config_path, out_dir, seed);
        return cmd_compare(config_paths, threshold_acc, threshold_loss, out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}
