#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedaq/bit_allocation.hpp"
#include "fedaq/csv.hpp"
#include "fedaq/dataset.hpp"
#include "fedaq/fl_engine.hpp"
#include "fedaq/model.hpp"

namespace fedaq {

// Config-file problem with the 1-based line it was found on (0 for
// whole-file validation failures).
class ConfigError : public std::runtime_error {
public:
    ConfigError(int line, const std::string& message)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message
                                      : message),
          line_(line) {}

    int line() const { return line_; }

private:
    int line_;
};

// Flat sectioned key-value experiment description. Every field has a
// default, so a minimal config file can be empty; the echo written next to
// results always lists every resolved key.
struct ExperimentConfig {
    // [model]
    std::string model_kind = "logistic";  // logistic | mlp
    int input_dim = 2;
    int hidden_dim = 16;
    int classes = 2;
    // [dataset]
    std::string dataset_kind = "synthetic";  // synthetic | idx
    int train_samples = 400;
    int test_samples = 200;
    double cluster_spread = 0.3;
    std::uint64_t data_seed = 1;
    std::string train_images;
    std::string train_labels;
    std::string test_images;
    std::string test_labels;
    // [federation]
    int clients = 4;
    int rounds = 30;
    int local_steps = 5;
    int batch_size = 64;
    double learning_rate = 0.01;
    double momentum = 0.5;
    // [policy]
    std::string policy_kind = "fixed";  // fixed | joint_adaptive | uplink_adaptive |
                                        // downlink_adaptive | schedule | lossless
    int bits = 8;
    std::optional<double> alpha;
    std::optional<double> beta;
    std::vector<int> uplink_schedule;
    std::vector<int> downlink_schedule;
    std::string trace_file;  // oracle mode: ranges.csv from a pilot run
    // [energy]
    double e1 = 1.0;
    double e2 = 1.0;
    std::optional<double> budget_pj;  // oracle mode budget
    // [run]
    std::uint64_t seed = 42;
    std::string out_dir = "out";

    bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

inline int parse_int(const std::string& value, int line) {
    try {
        std::size_t used = 0;
        const int parsed = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument("");
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError(line, "expected integer, got '" + value + "'");
    }
}

inline double parse_real(const std::string& value, int line) {
    try {
        std::size_t used = 0;
        const double parsed = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("");
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError(line, "expected number, got '" + value + "'");
    }
}

inline std::uint64_t parse_u64(const std::string& value, int line) {
    try {
        std::size_t used = 0;
        const std::uint64_t parsed = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument("");
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError(line, "expected unsigned integer, got '" + value + "'");
    }
}

inline std::vector<int> parse_int_list(const std::string& value, int line) {
    std::vector<int> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_int(trim(item), line));
    if (out.empty()) throw ConfigError(line, "expected comma-separated integers");
    return out;
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = detail::trim(raw);
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line = detail::trim(line.substr(0, hash));
        }
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(line_no, "unterminated section header");
            section = line.substr(1, line.size() - 2);
            if (section != "model" && section != "dataset" && section != "federation" &&
                section != "policy" && section != "energy" && section != "run") {
                throw ConfigError(line_no, "unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(line_no, "expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(line_no, "empty key");
        if (section.empty()) throw ConfigError(line_no, "key '" + key + "' outside any section");

        if (section == "model") {
            if (key == "kind") cfg.model_kind = value;
            else if (key == "input_dim") cfg.input_dim = detail::parse_int(value, line_no);
            else if (key == "hidden_dim") cfg.hidden_dim = detail::parse_int(value, line_no);
            else if (key == "classes") cfg.classes = detail::parse_int(value, line_no);
            else throw ConfigError(line_no, "unknown key '" + key + "' in [model]");
        } else if (section == "dataset") {
            if (key == "kind") cfg.dataset_kind = value;
            else if (key == "train_samples") cfg.train_samples = detail::parse_int(value, line_no);
            else if (key == "test_samples") cfg.test_samples = detail::parse_int(value, line_no);
            else if (key == "cluster_spread") cfg.cluster_spread = detail::parse_real(value, line_no);
            else if (key == "data_seed") cfg.data_seed = detail::parse_u64(value, line_no);
            else if (key == "train_images") cfg.train_images = value;
            else if (key == "train_labels") cfg.train_labels = value;
            else if (key == "test_images") cfg.test_images = value;
            else if (key == "test_labels") cfg.test_labels = value;
            else throw ConfigError(line_no, "unknown key '" + key + "' in [dataset]");
        } else if (section == "federation") {
            if (key == "clients") cfg.clients = detail::parse_int(value, line_no);
            else if (key == "rounds") cfg.rounds = detail::parse_int(value, line_no);
            else if (key == "local_steps") cfg.local_steps = detail::parse_int(value, line_no);
            else if (key == "batch_size") cfg.batch_size = detail::parse_int(value, line_no);
            else if (key == "learning_rate") cfg.learning_rate = detail::parse_real(value, line_no);
            else if (key == "momentum") cfg.momentum = detail::parse_real(value, line_no);
            else throw ConfigError(line_no, "unknown key '" + key + "' in [federation]");
        } else if (section == "policy") {
            if (key == "kind") cfg.policy_kind = value;
            else if (key == "bits") cfg.bits = detail::parse_int(value, line_no);
            else if (key == "alpha") cfg.alpha = detail::parse_real(value, line_no);
            else if (key == "beta") cfg.beta = detail::parse_real(value, line_no);
            else if (key == "uplink_bits") cfg.uplink_schedule = detail::parse_int_list(value, line_no);
            else if (key == "downlink_bits") cfg.downlink_schedule = detail::parse_int_list(value, line_no);
            else if (key == "trace_file") cfg.trace_file = value;
            else throw ConfigError(line_no, "unknown key '" + key + "' in [policy]");
        } else if (section == "energy") {
            if (key == "e1_pj_per_bit") cfg.e1 = detail::parse_real(value, line_no);
            else if (key == "e2_pj_per_bit") cfg.e2 = detail::parse_real(value, line_no);
            else if (key == "budget_pj") cfg.budget_pj = detail::parse_real(value, line_no);
            else throw ConfigError(line_no, "unknown key '" + key + "' in [energy]");
        } else {  // run
            if (key == "seed") cfg.seed = detail::parse_u64(value, line_no);
            else if (key == "out_dir") cfg.out_dir = value;
            else throw ConfigError(line_no, "unknown key '" + key + "' in [run]");
        }
    }
    return cfg;
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "[model]\n";
    out << "kind = " << cfg.model_kind << '\n';
    out << "input_dim = " << cfg.input_dim << '\n';
    out << "hidden_dim = " << cfg.hidden_dim << '\n';
    out << "classes = " << cfg.classes << '\n';
    out << "\n[dataset]\n";
    out << "kind = " << cfg.dataset_kind << '\n';
    out << "train_samples = " << cfg.train_samples << '\n';
    out << "test_samples = " << cfg.test_samples << '\n';
    out << "cluster_spread = " << format_double(cfg.cluster_spread) << '\n';
    out << "data_seed = " << cfg.data_seed << '\n';
    if (!cfg.train_images.empty()) out << "train_images = " << cfg.train_images << '\n';
    if (!cfg.train_labels.empty()) out << "train_labels = " << cfg.train_labels << '\n';
    if (!cfg.test_images.empty()) out << "test_images = " << cfg.test_images << '\n';
    if (!cfg.test_labels.empty()) out << "test_labels = " << cfg.test_labels << '\n';
    out << "\n[federation]\n";
    out << "clients = " << cfg.clients << '\n';
    out << "rounds = " << cfg.rounds << '\n';
    out << "local_steps = " << cfg.local_steps << '\n';
    out << "batch_size = " << cfg.batch_size << '\n';
    out << "learning_rate = " << format_double(cfg.learning_rate) << '\n';
    out << "momentum = " << format_double(cfg.momentum) << '\n';
    out << "\n[policy]\n";
    out << "kind = " << cfg.policy_kind << '\n';
    out << "bits = " << cfg.bits << '\n';
    if (cfg.alpha) out << "alpha = " << format_double(*cfg.alpha) << '\n';
    if (cfg.beta) out << "beta = " << format_double(*cfg.beta) << '\n';
    const auto list = [&out](const char* key, const std::vector<int>& bits) {
        if (bits.empty()) return;
        out << key << " = ";
        for (std::size_t i = 0; i < bits.size(); ++i) out << (i ? "," : "") << bits[i];
        out << '\n';
    };
    list("uplink_bits", cfg.uplink_schedule);
    list("downlink_bits", cfg.downlink_schedule);
    if (!cfg.trace_file.empty()) out << "trace_file = " << cfg.trace_file << '\n';
    out << "\n[energy]\n";
    out << "e1_pj_per_bit = " << format_double(cfg.e1) << '\n';
    out << "e2_pj_per_bit = " << format_double(cfg.e2) << '\n';
    if (cfg.budget_pj) out << "budget_pj = " << format_double(*cfg.budget_pj) << '\n';
    out << "\n[run]\n";
    out << "seed = " << cfg.seed << '\n';
    out << "out_dir = " << cfg.out_dir << '\n';
    return out.str();
}

inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(0, "cannot open config file: " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

// --- Range trace CSV (trace subcommand output, oracle-mode input) -----------

inline void write_ranges_csv(std::ostream& out, const std::vector<RoundRecord>& history) {
    std::size_t clients = history.empty() ? 0 : history.front().uplink_ranges.size();
    out << "m,R_dn";
    for (std::size_t i = 0; i < clients; ++i) out << ",R_up_" << i;
    out << '\n';
    for (const RoundRecord& rec : history) {
        out << rec.round << ',' << format_double(rec.downlink_range);
        for (double r : rec.uplink_ranges) out << ',' << format_double(r);
        out << '\n';
    }
}

inline RangeTrace trace_from_history(const std::vector<RoundRecord>& history) {
    RangeTrace trace;
    for (const RoundRecord& rec : history) {
        trace.uplink.push_back(rec.uplink_ranges);
        trace.downlink.push_back(rec.downlink_range);
    }
    return trace;
}

inline RangeTrace load_ranges_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError(path + ": cannot open");
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": empty file");
    RangeTrace trace;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> cells;
        while (std::getline(ss, cell, ',')) {
            try {
                cells.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw FormatError(path + ":" + std::to_string(line_no) + ": bad number '" +
                                  cell + "'");
            }
        }
        if (cells.size() < 3) {
            throw FormatError(path + ":" + std::to_string(line_no) +
                              ": need m,R_dn and at least one uplink range");
        }
        trace.downlink.push_back(cells[1]);
        trace.uplink.emplace_back(cells.begin() + 2, cells.end());
    }
    if (trace.downlink.empty()) throw FormatError(path + ": no data rows");
    return trace;
}

// --- Experiment assembly -----------------------------------------------------

inline void validate(const ExperimentConfig& cfg) {
    const auto fail = [](const std::string& msg) { throw ConfigError(0, msg); };
    if (cfg.model_kind != "logistic" && cfg.model_kind != "mlp") {
        fail("model kind must be 'logistic' or 'mlp', got '" + cfg.model_kind + "'");
    }
    if (cfg.dataset_kind != "synthetic" && cfg.dataset_kind != "idx") {
        fail("dataset kind must be 'synthetic' or 'idx', got '" + cfg.dataset_kind + "'");
    }
    if (cfg.dataset_kind == "idx") {
        for (const std::string& path :
             {cfg.train_images, cfg.train_labels, cfg.test_images, cfg.test_labels}) {
            if (path.empty()) fail("idx dataset needs train/test image and label paths");
            if (!std::filesystem::exists(path)) fail("dataset file not found: " + path);
        }
    } else {
        if (cfg.train_samples < cfg.classes) fail("train_samples must be >= classes");
        if (cfg.test_samples < 1) fail("test_samples must be >= 1");
        if (cfg.cluster_spread < 0) fail("cluster_spread must be >= 0");
    }
    if (cfg.input_dim < 1 || cfg.classes < 2) fail("need input_dim >= 1 and classes >= 2");
    if (cfg.model_kind == "mlp" && cfg.hidden_dim < 1) fail("mlp needs hidden_dim >= 1");
    if (cfg.clients < 1) fail("clients must be >= 1");
    if (cfg.rounds < 0) fail("rounds must be >= 0");
    if (cfg.local_steps < 1) fail("local_steps must be >= 1");
    if (cfg.batch_size < 1) fail("batch_size must be >= 1");
    if (!(cfg.learning_rate > 0)) fail("learning_rate must be positive");
    if (cfg.momentum < 0 || cfg.momentum >= 1) fail("momentum must be in [0, 1)");
    if (!(cfg.e1 > 0) || !(cfg.e2 > 0)) fail("per-bit energies must be positive");

    const std::string& kind = cfg.policy_kind;
    if (kind == "fixed") {
        if (cfg.bits < kMinBits || cfg.bits > kMaxBits) fail("fixed policy bits must be in [1, 32]");
    } else if (kind == "joint_adaptive" || kind == "uplink_adaptive" ||
               kind == "downlink_adaptive") {
        const bool has_constant =
            (kind == "downlink_adaptive") ? cfg.beta.has_value() : cfg.alpha.has_value();
        const bool has_oracle = !cfg.trace_file.empty() && cfg.budget_pj.has_value();
        if (!has_constant && !has_oracle) {
            fail(kind + " policy needs alpha/beta, or trace_file plus [energy] budget_pj");
        }
        if (!cfg.trace_file.empty() && !std::filesystem::exists(cfg.trace_file)) {
            fail("trace file not found: " + cfg.trace_file);
        }
    } else if (kind == "schedule") {
        if (cfg.uplink_schedule.size() != static_cast<std::size_t>(cfg.rounds) ||
            cfg.downlink_schedule.size() != static_cast<std::size_t>(cfg.rounds)) {
            fail("schedule policy needs uplink_bits and downlink_bits with one entry per round");
        }
    } else if (kind != "lossless") {
        fail("unknown policy kind '" + kind + "'");
    }
}

struct ExperimentSetup {
    ModelSpec model;
    Dataset train;
    Dataset test;
    Partition partition;
    FederatedConfig fed;
    ParamVector init;
    std::optional<double> resolved_alpha;  // adaptive constant actually used
};

inline ExperimentSetup build_setup(const ExperimentConfig& cfg) {
    validate(cfg);

    ModelSpec model;
    model.kind = cfg.model_kind == "mlp" ? ModelKind::Mlp : ModelKind::Logistic;
    model.input_dim = cfg.input_dim;
    model.hidden_dim = cfg.model_kind == "mlp" ? cfg.hidden_dim : 0;
    model.classes = cfg.classes;

    Dataset train;
    Dataset test;
    if (cfg.dataset_kind == "synthetic") {
        train = synth_generate(cfg.train_samples, cfg.input_dim, cfg.classes, cfg.cluster_spread,
                               hash64(cfg.data_seed, 0));
        test = synth_generate(cfg.test_samples, cfg.input_dim, cfg.classes, cfg.cluster_spread,
                              hash64(cfg.data_seed, 1));
    } else {
        train = idx_load(cfg.train_images, cfg.train_labels);
        test = idx_load(cfg.test_images, cfg.test_labels);
        if (train.feature_dim != cfg.input_dim) {
            throw ConfigError(0, "input_dim " + std::to_string(cfg.input_dim) +
                                     " does not match IDX feature dim " +
                                     std::to_string(train.feature_dim));
        }
    }

    FederatedConfig fed;
    fed.rounds = cfg.rounds;
    fed.tau = cfg.local_steps;
    fed.eta = cfg.learning_rate;
    fed.batch_size = cfg.batch_size;
    fed.momentum = cfg.momentum;
    fed.e1 = cfg.e1;
    fed.e2 = cfg.e2;
    fed.seed = cfg.seed;

    std::optional<double> resolved;
    const std::string& kind = cfg.policy_kind;
    if (kind == "fixed") {
        fed.policy = FixedPolicy{cfg.bits};
    } else if (kind == "lossless") {
        fed.policy = FixedPolicy{cfg.bits};
        fed.lossless_uplink = true;
        fed.lossless_downlink = true;
    } else if (kind == "schedule") {
        fed.policy = SchedulePolicy{cfg.uplink_schedule, cfg.downlink_schedule};
    } else {
        EnergyParams ep;
        ep.e1 = cfg.e1;
        ep.e2 = cfg.e2;
        ep.d = model.param_count();
        ep.n = cfg.clients;
        ep.rounds = cfg.rounds;
        const auto oracle_constant = [&](auto solve) {
            ep.budget = *cfg.budget_pj;
            const RangeTrace trace = replace_zero_ranges(load_ranges_csv(cfg.trace_file));
            if (trace.rounds() != static_cast<std::size_t>(cfg.rounds) ||
                trace.clients() != static_cast<std::size_t>(cfg.clients)) {
                throw ConfigError(0, "trace file shape does not match rounds x clients");
            }
            return solve(trace, ep);
        };
        if (kind == "joint_adaptive") {
            resolved = cfg.alpha ? *cfg.alpha : oracle_constant([](const RangeTrace& t, const EnergyParams& e) {
                return alpha_joint(t, e);
            });
            fed.policy = JointAdaptivePolicy{*resolved};
        } else if (kind == "uplink_adaptive") {
            resolved = cfg.alpha ? *cfg.alpha : oracle_constant([](const RangeTrace& t, const EnergyParams& e) {
                return alpha_uplink_only(t, e);
            });
            fed.policy = UplinkOnlyAdaptivePolicy{*resolved};
        } else {
            resolved = cfg.beta ? *cfg.beta : oracle_constant([](const RangeTrace& t, const EnergyParams& e) {
                return beta_downlink_only(t, e);
            });
            fed.policy = DownlinkOnlyAdaptivePolicy{*resolved};
        }
    }

    ExperimentSetup setup{std::move(model), std::move(train),    std::move(test),
                          Partition{},      std::move(fed),      ParamVector::zeros(1),
                          resolved};
    setup.partition = iid_partition(setup.train, cfg.clients, hash64(cfg.seed, 0xbeef));
    setup.init = default_init(static_cast<std::size_t>(setup.model.param_count()), cfg.seed);
    return setup;
}

struct ExperimentResult {
    RunResult run;
    std::optional<double> resolved_alpha;
};

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    ExperimentSetup setup = build_setup(cfg);
    const ClassificationObjective objective(setup.model, setup.train);
    const ModelSpec model = setup.model;
    const Dataset& test = setup.test;
    RunResult result =
        run_federated(objective, setup.partition, setup.init, setup.fed,
                      [&model, &test](const ParamVector& w) { return evaluate(model, w, test); });
    return ExperimentResult{std::move(result), setup.resolved_alpha};
}

// Lossless variant of a config, used by the trace subcommand and baselines.
inline ExperimentConfig as_lossless(ExperimentConfig cfg) {
    cfg.policy_kind = "lossless";
    cfg.alpha.reset();
    cfg.beta.reset();
    cfg.trace_file.clear();
    cfg.uplink_schedule.clear();
    cfg.downlink_schedule.clear();
    return cfg;
}

// --- Output writers ----------------------------------------------------------

inline void write_metrics_csv(std::ostream& out, const std::vector<RoundRecord>& history) {
    out << "m,train_loss,test_acc,test_loss,R_up_mean,R_dn,bits_up_mean,bits_dn,"
           "energy_up_cum,energy_dn_cum\n";
    double up_cum = 0.0;
    double dn_cum = 0.0;
    for (const RoundRecord& rec : history) {
        double range_sum = 0.0;
        double bits_sum = 0.0;
        for (double r : rec.uplink_ranges) range_sum += r;
        for (int b : rec.uplink_bits) bits_sum += b;
        const double clients = rec.uplink_ranges.empty()
                                   ? 1.0
                                   : static_cast<double>(rec.uplink_ranges.size());
        up_cum += rec.round_energy_up;
        dn_cum += rec.round_energy_down;
        out << rec.round << ',' << format_double(rec.train_loss) << ','
            << format_double(rec.test_accuracy) << ',' << format_double(rec.test_loss) << ','
            << format_double(range_sum / clients) << ',' << format_double(rec.downlink_range)
            << ',' << format_double(bits_sum / clients) << ',' << rec.downlink_bits << ','
            << format_double(up_cum) << ',' << format_double(dn_cum) << '\n';
    }
}

inline nlohmann::json summary_json(const ExperimentConfig& cfg, const ExperimentResult& result) {
    const EnergyTotals totals = result.run.ledger.total();
    nlohmann::json j;
    j["rounds"] = result.run.history.size();
    j["policy"] = cfg.policy_kind;
    j["seed"] = cfg.seed;
    if (!result.run.history.empty()) {
        const RoundRecord& last = result.run.history.back();
        j["final_train_loss"] = last.train_loss;
        j["final_test_accuracy"] = last.test_accuracy;
        j["final_test_loss"] = last.test_loss;
    }
    j["energy_uplink_pj"] = totals.uplink;
    j["energy_downlink_pj"] = totals.downlink;
    j["energy_total_pj"] = totals.total;
    j["clamp_low"] = result.run.clamps.low;
    j["clamp_high"] = result.run.clamps.high;
    if (result.resolved_alpha) j["alpha_used"] = *result.resolved_alpha;
    if (!result.run.warnings.empty()) j["warnings"] = result.run.warnings;
    return j;
}

// Slope of the least-squares line through (0, y_0), (1, y_1), ...
inline double least_squares_slope(std::span<const double> y) {
    const std::size_t n = y.size();
    if (n < 2) return 0.0;
    const double mean_x = (static_cast<double>(n) - 1.0) / 2.0;
    double mean_y = 0.0;
    for (double v : y) mean_y += v;
    mean_y /= static_cast<double>(n);
    double cov = 0.0;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = static_cast<double>(i) - mean_x;
        cov += dx * (y[i] - mean_y);
        var += dx * dx;
    }
    return cov / var;
}

}  // namespace fedaq
