#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const char* kCliPath = FEDAQ_CLI_PATH;

fs::path work_dir() {
    const auto dir = fs::temp_directory_path() / "fedaq_cli_test";
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

int run_cli(const std::string& args, const fs::path& stdout_file = {},
            const fs::path& stderr_file = {}) {
    std::string cmd = std::string("\"") + kCliPath + "\" " + args;
    if (!stdout_file.empty()) cmd += " > " + stdout_file.string();
    if (!stderr_file.empty()) cmd += " 2> " + stderr_file.string();
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path write_config(const std::string& name, const std::string& policy_lines,
                      int rounds = 5, const std::string& extra = "") {
    const fs::path path = work_dir() / name;
    std::ofstream out(path);
    out << "[dataset]\n"
        << "train_samples = 120\n"
        << "test_samples = 60\n"
        << "cluster_spread = 0.25\n"
        << "[federation]\n"
        << "clients = 3\n"
        << "rounds = " << rounds << "\n"
        << "local_steps = 2\n"
        << "batch_size = 16\n"
        << "momentum = 0\n"
        << "learning_rate = 0.08\n"
        << "[policy]\n"
        << policy_lines << "\n"
        << "[run]\n"
        << "seed = 4242\n"
        << extra;
    return path;
}

int count_lines(const std::string& text) {
    int lines = 0;
    for (char c : text) {
        if (c == '\n') ++lines;
    }
    return lines;
}

}  // namespace

TEST(Cli, RunWritesAllOutputs) {
    const fs::path cfg = write_config("run.cfg", "kind = fixed\nbits = 6");
    const fs::path out = work_dir() / "run_out";
    fs::remove_all(out);
    ASSERT_EQ(run_cli("run " + cfg.string() + " --out " + out.string(),
                      work_dir() / "run_stdout.txt"),
              0);
    EXPECT_TRUE(fs::exists(out / "metrics.csv"));
    EXPECT_TRUE(fs::exists(out / "ledger.csv"));
    EXPECT_TRUE(fs::exists(out / "summary.json"));
    EXPECT_TRUE(fs::exists(out / "config.cfg"));
    // header + one row per round
    EXPECT_EQ(count_lines(read_file(out / "metrics.csv")), 6);
}

TEST(Cli, RerunsAreByteIdentical) {
    const fs::path cfg = write_config("det.cfg", "kind = joint_adaptive\nalpha = 0.01");
    const fs::path out1 = work_dir() / "det1";
    const fs::path out2 = work_dir() / "det2";
    fs::remove_all(out1);
    fs::remove_all(out2);
    ASSERT_EQ(run_cli("run " + cfg.string() + " --out " + out1.string(),
                      work_dir() / "null1.txt"),
              0);
    ASSERT_EQ(run_cli("run " + cfg.string() + " --out " + out2.string(),
                      work_dir() / "null2.txt"),
              0);
    EXPECT_EQ(read_file(out1 / "metrics.csv"), read_file(out2 / "metrics.csv"));
    EXPECT_EQ(read_file(out1 / "ledger.csv"), read_file(out2 / "ledger.csv"));
    EXPECT_EQ(read_file(out1 / "summary.json"), read_file(out2 / "summary.json"));
}

TEST(Cli, MissingConfigExitsWithConfigCode) {
    EXPECT_EQ(run_cli("run /nonexistent/missing.cfg", work_dir() / "null3.txt",
                      work_dir() / "err3.txt"),
              2);
    const std::string err = read_file(work_dir() / "err3.txt");
    EXPECT_NE(err.find("missing.cfg"), std::string::npos);
}

TEST(Cli, BadValueReportsLine) {
    const fs::path path = work_dir() / "bad.cfg";
    std::ofstream(path) << "[federation]\nclients = trio\n";
    EXPECT_EQ(run_cli("run " + path.string(), work_dir() / "null4.txt",
                      work_dir() / "err4.txt"),
              2);
    const std::string err = read_file(work_dir() / "err4.txt");
    EXPECT_NE(err.find("line 2"), std::string::npos);
}

TEST(Cli, MissingDatasetFileExitsTwoAndNamesPath) {
    const fs::path cfg = write_config("idx.cfg", "kind = fixed\nbits = 4", 3,
                                      "[dataset]\nkind = idx\n"
                                      "train_images = /no/such/images\n"
                                      "train_labels = /no/such/labels\n"
                                      "test_images = /no/such/images_t\n"
                                      "test_labels = /no/such/labels_t\n");
    EXPECT_EQ(run_cli("run " + cfg.string(), work_dir() / "null5.txt",
                      work_dir() / "err5.txt"),
              2);
    EXPECT_NE(read_file(work_dir() / "err5.txt").find("/no/such/images"), std::string::npos);
}

TEST(Cli, CompareSelfShowsZeroSaving) {
    const fs::path cfg = write_config("cmp.cfg", "kind = fixed\nbits = 6");
    const fs::path out = work_dir() / "cmp_out";
    fs::remove_all(out);
    ASSERT_EQ(run_cli("compare " + cfg.string() + " " + cfg.string() + " --out " + out.string(),
                      work_dir() / "cmp_stdout.txt"),
              0);
    const std::string csv = read_file(out / "comparison.csv");
    std::istringstream in(csv);
    std::string header, row1, row2;
    std::getline(in, header);
    std::getline(in, row1);
    std::getline(in, row2);
    EXPECT_EQ(header, "config,policy,threshold_metric,threshold,energy_pj,reached,saving_pct");
    EXPECT_EQ(row1.substr(row1.rfind(',') + 1), "0");
    EXPECT_EQ(row2.substr(row2.rfind(',') + 1), "0");
}

TEST(Cli, CompareFixedBitsShowsProportionalSaving) {
    // An easy task both policies solve in the very first round: energy to
    // threshold is then proportional to the bit width, giving exactly 50%.
    const std::string extra =
        "[dataset]\ncluster_spread = 0.05\n";
    const fs::path cfg8 = write_config("fixed8.cfg", "kind = fixed\nbits = 8", 4, extra);
    const fs::path cfg4 = write_config("fixed4.cfg", "kind = fixed\nbits = 4", 4, extra);
    const fs::path out = work_dir() / "cmp48";
    fs::remove_all(out);
    ASSERT_EQ(run_cli("compare " + cfg8.string() + " " + cfg4.string() +
                          " --threshold-acc 0.55 --out " + out.string(),
                      work_dir() / "cmp48_stdout.txt"),
              0);
    const std::string csv = read_file(out / "comparison.csv");
    std::istringstream in(csv);
    std::string header, row8, row4;
    std::getline(in, header);
    std::getline(in, row8);
    std::getline(in, row4);
    EXPECT_NE(row8.find(",yes,"), std::string::npos);
    EXPECT_NE(row4.find(",yes,"), std::string::npos);
    EXPECT_EQ(row4.substr(row4.rfind(',') + 1), "50");
}

TEST(Cli, CompareRejectsMismatchedTasks) {
    const fs::path a = write_config("task_a.cfg", "kind = fixed\nbits = 6");
    const fs::path b = write_config("task_b.cfg", "kind = fixed\nbits = 6", 5,
                                    "[dataset]\ntrain_samples = 121\n");
    EXPECT_EQ(run_cli("compare " + a.string() + " " + b.string(), work_dir() / "null6.txt",
                      work_dir() / "err6.txt"),
              2);
}

TEST(Cli, TraceWritesRangesAndSlopes) {
    const fs::path cfg = write_config("trace.cfg", "kind = fixed\nbits = 8", 6);
    const fs::path out = work_dir() / "trace_out";
    fs::remove_all(out);
    const fs::path stdout_file = work_dir() / "trace_stdout.txt";
    ASSERT_EQ(run_cli("trace " + cfg.string() + " --out " + out.string(), stdout_file), 0);
    EXPECT_EQ(count_lines(read_file(out / "ranges.csv")), 7);  // header + 6 rounds
    const std::string printed = read_file(stdout_file);
    EXPECT_NE(printed.find("uplink_range_slope="), std::string::npos);
    EXPECT_NE(printed.find("downlink_range_slope="), std::string::npos);
    // The trace run quantizes nothing, so its ledger would be empty; the
    // echoed config records the lossless policy.
    EXPECT_NE(read_file(out / "config.cfg").find("kind = lossless"), std::string::npos);
}

TEST(Cli, OracleModeFromPilotTrace) {
    const fs::path pilot_cfg = write_config("pilot.cfg", "kind = fixed\nbits = 8", 6);
    const fs::path pilot_out = work_dir() / "pilot_out";
    fs::remove_all(pilot_out);
    ASSERT_EQ(run_cli("trace " + pilot_cfg.string() + " --out " + pilot_out.string(),
                      work_dir() / "null9.txt"),
              0);

    // d = 2*2 + 2 = 6 parameters, 3 clients, 6 rounds: one extra bit per
    // transmitted tensor is at most 2 * 6 * 3 * 6 pJ at 1 pJ/b.
    const double budget = 2000.0;
    const double slack = 2.0 * 6 * 3 * 6;
    const fs::path cfg = write_config(
        "oracle.cfg",
        "kind = joint_adaptive\ntrace_file = " + (pilot_out / "ranges.csv").string(), 6,
        "[energy]\nbudget_pj = 2000\n");
    const fs::path out = work_dir() / "oracle_out";
    fs::remove_all(out);
    ASSERT_EQ(run_cli("run " + cfg.string() + " --out " + out.string(),
                      work_dir() / "null10.txt"),
              0);
    const std::string summary = read_file(out / "summary.json");
    EXPECT_NE(summary.find("alpha_used"), std::string::npos);

    double total = -1.0;
    std::istringstream in(summary);
    std::string line;
    while (std::getline(in, line)) {
        const auto key = line.find("\"energy_total_pj\":");
        if (key != std::string::npos) {
            total = std::stod(line.substr(key + 18));
        }
    }
    ASSERT_GE(total, 0.0);
    EXPECT_LE(total, budget + slack);
}

TEST(Cli, SeedOverrideChangesResults) {
    const fs::path cfg = write_config("seed.cfg", "kind = fixed\nbits = 6");
    const fs::path out1 = work_dir() / "seed1";
    const fs::path out2 = work_dir() / "seed2";
    fs::remove_all(out1);
    fs::remove_all(out2);
    ASSERT_EQ(run_cli("run " + cfg.string() + " --out " + out1.string() + " --seed 1",
                      work_dir() / "null7.txt"),
              0);
    ASSERT_EQ(run_cli("run " + cfg.string() + " --out " + out2.string() + " --seed 2",
                      work_dir() / "null8.txt"),
              0);
    EXPECT_NE(read_file(out1 / "metrics.csv"), read_file(out2 / "metrics.csv"));
}
