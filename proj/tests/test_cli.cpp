#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cli.hpp"
#include "twpa/sntj.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
    std::vector<const char*> argv = {"twpa-sim"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return twpa::cli::run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// file content with the timestamp line/field removed
std::string without_timestamp(const std::string& text) {
    std::istringstream in(text);
    std::string line, out;
    while (std::getline(in, line)) {
        if (line.find("generated_at_utc") != std::string::npos) continue;
        out += line;
        out += '\n';
    }
    return out;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

}  // namespace

TEST_CASE("exit codes") {
    TempDir dir("twpa_cli_codes");

    SUBCASE("success") {
        CHECK(run({"simulate", "--n-rep", "5000", "--n-batches", "5", "--out-dir",
                   dir.str()}) == 0);
    }
    SUBCASE("config errors exit 1") {
        CHECK(run({"simulate", "--gain", "0.5", "--out-dir", dir.str()}) == 1);
        CHECK(run({"simulate", "--r", "-1", "--out-dir", dir.str()}) == 1);
        CHECK(run({"simulate", "--eta-s", "1.5", "--out-dir", dir.str()}) == 1);
        CHECK(run({"simulate", "--tau", "0", "--out-dir", dir.str()}) == 1);
        CHECK(run({"sweep-gain", "--gains", "0.8,1.2", "--out-dir", dir.str()}) == 1);
        CHECK(run({"sweep-detuning", "--deltas", "-1e8", "--out-dir", dir.str()}) == 1);
        CHECK(run({"no-such-command"}) == 1);
        // gain and r are mutually exclusive
        CHECK(run({"simulate", "--gain", "1.3", "--r", "0.5", "--out-dir", dir.str()}) == 1);
        // eta form and cells form are mutually exclusive
        CHECK(run({"simulate", "--eta-s", "0.5", "--cells", "100", "--out-dir",
                   dir.str()}) == 1);
    }
    SUBCASE("io errors exit 3") {
        CHECK(run({"calibrate", "--input", "/no/such/file.csv", "--out-dir", dir.str()}) == 3);
    }
    SUBCASE("help exits 0") { CHECK(run({"--help"}) == 0); }
}

TEST_CASE("simulate writes the full output set") {
    TempDir dir("twpa_cli_sim");
    REQUIRE(run({"simulate", "--n-rep", "20000", "--n-batches", "10", "--eta-s", "0.508",
                 "--eta-i", "0.508", "--out-dir", dir.str(), "--export-batch-csv"}) == 0);
    for (const char* name :
         {"batch.twpa", "covariance.json", "metrics.json", "batch.csv", "hist_x_s_p_s.csv",
          "hist_x_i_p_i.csv", "hist_x_s_x_i.csv", "hist_p_s_p_i.csv", "hist_x_s_p_i.csv",
          "hist_p_s_x_i.csv"}) {
        CHECK(fs::exists(dir.path / name));
    }
    const std::string hist = slurp(dir.path / "hist_x_s_x_i.csv");
    CHECK(hist.find("# seed=12345") != std::string::npos);      // config echo
    CHECK(hist.find("# eta_s=0.508") != std::string::npos);     // resolved value
    CHECK(hist.find("generated_at_utc=") != std::string::npos); // single timestamp line
    CHECK(hist.find("x_s,x_i,signed_count") != std::string::npos);
}

TEST_CASE("outputs are deterministic modulo the timestamp") {
    TempDir a("twpa_cli_det_a");
    TempDir b("twpa_cli_det_b");
    const std::vector<std::string> common = {"--n-rep", "10000", "--n-batches", "5",
                                             "--seed", "777"};
    for (const auto& dir : {a.str(), b.str()}) {
        std::vector<std::string> args = {"simulate"};
        args.insert(args.end(), common.begin(), common.end());
        args.push_back("--out-dir");
        args.push_back(dir);
        REQUIRE(run(args) == 0);
    }
    CHECK(slurp(a.path / "batch.twpa") == slurp(b.path / "batch.twpa"));  // bit-identical
    for (const char* name : {"covariance.json", "metrics.json", "hist_x_s_x_i.csv"}) {
        CHECK(without_timestamp(slurp(a.path / name)) ==
              without_timestamp(slurp(b.path / name)));
    }

    SUBCASE("a different seed changes the data") {
        TempDir c("twpa_cli_det_c");
        REQUIRE(run({"simulate", "--n-rep", "10000", "--n-batches", "5", "--seed", "778",
                     "--out-dir", c.str()}) == 0);
        CHECK(slurp(a.path / "batch.twpa") != slurp(c.path / "batch.twpa"));
    }
}

TEST_CASE("config file with flag override") {
    TempDir dir("twpa_cli_cfg");
    const fs::path cfg = dir.path / "run.cfg";
    {
        std::ofstream out(cfg);
        out << "n-rep=5000\nseed=99\neta-s=0.7\neta-i=0.7\nn-batches=5\n";
    }
    REQUIRE(run({"simulate", "--config", cfg.string(), "--out-dir", dir.str()}) == 0);
    std::string hist = slurp(dir.path / "hist_x_s_p_s.csv");
    CHECK(hist.find("# seed=99") != std::string::npos);
    CHECK(hist.find("# eta_s=0.69999999999999996") != std::string::npos);
    CHECK(hist.find("# n_rep=5000") != std::string::npos);

    // a flag on the command line wins over the config file
    REQUIRE(run({"simulate", "--config", cfg.string(), "--seed", "100", "--out-dir",
                 dir.str()}) == 0);
    hist = slurp(dir.path / "hist_x_s_p_s.csv");
    CHECK(hist.find("# seed=100") != std::string::npos);
}

TEST_CASE("sweep csv shapes") {
    TempDir dir("twpa_cli_sweeps");
    const std::vector<std::string> fast = {"--n-rep", "5000", "--n-batches", "5",
                                           "--out-dir", dir.str()};
    auto with = [&](std::vector<std::string> head) {
        head.insert(head.end(), fast.begin(), fast.end());
        return head;
    };

    SUBCASE("phase sweep has one row per point") {
        REQUIRE(run(with({"sweep-phase", "--points", "3"})) == 0);
        std::istringstream in(slurp(dir.path / "phase_sweep.csv"));
        std::string line;
        int rows = 0;
        bool header = false;
        while (std::getline(in, line)) {
            if (line.rfind("phi,", 0) == 0) header = true;
            else if (!line.empty() && line[0] != '#') ++rows;
        }
        CHECK(header);
        CHECK(rows == 3);
    }
    SUBCASE("single-point phase sweep") {
        REQUIRE(run(with({"sweep-phase", "--points", "1"})) == 0);
        std::istringstream in(slurp(dir.path / "phase_sweep.csv"));
        std::string line;
        int rows = 0;
        while (std::getline(in, line))
            if (!line.empty() && line[0] != '#' && line.rfind("phi,", 0) != 0) ++rows;
        CHECK(rows == 1);
    }
    SUBCASE("detuning sweep rows are sorted by delta") {
        REQUIRE(run(with({"sweep-detuning", "--deltas", "3e8,1e8,2e8"})) == 0);
        std::istringstream in(slurp(dir.path / "detuning_sweep.csv"));
        std::string line;
        std::vector<double> ds;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#' || line.rfind("delta_hz", 0) == 0) continue;
            ds.push_back(std::stod(line.substr(0, line.find(','))));
        }
        REQUIRE(ds.size() == 3);
        CHECK(ds[0] < ds[1]);
        CHECK(ds[1] < ds[2]);
    }
    SUBCASE("gain sweep model column rises with gain") {
        REQUIRE(run(with({"sweep-gain", "--gains", "1.1,1.3,1.6"})) == 0);
        std::istringstream in(slurp(dir.path / "gain_sweep.csv"));
        std::string line;
        std::vector<double> model;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#' || line.rfind("gain,", 0) == 0) continue;
            model.push_back(std::stod(line.substr(line.rfind(',') + 1)));
        }
        REQUIRE(model.size() == 3);
        CHECK(model[0] < model[1]);
        CHECK(model[1] < model[2]);
    }
    SUBCASE("cells curve marks the requested row and degrades monotonically") {
        REQUIRE(run(with({"cells-curve", "--max-cells", "40", "--mark-cells", "7"})) == 0);
        std::istringstream in(slurp(dir.path / "cells_curve.csv"));
        std::string line;
        double prev_sq = -1e300;
        int marked_at = -1;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#' || line.rfind("n_cells", 0) == 0) continue;
            std::stringstream row(line);
            std::string n, eps, sq, marked;
            std::getline(row, n, ',');
            std::getline(row, eps, ',');
            std::getline(row, sq, ',');
            std::getline(row, marked, ',');
            CHECK(std::stod(sq) >= prev_sq);  // toward 0 dB with more cells
            prev_sq = std::stod(sq);
            if (marked == "1") marked_at = std::stoi(n);
        }
        CHECK(marked_at == 7);
    }
}

TEST_CASE("calibrate round trip through files") {
    TempDir dir("twpa_cli_cal");
    twpa::SntjDataset data;
    data.f_hz = 4.6e9;
    data.tau_s = 6e-6;
    for (int i = 0; i < 41; ++i) {
        const double v = -0.5e-3 + 1e-3 * i / 40.0;
        data.points.emplace_back(v, twpa::sntj_model(v, 0.05, 3.0, 1e9, data.f_hz, data.tau_s));
    }
    const fs::path input = dir.path / "sntj.csv";
    twpa::write_sntj_csv(input.string(), data);

    REQUIRE(run({"calibrate", "--input", input.string(), "--out-dir", dir.str()}) == 0);
    const std::string report = slurp(dir.path / "sntj_fit.json");
    CHECK(report.find("\"insertion_loss_db\": 2.0") != std::string::npos);
    // fitted gain within 0.1% of the generator
    const auto pos = report.find("\"g_sys\": ");
    REQUIRE(pos != std::string::npos);
    const double g = std::stod(report.substr(pos + 9));
    CHECK(std::abs(g - 1e9) / 1e9 < 1e-3);

    SUBCASE("missing metadata names the key") {
        const fs::path bad = dir.path / "bad.csv";
        {
            std::ofstream out(bad);
            out << "V_volts,N_watts\n";
            for (int i = 0; i < 8; ++i) out << i * 1e-5 << ",1e-9\n";
        }
        CHECK(run({"calibrate", "--input", bad.string(), "--out-dir", dir.str()}) == 3);
    }
}

TEST_CASE("stability outputs") {
    TempDir dir("twpa_cli_stab");
    REQUIRE(run({"stability", "--reps", "4", "--n-rep-each", "20000", "--eta-s", "0.508",
                 "--eta-i", "0.508", "--n-add-s", "0", "--n-add-i", "0", "--out-dir",
                 dir.str()}) == 0);
    CHECK(fs::exists(dir.path / "stability.csv"));
    CHECK(fs::exists(dir.path / "stability.json"));
    const std::string csv = slurp(dir.path / "stability.csv");
    CHECK(csv.find("# reps=4") != std::string::npos);
    CHECK(csv.find("e_n_bin_center,count") != std::string::npos);
}
