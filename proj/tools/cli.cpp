#include "cli.hpp"

#include "twpa/chain.hpp"
#include "twpa/errors.hpp"
#include "twpa/estimator.hpp"
#include "twpa/gaussian.hpp"
#include "twpa/rng.hpp"
#include "twpa/sntj.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace twpa::cli {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

constexpr double kPi = std::numbers::pi;

// Resolved experiment parameters; defaults follow the reference
// operating point (f_p = 4.415 GHz, detuning 200 MHz, gain 1.30,
// 250 cells at 8.2e-4 loss per cell, tau = 6 us).
struct Setup {
    double r = 0.0;
    double gain = 1.30;
    double phi = kPi;  // squeezed x_+ convention
    double eta_s = 1.0;
    double eta_i = 1.0;
    bool cells_form = true;
    int n_cells = 250;
    double eps_cell = 8.2e-4;
    ChainSpec chain;
    std::size_t n_rep = 1'000'000;
    std::uint64_t seed = 12345;
    int n_batches = 50;
    int bins = 121;
    double range = 6.0;
    std::string out_dir = ".";

    SqueezeSpec squeeze() const { return SqueezeSpec(r, phi); }
    LossModel loss() const { return LossModel(eta_s, eta_i); }
    CovMatrix4 state() const { return tms_covariance(squeeze(), loss()); }
};

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string format_g(double v, int digits = 10) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*g", digits, v);
    return buf;
}

// Comment block echoing the full resolved configuration; the timestamp
// is the single non-reproducible line.
std::string config_comment(const Setup& s) {
    std::ostringstream out;
    out << "# r=" << format_g(s.r, 17) << "\n# gain=" << format_g(s.gain, 17)
        << "\n# phi=" << format_g(s.phi, 17) << "\n# eta_s=" << format_g(s.eta_s, 17)
        << "\n# eta_i=" << format_g(s.eta_i, 17);
    if (s.cells_form) {
        out << "\n# n_cells=" << s.n_cells << "\n# eps_cell=" << format_g(s.eps_cell, 17);
    }
    const ChainSpec& c = s.chain;
    out << "\n# g_sys_s=" << format_g(c.g_sys_s, 17) << "\n# g_sys_i=" << format_g(c.g_sys_i, 17)
        << "\n# n_add_s=" << format_g(c.n_add_s, 17) << "\n# n_add_i=" << format_g(c.n_add_i, 17)
        << "\n# tau=" << format_g(c.tau, 17) << "\n# impedance=" << format_g(c.z, 17)
        << "\n# f_p=" << format_g(c.f_p, 17) << "\n# delta=" << format_g(c.delta, 17)
        << "\n# n_rep=" << s.n_rep << "\n# seed=" << s.seed
        << "\n# n_batches=" << s.n_batches << "\n# bins=" << s.bins
        << "\n# range=" << format_g(s.range, 17)
        << "\n# generated_at_utc=" << utc_timestamp() << "\n";
    return out.str();
}

void write_text_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw io_error("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw io_error("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw io_error("cannot move " + tmp.string() + " to " + path.string());
}

std::string with_timestamp(const std::string& lib_json) {
    ordered_json j = ordered_json::parse(lib_json);
    j["generated_at_utc"] = utc_timestamp();
    return j.dump(2) + "\n";
}

fs::path ensure_out_dir(const Setup& s) {
    const fs::path dir(s.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create output directory " + dir.string());
    return dir;
}

struct PointResult {
    CovEstimate est;
    EstimatedMetrics metrics;
};

PointResult run_point(const Setup& s, const CovMatrix4& state, std::uint64_t seed) {
    const auto [on, off] = measured_covariances(state, s.chain);
    const AcquisitionBatch batch = sample_batch(on, off, s.n_rep, seed, s.chain);
    PointResult pr;
    pr.est = estimate_covariance(batch, s.n_batches);
    pr.metrics = report_metrics(pr.est);
    return pr;
}

int cmd_simulate(const Setup& s, bool export_csv) {
    if (s.n_rep > 20'000'000) {
        std::cerr << "warning: n_rep = " << s.n_rep
                  << " is far above the desk-scale default (1e6); this run may take "
                     "minutes and gigabytes\n";
    }
    const fs::path dir = ensure_out_dir(s);
    const CovMatrix4 state = s.state();
    const auto [on, off] = measured_covariances(state, s.chain);
    const AcquisitionBatch batch = sample_batch(on, off, s.n_rep, s.seed, s.chain);
    write_batch_file((dir / "batch.twpa").string(), batch);

    const CovEstimate est = estimate_covariance(batch, s.n_batches);
    const EstimatedMetrics metrics = report_metrics(est);
    write_text_atomic(dir / "covariance.json", with_timestamp(to_json(est)));
    write_text_atomic(dir / "metrics.json", with_timestamp(to_json(metrics)));

    const auto hists = diff_histograms(batch, s.bins, s.range);
    for (const auto& h : hists) {
        std::ostringstream body;
        body << config_comment(s);
        write_histogram_csv(body, h);
        write_text_atomic(dir / ("hist_" + h.axis_a + "_" + h.axis_b + ".csv"), body.str());
    }
    if (export_csv) {
        std::ostringstream body;
        write_batch_csv(body, batch);
        write_text_atomic(dir / "batch.csv", body.str());
    }

    std::cout << "E_N = " << format_g(metrics.report.log_negativity, 4) << " +- "
              << format_g(metrics.e_n_stderr, 3) << "\n"
              << "Sq_+ = " << format_g(metrics.report.sq_plus_db, 4) << " dB +- "
              << format_g(metrics.sq_plus_db_stderr, 3) << " dB\n"
              << "outputs in " << dir.string() << "\n";
    return 0;
}

int cmd_sweep_phase(Setup s, int n_points) {
    if (n_points < 1) throw std::invalid_argument("sweep-phase: need at least one point");
    const fs::path dir = ensure_out_dir(s);
    std::ostringstream body;
    body << config_comment(s);
    body << "phi,var_x_plus,var_p_plus,sq_plus_db,e_n,e_n_err\n";
    for (int k = 0; k < n_points; ++k) {
        s.phi = 2.0 * kPi * k / n_points;
        const PointResult pr =
            run_point(s, s.state(), derive_seed(s.seed, 0x7068u, static_cast<std::uint64_t>(k)));
        body << format_g(s.phi) << ',' << format_g(pr.metrics.report.var_x_plus) << ','
             << format_g(pr.metrics.report.var_p_plus) << ','
             << format_g(pr.metrics.report.sq_plus_db) << ','
             << format_g(pr.metrics.report.log_negativity) << ','
             << format_g(pr.metrics.e_n_stderr) << "\n";
    }
    write_text_atomic(dir / "phase_sweep.csv", body.str());
    std::cout << "wrote " << (dir / "phase_sweep.csv").string() << "\n";
    return 0;
}

int cmd_sweep_detuning(Setup s, std::vector<double> deltas) {
    for (double d : deltas) {
        if (!(d > 0.0) || !(d < s.chain.f_p)) {
            throw std::invalid_argument("sweep-detuning: detuning must satisfy 0 < delta < f_p, got " +
                                        format_g(d));
        }
    }
    std::sort(deltas.begin(), deltas.end());
    const fs::path dir = ensure_out_dir(s);
    const double e_n_model = log_negativity_closed_form(s.squeeze(), s.loss());
    std::ostringstream body;
    body << config_comment(s);
    body << "delta_hz,sq_plus_db,e_n,e_n_err,e_f,ebit_rate_per_s,e_n_model\n";
    for (std::size_t k = 0; k < deltas.size(); ++k) {
        s.chain.delta = deltas[k];
        const PointResult pr =
            run_point(s, s.state(), derive_seed(s.seed, 0x6474u, static_cast<std::uint64_t>(k)));
        const double e_f = entropy_formation(pr.metrics.report.log_negativity);
        const double rate = ebit_rate(e_f, 2.0 * deltas[k]);
        body << format_g(deltas[k]) << ',' << format_g(pr.metrics.report.sq_plus_db) << ','
             << format_g(pr.metrics.report.log_negativity) << ','
             << format_g(pr.metrics.e_n_stderr) << ',' << format_g(e_f) << ','
             << format_g(rate) << ',' << format_g(e_n_model) << "\n";
    }
    write_text_atomic(dir / "detuning_sweep.csv", body.str());
    std::cout << "wrote " << (dir / "detuning_sweep.csv").string() << "\n";
    return 0;
}

int cmd_sweep_gain(Setup s, std::vector<double> gains) {
    for (double g : gains) {
        if (!(g >= 1.0)) {
            throw std::invalid_argument("sweep-gain: linear gain must be >= 1, got " +
                                        format_g(g));
        }
    }
    std::sort(gains.begin(), gains.end());
    const fs::path dir = ensure_out_dir(s);
    std::ostringstream body;
    body << config_comment(s);
    // the model column keeps rising with gain; measured devices fall off
    // at high pump power through processes outside this model
    body << "gain,r,sq_plus_db,e_n,e_n_err,e_n_model\n";
    for (std::size_t k = 0; k < gains.size(); ++k) {
        s.gain = gains[k];
        s.r = gain_to_r(gains[k]);
        const PointResult pr =
            run_point(s, s.state(), derive_seed(s.seed, 0x676eu, static_cast<std::uint64_t>(k)));
        const double model = log_negativity_closed_form(s.squeeze(), s.loss());
        body << format_g(s.gain) << ',' << format_g(s.r) << ','
             << format_g(pr.metrics.report.sq_plus_db) << ','
             << format_g(pr.metrics.report.log_negativity) << ','
             << format_g(pr.metrics.e_n_stderr) << ',' << format_g(model) << "\n";
    }
    write_text_atomic(dir / "gain_sweep.csv", body.str());
    std::cout << "wrote " << (dir / "gain_sweep.csv").string() << "\n";
    return 0;
}

int cmd_cells_curve(const Setup& s, int max_cells, int mark_cells) {
    if (max_cells < 0) throw std::invalid_argument("cells-curve: max-cells must be >= 0");
    const fs::path dir = ensure_out_dir(s);
    std::ostringstream body;
    body << config_comment(s);
    body << "n_cells,eps_bar,sq_plus_db,marked\n";
    const SqueezeSpec sq(s.r, kPi);  // squeezed-quadrature convention
    for (int n = 0; n <= max_cells; ++n) {
        const LossModel loss = loss_from_cells(n, s.eps_cell);
        const double var = collective_variances(tms_covariance(sq, loss)).x_plus;
        body << n << ',' << format_g(loss.epsilon_bar()) << ',' << format_g(squeezing_db(var))
             << ',' << (n == mark_cells ? 1 : 0) << "\n";
    }
    write_text_atomic(dir / "cells_curve.csv", body.str());
    std::cout << "wrote " << (dir / "cells_curve.csv").string() << "\n";
    return 0;
}

int cmd_calibrate(const Setup& s, const std::string& input, std::string output,
                  double insertion_loss_db, const SntjGuess& guess) {
    const fs::path dir = ensure_out_dir(s);
    if (output.empty()) output = (dir / "sntj_fit.json").string();
    const SntjDataset data = read_sntj_csv(input);
    const SntjFitResult fit = fit_sntj(data, guess);
    write_text_atomic(output, with_timestamp(fit_report_json(fit, data, insertion_loss_db)));
    std::cout << "G_sys = " << format_g(fit.g_sys, 6) << " ("
              << format_g(10.0 * std::log10(fit.g_sys), 4) << " dB), device plane "
              << format_g(correct_insertion_loss(fit, insertion_loss_db), 6) << "\n"
              << "T_sys = " << format_g(fit.t_sys, 4) << " K, T = " << format_g(fit.t, 4)
              << " K\nwrote " << output << "\n";
    return 0;
}

int cmd_stability(const Setup& s, int reps, std::size_t n_rep_each, int hist_bins) {
    const fs::path dir = ensure_out_dir(s);
    const StabilityReport rep =
        stability_study(s.state(), s.chain, reps, n_rep_each, s.seed, hist_bins);
    std::ostringstream body;
    body << config_comment(s);
    write_stability_csv(body, rep);
    write_text_atomic(dir / "stability.csv", body.str());
    write_text_atomic(dir / "stability.json", with_timestamp(to_json(rep)));
    std::cout << "E_N over " << reps << " repetitions: mean " << format_g(rep.mean, 4)
              << ", std " << format_g(rep.stddev, 3) << "\nwrote "
              << (dir / "stability.csv").string() << "\n";
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Two-mode squeezing simulator and analysis toolkit for a "
                 "traveling-wave parametric amplifier"};
    app.set_config("--config", "", "flat key=value configuration file");
    app.require_subcommand(1);

    // shared experiment options (available before or after the subcommand)
    double opt_gain = 1.30, opt_r = 0.0, opt_phi = kPi;
    double opt_eta_s = 0.0, opt_eta_i = 0.0;
    int opt_cells = 250;
    double opt_eps_cell = 8.2e-4;
    double opt_g_sys_s = 1e9, opt_g_sys_i = 1e9;
    double opt_n_add_s = 2.645, opt_n_add_i = 2.645;  // sensitivity^2 / 2
    double opt_tau = 6e-6, opt_z = 50.0, opt_f_p = 4.415e9, opt_delta = 2e8;
    double opt_n_rep = 1e6;
    std::uint64_t opt_seed = 12345;
    int opt_n_batches = 50, opt_bins = 121;
    double opt_range = 6.0;
    std::string opt_out_dir;

    auto* og = app.add_option("--gain", opt_gain, "linear power gain G >= 1 (default 1.30)");
    auto* orr = app.add_option("--r", opt_r, "squeezing amplitude r (alternative to --gain)");
    orr->excludes(og);
    app.add_option("--phi", opt_phi, "squeezing phase in radians (default pi)");
    auto* oes = app.add_option("--eta-s", opt_eta_s, "signal transmission in [0,1]");
    auto* oei = app.add_option("--eta-i", opt_eta_i, "idler transmission in [0,1]");
    auto* ocells = app.add_option("--cells", opt_cells, "number of unit cells (default 250)");
    app.add_option("--eps-cell", opt_eps_cell, "loss per unit cell (default 8.2e-4)");
    oes->excludes(ocells);
    oei->excludes(ocells);
    app.add_option("--g-sys-s", opt_g_sys_s, "system gain, signal path (default 1e9)");
    app.add_option("--g-sys-i", opt_g_sys_i, "system gain, idler path (default 1e9)");
    app.add_option("--n-add-s", opt_n_add_s, "added noise quanta, signal (default 2.645)");
    app.add_option("--n-add-i", opt_n_add_i, "added noise quanta, idler (default 2.645)");
    app.add_option("--tau", opt_tau, "acquisition time in seconds (default 6e-6)");
    app.add_option("--impedance", opt_z, "line impedance in ohms (default 50)");
    app.add_option("--f-p", opt_f_p, "pump frequency in Hz (default 4.415e9)");
    app.add_option("--delta", opt_delta, "detuning in Hz (default 2e8)");
    app.add_option("--n-rep", opt_n_rep, "on/off acquisitions per run (default 1e6)");
    app.add_option("--seed", opt_seed, "master RNG seed (default 12345)");
    app.add_option("--n-batches", opt_n_batches, "batch-means blocks (default 50)");
    app.add_option("--bins", opt_bins, "histogram bins per axis (default 121)");
    app.add_option("--range", opt_range, "histogram half-range (default 6)");
    app.add_option("--out-dir", opt_out_dir,
                   "output directory (default $TWPA_OUT_DIR or current directory)");

    auto* sim = app.add_subcommand("simulate", "single operating point: batch, covariance, "
                                               "histograms and metrics");
    bool opt_batch_csv = false;
    sim->add_flag("--export-batch-csv", opt_batch_csv, "also write the batch as CSV");

    auto* sweep_phase = app.add_subcommand("sweep-phase", "metrics vs squeezing phase");
    int opt_points = 16;
    sweep_phase->add_option("--points", opt_points, "number of phase points (default 16)");

    auto* sweep_detuning = app.add_subcommand("sweep-detuning", "metrics vs detuning");
    std::vector<double> opt_deltas;
    sweep_detuning->add_option("--deltas", opt_deltas, "detuning values in Hz")
        ->required()
        ->delimiter(',');

    auto* sweep_gain = app.add_subcommand("sweep-gain", "metrics vs linear gain "
                                                        "(pump-power proxy)");
    std::vector<double> opt_gains;
    sweep_gain->add_option("--gains", opt_gains, "linear gain values")->required()->delimiter(',');

    auto* cells = app.add_subcommand("cells-curve", "model squeezing vs device length");
    int opt_max_cells = 400, opt_mark_cells = 250;
    cells->add_option("--max-cells", opt_max_cells, "last cell count (default 400)");
    cells->add_option("--mark-cells", opt_mark_cells, "row to flag (default 250)");

    auto* calibrate = app.add_subcommand("calibrate", "fit a shot-noise junction "
                                                      "noise-vs-bias curve");
    std::string opt_input, opt_output;
    double opt_loss_db = 2.0;
    SntjGuess opt_guess;
    calibrate->add_option("--input", opt_input, "SNTJ CSV (V_volts,N_watts with # f_hz= "
                                                "and # tau_s= metadata)")
        ->required();
    calibrate->add_option("--output", opt_output, "fit report path (default "
                                                  "<out-dir>/sntj_fit.json)");
    calibrate->add_option("--insertion-loss-db", opt_loss_db,
                          "insertion loss between source and device planes (default 2.0)");
    calibrate->add_option("--guess-t", opt_guess.t, "initial electron temperature in K");
    calibrate->add_option("--guess-t-sys", opt_guess.t_sys, "initial system temperature in K");
    calibrate->add_option("--guess-g-sys", opt_guess.g_sys, "initial system gain");

    auto* stability = app.add_subcommand("stability", "repeated-experiment spread of E_N");
    int opt_reps = 50, opt_hist_bins = 15;
    double opt_n_rep_each = 2e5;
    stability->add_option("--reps", opt_reps, "number of repetitions (default 50)");
    stability->add_option("--n-rep-each", opt_n_rep_each,
                          "acquisitions per repetition (default 2e5)");
    stability->add_option("--hist-bins", opt_hist_bins, "histogram bins (default 15)");

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        Setup s;
        if (orr->count()) {
            if (!(opt_r >= 0.0)) throw std::invalid_argument("--r must be >= 0");
            s.r = opt_r;
            s.gain = r_to_gain(opt_r);
        } else {
            s.gain = opt_gain;
            s.r = gain_to_r(opt_gain);
        }
        s.phi = opt_phi;
        if (oes->count() || oei->count()) {
            s.cells_form = false;
            s.eta_s = oes->count() ? opt_eta_s : opt_eta_i;
            s.eta_i = oei->count() ? opt_eta_i : opt_eta_s;
        } else {
            s.cells_form = true;
            s.n_cells = opt_cells;
            s.eps_cell = opt_eps_cell;
            const LossModel device = loss_from_cells(opt_cells, opt_eps_cell);
            s.eta_s = device.eta_s();
            s.eta_i = device.eta_i();
        }
        s.chain.g_sys_s = opt_g_sys_s;
        s.chain.g_sys_i = opt_g_sys_i;
        s.chain.n_add_s = opt_n_add_s;
        s.chain.n_add_i = opt_n_add_i;
        s.chain.tau = opt_tau;
        s.chain.z = opt_z;
        s.chain.f_p = opt_f_p;
        s.chain.delta = opt_delta;
        s.chain.validate();
        if (!(opt_n_rep >= 1.0) || opt_n_rep != std::floor(opt_n_rep)) {
            throw std::invalid_argument("--n-rep must be a positive integer");
        }
        s.n_rep = static_cast<std::size_t>(opt_n_rep);
        s.seed = opt_seed;
        s.n_batches = opt_n_batches;
        s.bins = opt_bins;
        s.range = opt_range;
        if (!opt_out_dir.empty()) {
            s.out_dir = opt_out_dir;
        } else if (const char* env = std::getenv("TWPA_OUT_DIR"); env && *env) {
            s.out_dir = env;
        }
        // type-level validation of the state inputs
        (void)s.squeeze();
        (void)s.loss();

        if (sim->parsed()) return cmd_simulate(s, opt_batch_csv);
        if (sweep_phase->parsed()) return cmd_sweep_phase(s, opt_points);
        if (sweep_detuning->parsed()) return cmd_sweep_detuning(s, opt_deltas);
        if (sweep_gain->parsed()) return cmd_sweep_gain(s, opt_gains);
        if (cells->parsed()) return cmd_cells_curve(s, opt_max_cells, opt_mark_cells);
        if (calibrate->parsed())
            return cmd_calibrate(s, opt_input, opt_output, opt_loss_db, opt_guess);
        if (stability->parsed()) {
            if (!(opt_n_rep_each >= 2.0) || opt_n_rep_each != std::floor(opt_n_rep_each)) {
                throw std::invalid_argument("--n-rep-each must be an integer >= 2");
            }
            return cmd_stability(s, opt_reps, static_cast<std::size_t>(opt_n_rep_each),
                                 opt_hist_bins);
        }
        throw std::invalid_argument("no subcommand selected");
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const io_error& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace twpa::cli
