#include "twpa/sntj.hpp"

#include "twpa/errors.hpp"

#include <json.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace twpa {

namespace {

using constants::boltzmann;
using constants::elementary_charge;
using constants::planck;

// u * coth(u / t), continued through u = 0 with its Taylor series.
double u_coth(double u, double t) {
    const double x = u / t;
    if (std::abs(x) < 1e-6) {
        return t + u * u / (3.0 * t);
    }
    return u / std::tanh(x);
}

// d/dt of u * coth(u / t) = (u/t)^2 * csch^2(u/t), with the u -> 0
// series and the |u/t| -> inf underflow handled explicitly.
double u_coth_dt(double u, double t) {
    const double x = u / t;
    if (std::abs(x) < 1e-6) {
        return 1.0 - x * x / 3.0;
    }
    const double s = std::sinh(x);
    if (std::isinf(s)) return 0.0;
    return (x / s) * (x / s);
}

// Fit parameters: p = (T, T_sys, log10(G_sys)).
struct FitParams {
    double t;
    double t_sys;
    double log_g;

    Eigen::Vector3d vec() const { return {t, t_sys, log_g}; }
    static FitParams from_vec(const Eigen::Vector3d& v) { return {v(0), v(1), v(2)}; }

    void project_bounds() {
        t = std::max(t, 1e-6);
        t_sys = std::max(t_sys, 0.0);
        log_g = std::max(log_g, 0.0);  // G_sys >= 1
    }
};

// Clamp the step componentwise. The T direction is nearly flat while the
// gain is still wrong, and an unchecked Gauss-Newton step along it can
// throw T onto its bound where coth saturates and the gradient dies.
// The rss acceptance test below keeps the clamped direction honest.
Eigen::Vector3d cap_step(const Eigen::Vector3d& step, const FitParams& p) {
    Eigen::Vector3d capped = step;
    const double t_cap = 0.5 * std::max(p.t, 0.01);
    const double t_sys_cap = 0.5 * std::max(p.t_sys, 1.0);
    const double log_g_cap = 1.0;  // one decade of gain per iteration
    capped(0) = std::clamp(capped(0), -t_cap, t_cap);
    capped(1) = std::clamp(capped(1), -t_sys_cap, t_sys_cap);
    capped(2) = std::clamp(capped(2), -log_g_cap, log_g_cap);
    return capped;
}

double model_p(const FitParams& p, double v, double f, double tau) {
    return sntj_model(v, p.t, p.t_sys, std::pow(10.0, p.log_g), f, tau);
}

double rss_of(const FitParams& p, const SntjDataset& d) {
    double acc = 0.0;
    for (const auto& [v, n] : d.points) {
        const double r = model_p(p, v, d.f_hz, d.tau_s) - n;
        acc += r * r;
    }
    return acc;
}

}  // namespace

void SntjDataset::validate() const {
    if (!(f_hz > 0.0)) throw std::invalid_argument("SntjDataset: f_hz must be > 0");
    if (!(tau_s > 0.0)) throw std::invalid_argument("SntjDataset: tau_s must be > 0");
    if (points.size() < 7) {
        throw std::invalid_argument("SntjDataset: need at least 7 points, got " +
                                    std::to_string(points.size()));
    }
    std::set<double> vs;
    for (const auto& [v, n] : points) {
        if (!std::isfinite(v) || !std::isfinite(n)) {
            throw std::invalid_argument("SntjDataset: non-finite point");
        }
        if (!vs.insert(v).second) {
            throw std::invalid_argument("SntjDataset: duplicate bias voltage " +
                                        std::to_string(v));
        }
    }
}

double sntj_model(double v_volts, double t, double t_sys, double g_sys, double f_hz,
                  double tau_s) {
    if (!(t > 0.0)) throw std::domain_error("sntj_model: T must be > 0");
    if (!(f_hz > 0.0)) throw std::domain_error("sntj_model: f must be > 0");
    if (!(tau_s > 0.0)) throw std::domain_error("sntj_model: tau must be > 0");
    const double u_plus = (elementary_charge * v_volts + planck * f_hz) / (2.0 * boltzmann);
    const double u_minus = (elementary_charge * v_volts - planck * f_hz) / (2.0 * boltzmann);
    const double bracket = 0.5 * (u_coth(u_plus, t) + u_coth(u_minus, t)) + t_sys;
    return bracket * g_sys * boltzmann / tau_s;
}

SntjFitResult fit_sntj(const SntjDataset& data, const SntjGuess& guess) {
    data.validate();
    if (!(guess.t > 0.0) || !(guess.t_sys >= 0.0) || !(guess.g_sys >= 1.0)) {
        throw std::invalid_argument("fit_sntj: initial guess outside physical bounds");
    }
    const std::size_t m = data.points.size();

    FitParams p{guess.t, guess.t_sys, std::log10(guess.g_sys)};
    p.project_bounds();
    double rss = rss_of(p, data);

    double damping = 1e-3;
    int iter = 0;
    bool converged = false;
    Eigen::Matrix3d normal_last = Eigen::Matrix3d::Zero();

    for (; iter < 200; ++iter) {
        // residuals and analytic Jacobian in (T, T_sys, log10 G)
        Eigen::VectorXd res(m);
        Eigen::MatrixXd jac(m, 3);
        const double gain = std::pow(10.0, p.log_g);
        const double scale = gain * boltzmann / data.tau_s;
        const Eigen::Vector3d pv = p.vec();
        for (std::size_t i = 0; i < m; ++i) {
            const auto& [v, n] = data.points[i];
            const double u_plus =
                (elementary_charge * v + planck * data.f_hz) / (2.0 * boltzmann);
            const double u_minus =
                (elementary_charge * v - planck * data.f_hz) / (2.0 * boltzmann);
            const double model =
                (0.5 * (u_coth(u_plus, p.t) + u_coth(u_minus, p.t)) + p.t_sys) * scale;
            const auto idx = static_cast<Eigen::Index>(i);
            res(idx) = model - n;
            jac(idx, 0) = 0.5 * (u_coth_dt(u_plus, p.t) + u_coth_dt(u_minus, p.t)) * scale;
            jac(idx, 1) = scale;
            jac(idx, 2) = model * std::log(10.0);
        }

        const Eigen::Matrix3d normal = jac.transpose() * jac;
        const Eigen::Vector3d grad = jac.transpose() * res;
        normal_last = normal;
        if (!normal.allFinite()) {
            throw std::runtime_error("fit_sntj: Jacobian is not finite, try a better guess");
        }

        bool stepped = false;
        for (int attempt = 0; attempt < 25; ++attempt) {
            Eigen::Matrix3d damped = normal;
            damped.diagonal() += damping * normal.diagonal();
            const Eigen::LDLT<Eigen::Matrix3d> ldlt(damped);
            if (ldlt.info() != Eigen::Success) {
                damping *= 10.0;
                continue;
            }
            const Eigen::Vector3d step = ldlt.solve(-grad);
            if (!step.allFinite()) {
                throw std::runtime_error(
                    "fit_sntj: singular normal equations, try a better guess");
            }
            FitParams trial = FitParams::from_vec(pv + cap_step(step, p));
            trial.project_bounds();
            const double trial_rss = rss_of(trial, data);
            if (trial_rss <= rss) {
                const double rel_change =
                    (trial.vec() - pv).norm() / std::max(pv.norm(), 1e-12);
                const double improvement = rss - trial_rss;
                p = trial;
                rss = trial_rss;
                damping = std::max(damping / 10.0, 1e-15);
                stepped = true;
                // done when the parameters settle, or when the remaining
                // motion only chases the numerical noise floor of the rss
                if (rel_change < 1e-10) converged = true;
                if (improvement <= 1e-11 * std::max(rss, 1e-300)) converged = true;
                break;
            }
            damping *= 10.0;
        }
        if (converged) break;
        if (!stepped) {
            // progress stalled; accept if the surface is flat enough
            if (grad.norm() <= 1e-8 * std::max(1.0, rss)) {
                converged = true;
                break;
            }
            throw std::runtime_error(
                "fit_sntj: no converging step found (last rss " + std::to_string(rss) +
                ", T=" + std::to_string(p.t) + ", T_sys=" + std::to_string(p.t_sys) +
                ", G_sys=" + std::to_string(std::pow(10.0, p.log_g)) + ")");
        }
    }
    if (!converged) {
        throw std::runtime_error("fit_sntj: did not converge in 200 iterations (last rss " +
                                 std::to_string(rss) + ")");
    }

    SntjFitResult out;
    out.t = p.t;
    out.t_sys = p.t_sys;
    out.g_sys = std::pow(10.0, p.log_g);
    out.rss = rss;
    out.iterations = iter + 1;

    // parameter errors from the residual-scaled inverse normal matrix
    if (m > 3) {
        const double s2 = rss / static_cast<double>(m - 3);
        const Eigen::Matrix3d cov =
            s2 * normal_last.completeOrthogonalDecomposition().pseudoInverse();
        out.stderr_t = std::sqrt(std::max(cov(0, 0), 0.0));
        out.stderr_t_sys = std::sqrt(std::max(cov(1, 1), 0.0));
        // log10(G) error to linear gain error
        out.stderr_g_sys =
            out.g_sys * std::log(10.0) * std::sqrt(std::max(cov(2, 2), 0.0));
    }
    return out;
}

double correct_insertion_loss(const SntjFitResult& fit, double loss_db) {
    if (!(loss_db >= 0.0)) {
        throw std::invalid_argument("correct_insertion_loss: loss_db must be >= 0");
    }
    return fit.g_sys / std::pow(10.0, loss_db / 10.0);
}

SntjDataset read_sntj_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("read_sntj_csv: cannot open " + path);
    SntjDataset data;
    bool have_f = false, have_tau = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::string body = line.substr(1);
            const auto eq = body.find('=');
            if (eq == std::string::npos) continue;
            std::string key = body.substr(0, eq);
            key.erase(0, key.find_first_not_of(" \t"));
            key.erase(key.find_last_not_of(" \t") + 1);
            const std::string value = body.substr(eq + 1);
            if (key == "f_hz") {
                data.f_hz = std::stod(value);
                have_f = true;
            } else if (key == "tau_s") {
                data.tau_s = std::stod(value);
                have_tau = true;
            }
            continue;
        }
        if (line.rfind("V_volts", 0) == 0) continue;  // header row
        std::stringstream ss(line);
        std::string v_tok, n_tok;
        if (!std::getline(ss, v_tok, ',') || !std::getline(ss, n_tok, ',')) {
            throw io_error("read_sntj_csv: malformed data at " + path + ":" +
                                     std::to_string(lineno));
        }
        try {
            data.points.emplace_back(std::stod(v_tok), std::stod(n_tok));
        } catch (const std::exception&) {
            throw io_error("read_sntj_csv: bad number at " + path + ":" +
                                     std::to_string(lineno));
        }
    }
    if (!have_f) {
        throw io_error("read_sntj_csv: missing `# f_hz=` metadata line in " + path);
    }
    if (!have_tau) {
        throw io_error("read_sntj_csv: missing `# tau_s=` metadata line in " + path);
    }
    data.validate();
    return data;
}

void write_sntj_csv(const std::string& path, const SntjDataset& data) {
    std::ofstream out(path);
    if (!out) throw io_error("write_sntj_csv: cannot open " + path);
    char buf[96];
    std::snprintf(buf, sizeof(buf), "# f_hz=%.17g\n# tau_s=%.17g\n", data.f_hz, data.tau_s);
    out << buf << "V_volts,N_watts\n";
    for (const auto& [v, n] : data.points) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", v, n);
        out << buf;
    }
    if (!out) throw io_error("write_sntj_csv: write failed for " + path);
}

std::string fit_report_json(const SntjFitResult& fit, const SntjDataset& data,
                            double insertion_loss_db, int indent) {
    nlohmann::ordered_json j;
    j["f_hz"] = data.f_hz;
    j["tau_s"] = data.tau_s;
    j["n_points"] = data.points.size();
    j["t_kelvin"] = fit.t;
    j["t_sys_kelvin"] = fit.t_sys;
    j["g_sys"] = fit.g_sys;
    j["g_sys_db"] = 10.0 * std::log10(fit.g_sys);
    j["stderr_t_kelvin"] = fit.stderr_t;
    j["stderr_t_sys_kelvin"] = fit.stderr_t_sys;
    j["stderr_g_sys"] = fit.stderr_g_sys;
    j["rss_watts_sq"] = fit.rss;
    j["iterations"] = fit.iterations;
    j["insertion_loss_db"] = insertion_loss_db;
    j["g_sys_device_plane"] = correct_insertion_loss(fit, insertion_loss_db);
    return j.dump(indent);
}

}  // namespace twpa
