#include "twpa/gaussian.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace twpa {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double reduce_angle(double phi) {
    double out = std::fmod(phi, kTwoPi);
    if (out < 0.0) out += kTwoPi;
    // fmod of a value just below a multiple of 2*pi can round up to 2*pi
    if (out >= kTwoPi) out = 0.0;
    return out;
}

// Standard two-mode symplectic form, block-diagonal J = [[0,1],[-1,0]].
Eigen::Matrix4d symplectic_form() {
    Eigen::Matrix4d omega = Eigen::Matrix4d::Zero();
    omega(0, 1) = 1.0;
    omega(1, 0) = -1.0;
    omega(2, 3) = 1.0;
    omega(3, 2) = -1.0;
    return omega;
}

}  // namespace

SqueezeSpec::SqueezeSpec(double r, double phi) : r_(r), phi_(reduce_angle(phi)) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
        throw std::invalid_argument("SqueezeSpec: squeezing amplitude r must be >= 0, got " +
                                    std::to_string(r));
    }
    if (!std::isfinite(phi)) {
        throw std::invalid_argument("SqueezeSpec: phase must be finite");
    }
}

LossModel::LossModel(double eta_s, double eta_i) : eta_s_(eta_s), eta_i_(eta_i) {
    auto check = [](double eta, const char* name) {
        if (!(eta >= 0.0 && eta <= 1.0)) {
            throw std::invalid_argument(std::string("LossModel: ") + name +
                                        " must lie in [0,1], got " + std::to_string(eta));
        }
    };
    check(eta_s, "eta_s");
    check(eta_i, "eta_i");
}

LossModel LossModel::from_average_loss(double eps_bar) {
    if (!(eps_bar >= 0.0 && eps_bar <= 1.0)) {
        throw std::invalid_argument("LossModel: eps_bar must lie in [0,1], got " +
                                    std::to_string(eps_bar));
    }
    return LossModel(1.0 - eps_bar, 1.0 - eps_bar);
}

double LossModel::epsilon_bar() const { return 1.0 - 0.5 * (eta_s_ + eta_i_); }

double LossModel::delta() const {
    const double eps = epsilon_bar();
    if (eps == 0.0) return 0.0;
    return (eta_i_ - eta_s_) / (2.0 * eps);
}

CovMatrix4::CovMatrix4(const Eigen::Matrix4d& m) {
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (!(asym <= 1e-12)) {
        throw std::invalid_argument("CovMatrix4: matrix is not symmetric (max asymmetry " +
                                    std::to_string(asym) + ")");
    }
    if (!m.allFinite()) {
        throw std::invalid_argument("CovMatrix4: matrix has non-finite entries");
    }
    m_ = 0.5 * (m + m.transpose());
}

CovMatrix4 CovMatrix4::identity() { return CovMatrix4(Eigen::Matrix4d::Identity()); }

double CovMatrix4::physicality_eigenvalue() const {
    Eigen::Matrix4cd h = m_.cast<std::complex<double>>();
    h += std::complex<double>(0.0, 1.0) * symplectic_form().cast<std::complex<double>>();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> solver(h);
    return solver.eigenvalues().minCoeff();
}

std::array<double, 16> CovMatrix4::values_row_major() const {
    std::array<double, 16> out{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) out[static_cast<size_t>(4 * i + j)] = m_(i, j);
    return out;
}

CovMatrix4 CovMatrix4::from_values_row_major(const std::array<double, 16>& v) {
    Eigen::Matrix4d m;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) m(i, j) = v[static_cast<size_t>(4 * i + j)];
    return CovMatrix4(m);
}

std::string CovMatrix4::to_csv() const {
    const auto v = values_row_major();
    std::string out;
    char buf[40];
    for (size_t k = 0; k < v.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", v[k]);
        if (k) out += ',';
        out += buf;
    }
    return out;
}

CovMatrix4 CovMatrix4::from_csv(const std::string& line) {
    std::array<double, 16> v{};
    std::stringstream ss(line);
    std::string tok;
    size_t k = 0;
    while (std::getline(ss, tok, ',')) {
        if (k >= 16) throw std::invalid_argument("CovMatrix4::from_csv: more than 16 values");
        v[k++] = std::stod(tok);
    }
    if (k != 16) {
        throw std::invalid_argument("CovMatrix4::from_csv: expected 16 values, got " +
                                    std::to_string(k));
    }
    return from_values_row_major(v);
}

double gain_to_r(double gain) {
    if (!(gain >= 1.0)) {
        throw std::domain_error("gain_to_r: linear power gain must be >= 1, got " +
                                std::to_string(gain));
    }
    return std::acosh(std::sqrt(gain));
}

double r_to_gain(double r) {
    const double c = std::cosh(r);
    return c * c;
}

CovMatrix4 tms_covariance(const SqueezeSpec& sq, const LossModel& loss) {
    const double c2 = std::cosh(2.0 * sq.r());
    const double s2 = std::sinh(2.0 * sq.r());
    const double eta_s = loss.eta_s();
    const double eta_i = loss.eta_i();
    const double diag_s = eta_s * c2 + (1.0 - eta_s);
    const double diag_i = eta_i * c2 + (1.0 - eta_i);
    const double g = std::sqrt(eta_s * eta_i) * s2;
    const double gc = g * std::cos(sq.phi());
    const double gs = g * std::sin(sq.phi());

    Eigen::Matrix4d m;
    m << diag_s, 0.0, gc, gs,
         0.0, diag_s, gs, -gc,
         gc, gs, diag_i, 0.0,
         gs, -gc, 0.0, diag_i;
    return CovMatrix4(m);
}

CovMatrix4 partial_transpose(const CovMatrix4& sigma) {
    Eigen::Matrix4d m = sigma.m();
    for (int k = 0; k < 4; ++k) {
        if (k == 3) continue;
        m(3, k) = -m(3, k);
        m(k, 3) = -m(k, 3);
    }
    return CovMatrix4(m);
}

double symplectic_nu_minus(const CovMatrix4& sigma) {
    const Eigen::Matrix4d& m = sigma.m();
    const double det_a = m.block<2, 2>(0, 0).determinant();
    const double det_b = m.block<2, 2>(2, 2).determinant();
    const double det_c = m.block<2, 2>(0, 2).determinant();
    const double det_sigma = m.determinant();

    const double delta = det_a + det_b + 2.0 * det_c;
    double disc = delta * delta - 4.0 * det_sigma;
    if (disc < 0.0) {
        // pure states sit exactly on disc = 0; absorb floating-point noise
        const double tol = 1e-9 * std::max(1.0, delta * delta);
        if (disc >= -tol) {
            disc = 0.0;
        } else {
            throw std::domain_error(
                "symplectic_nu_minus: negative discriminant beyond tolerance (" +
                std::to_string(disc) + ")");
        }
    }
    // (delta - sqrt(disc))/2 suffers cancellation when nu_minus is small;
    // the equivalent 2*det/(delta + sqrt(disc)) does not.
    const double denom = delta + std::sqrt(disc);
    double nu_sq = denom > 0.0 ? 2.0 * det_sigma / denom : 0.5 * delta;
    if (nu_sq < 0.0) {
        if (nu_sq >= -1e-12 * std::max(1.0, std::abs(delta))) {
            nu_sq = 0.0;
        } else {
            throw std::domain_error("symplectic_nu_minus: negative nu^2, input is not a "
                                    "valid covariance matrix");
        }
    }
    return std::sqrt(nu_sq);
}

double log_negativity(const CovMatrix4& sigma) {
    const double nu = symplectic_nu_minus(partial_transpose(sigma));
    if (nu <= 0.0) return std::numeric_limits<double>::infinity();
    const double en = -std::log(nu);
    return en > 0.0 ? en : 0.0;
}

double log_negativity_closed_form(const SqueezeSpec& sq, const LossModel& loss) {
    const double e2r = std::exp(-2.0 * sq.r());
    const double eps = loss.epsilon_bar();
    const double d = loss.delta();
    const double arg = e2r + (1.0 - e2r) * eps + std::tanh(sq.r()) * eps * eps * d * d;
    const double en = -std::log(arg);
    return en > 0.0 ? en : 0.0;
}

CollectiveVariances collective_variances(const CovMatrix4& sigma) {
    const Eigen::Matrix4d& m = sigma.m();
    CollectiveVariances v{};
    v.x_plus = (m(0, 0) + m(2, 2) + 2.0 * m(0, 2)) / 4.0;
    v.x_minus = (m(0, 0) + m(2, 2) - 2.0 * m(0, 2)) / 4.0;
    v.p_plus = (m(1, 1) + m(3, 3) + 2.0 * m(1, 3)) / 4.0;
    v.p_minus = (m(1, 1) + m(3, 3) - 2.0 * m(1, 3)) / 4.0;
    return v;
}

double squeezing_db(double variance) {
    if (!(variance > 0.0)) {
        throw std::domain_error("squeezing_db: variance must be > 0, got " +
                                std::to_string(variance));
    }
    return 10.0 * std::log10(variance / 0.5);
}

double entropy_formation(double log_negativity) {
    if (!(log_negativity >= 0.0)) {
        throw std::domain_error("entropy_formation: log negativity must be >= 0, got " +
                                std::to_string(log_negativity));
    }
    if (log_negativity == 0.0) return 0.0;
    const double d = std::exp2(log_negativity);
    const double sd = std::sqrt(d);
    const double cp = (1.0 / sd + sd) * (1.0 / sd + sd) / 4.0;
    const double cm = (1.0 / sd - sd) * (1.0 / sd - sd) / 4.0;
    const double term_m = cm > 0.0 ? cm * std::log2(cm) : 0.0;  // 0*log2(0) = 0
    return cp * std::log2(cp) - term_m;
}

double ebit_rate(double entropy_formation, double bandwidth_hz) {
    if (!(bandwidth_hz >= 0.0)) {
        throw std::domain_error("ebit_rate: bandwidth must be >= 0");
    }
    return entropy_formation * bandwidth_hz;
}

LossModel loss_from_cells(int n_cells, double eps_cell) {
    if (n_cells < 0) {
        throw std::invalid_argument("loss_from_cells: n_cells must be >= 0");
    }
    if (!(eps_cell >= 0.0 && eps_cell < 1.0)) {
        throw std::invalid_argument("loss_from_cells: eps_cell must lie in [0,1), got " +
                                    std::to_string(eps_cell));
    }
    const double eta = std::pow(1.0 - eps_cell, n_cells);
    return LossModel(eta, eta);
}

EntanglementReport analyze_state(const CovMatrix4& sigma) {
    EntanglementReport rep{};
    rep.nu_minus = symplectic_nu_minus(partial_transpose(sigma));
    if (rep.nu_minus > 0.0) {
        const double en = -std::log(rep.nu_minus);
        rep.log_negativity = en > 0.0 ? en : 0.0;
    } else {
        rep.log_negativity = std::numeric_limits<double>::infinity();
    }
    rep.entropy_formation = entropy_formation(rep.log_negativity);
    const CollectiveVariances v = collective_variances(sigma);
    rep.var_x_plus = v.x_plus;
    rep.var_p_plus = v.p_plus;
    rep.var_x_minus = v.x_minus;
    rep.var_p_minus = v.p_minus;
    rep.sq_plus_db = squeezing_db(v.x_plus);
    rep.squeezing_db_best = std::min({squeezing_db(v.x_plus), squeezing_db(v.p_plus),
                                      squeezing_db(v.x_minus), squeezing_db(v.p_minus)});
    return rep;
}

}  // namespace twpa
