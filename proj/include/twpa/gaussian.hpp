#ifndef TWPA_GAUSSIAN_HPP
#define TWPA_GAUSSIAN_HPP

#include <Eigen/Dense>

#include <array>
#include <string>

// Exact Gaussian-state algebra for a two-mode squeezed source with
// beam-splitter loss: covariance-matrix construction plus the
// entanglement and squeezing figures of merit derived from it.
//
// Conventions: mode ordering (x_s, p_s, x_i, p_i), covariance matrix
// normalized so the two-mode vacuum is the 4x4 identity (per-quadrature
// vacuum variance 1/4).

namespace twpa {

/// Squeezing parameter xi = r * exp(i*phi).
class SqueezeSpec {
  public:
    SqueezeSpec(double r, double phi);

    double r() const { return r_; }
    /// Phase in radians, reduced to [0, 2*pi).
    double phi() const { return phi_; }

  private:
    double r_;
    double phi_;
};

/// Per-mode beam-splitter transmissions eta_s, eta_i in [0, 1].
class LossModel {
  public:
    LossModel(double eta_s, double eta_i);

    /// Symmetric loss: eta_s = eta_i = 1 - eps_bar.
    static LossModel from_average_loss(double eps_bar);
    static LossModel lossless() { return LossModel(1.0, 1.0); }

    double eta_s() const { return eta_s_; }
    double eta_i() const { return eta_i_; }

    /// Average loss 1 - (eta_s + eta_i)/2.
    double epsilon_bar() const;
    /// Loss asymmetry (eta_i - eta_s)/(2*eps_bar); 0 for the lossless
    /// degenerate case eps_bar = 0.
    double delta() const;

  private:
    double eta_s_;
    double eta_i_;
};

/// Real symmetric 4x4 covariance matrix over (x_s, p_s, x_i, p_i).
class CovMatrix4 {
  public:
    /// Requires max|m - m^T| <= 1e-12; stores the symmetrized matrix.
    explicit CovMatrix4(const Eigen::Matrix4d& m);

    static CovMatrix4 identity();

    const Eigen::Matrix4d& m() const { return m_; }
    double operator()(int i, int j) const { return m_(i, j); }

    /// Smallest eigenvalue of the Hermitian matrix sigma + i*Omega.
    /// Physical states satisfy >= 0 (up to numerical tolerance).
    double physicality_eigenvalue() const;
    bool is_physical(double tol = 1e-9) const {
        return physicality_eigenvalue() >= -tol;
    }

    std::array<double, 16> values_row_major() const;
    static CovMatrix4 from_values_row_major(const std::array<double, 16>& v);

    /// One line, 16 comma-separated values, 17 significant digits.
    std::string to_csv() const;
    static CovMatrix4 from_csv(const std::string& line);

  private:
    Eigen::Matrix4d m_;
};

struct CollectiveVariances {
    double x_plus;
    double p_plus;
    double x_minus;
    double p_minus;
};

/// Figures of merit for one two-mode state.
struct EntanglementReport {
    double nu_minus;            // min symplectic eigenvalue of the PT state
    double log_negativity;      // max(-ln(nu_minus), 0)
    double entropy_formation;   // ebits
    double var_x_plus;
    double var_p_plus;
    double var_x_minus;
    double var_p_minus;
    double sq_plus_db;          // headline squeezing 10*log10(var_x_plus/0.5)
    double squeezing_db_best;   // min over the four collective variances
};

/// r = arcosh(sqrt(G)) for linear power gain G >= 1.
double gain_to_r(double gain);
/// G = cosh^2(r).
double r_to_gain(double r);

/// Lossy two-mode squeezed covariance matrix (beam-splitter loss model).
CovMatrix4 tms_covariance(const SqueezeSpec& sq, const LossModel& loss);

/// Momentum-sign flip on the idler mode; involution.
CovMatrix4 partial_transpose(const CovMatrix4& sigma);

/// Minimum symplectic eigenvalue of sigma. Applied to the partial
/// transpose this is the PPT statistic: entangled iff nu_minus < 1.
double symplectic_nu_minus(const CovMatrix4& sigma);

/// E_N = max(-ln(nu_minus(partial_transpose(sigma))), 0).
double log_negativity(const CovMatrix4& sigma);

/// Closed-form lossy E_N in terms of (r, eps_bar, delta). Exact for
/// symmetric loss; an approximation for asymmetric loss (see tests for
/// the measured agreement region).
double log_negativity_closed_form(const SqueezeSpec& sq, const LossModel& loss);

/// Variances of x_s +/- x_i and p_s +/- p_i; vacuum gives 1/2 each.
CollectiveVariances collective_variances(const CovMatrix4& sigma);

/// 10*log10(variance/0.5); negative means squeezed below vacuum.
double squeezing_db(double variance);

/// Entropy of formation in ebits from the logarithmic negativity.
double entropy_formation(double log_negativity);

/// Entangled-bit rate = bandwidth * E_F.
double ebit_rate(double entropy_formation, double bandwidth_hz);

/// Symmetric loss after n unit cells: eta = (1 - eps_cell)^n.
LossModel loss_from_cells(int n_cells, double eps_cell);

/// All figures of merit for one state.
EntanglementReport analyze_state(const CovMatrix4& sigma);

}  // namespace twpa

#endif
