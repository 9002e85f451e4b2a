#ifndef TWPA_SNTJ_HPP
#define TWPA_SNTJ_HPP

#include <string>
#include <utility>
#include <vector>

// Shot-noise tunnel junction calibration: noise-vs-bias model, the
// three-parameter (T, T_sys, G_sys) nonlinear least-squares fit, and the
// insertion-loss correction referencing the gain to the device plane.

namespace twpa {

namespace constants {
// 2019 SI exact values.
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double planck = 6.62607015e-34;              // J s
inline constexpr double boltzmann = 1.380649e-23;             // J/K
}  // namespace constants

/// Noise-vs-bias curve at one frequency.
struct SntjDataset {
    double f_hz = 0.0;
    double tau_s = 0.0;
    std::vector<std::pair<double, double>> points;  // (V [volts], N [watts])

    void validate() const;  // >= 7 points, distinct V, positive f and tau
};

struct SntjGuess {
    double t = 0.1;        // electron temperature [K]
    double t_sys = 1.0;    // system noise temperature [K]
    double g_sys = 1e8;    // linear system gain
};

struct SntjFitResult {
    double t = 0.0;
    double t_sys = 0.0;
    double g_sys = 0.0;
    double rss = 0.0;            // residual sum of squares [W^2]
    double stderr_t = 0.0;
    double stderr_t_sys = 0.0;
    double stderr_g_sys = 0.0;
    int iterations = 0;
};

/// Noise power [W] emitted by a biased SNTJ through a chain with gain
/// G_sys and noise temperature T_sys, resolution bandwidth 1/tau. The
/// removable singularities at eV = +/- h f are series-expanded.
double sntj_model(double v_volts, double t, double t_sys, double g_sys, double f_hz,
                  double tau_s);

/// Unweighted least squares by damped Gauss-Newton (G_sys fitted in log
/// space, bounds enforced by projection). Converged when the relative
/// parameter change drops below 1e-10, at most 200 iterations.
SntjFitResult fit_sntj(const SntjDataset& data, const SntjGuess& guess);

/// Device-plane gain: fitted G_sys divided by the insertion loss between
/// the calibration source and the device, so the reported gain is an
/// upper bound at the device plane.
double correct_insertion_loss(const SntjFitResult& fit, double loss_db);

/// CSV input: metadata lines `# f_hz=...` and `# tau_s=...`, a header
/// row `V_volts,N_watts`, then one point per line.
SntjDataset read_sntj_csv(const std::string& path);
void write_sntj_csv(const std::string& path, const SntjDataset& data);

/// JSON fit report, including the corrected device-plane gain.
std::string fit_report_json(const SntjFitResult& fit, const SntjDataset& data,
                            double insertion_loss_db, int indent = 2);

}  // namespace twpa

#endif
