#ifndef TWPA_CHAIN_HPP
#define TWPA_CHAIN_HPP

#include "twpa/gaussian.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

// Forward model of the heterodyne measurement chain: thermal noise added
// by the amplifiers, volts <-> photon-unit calibration, and seeded
// multivariate Gaussian sampling of pump-on/pump-off acquisitions.

namespace twpa {

/// Detection-chain parameters. Signal sits at f_p + delta, idler at
/// f_p - delta.
struct ChainSpec {
    double g_sys_s = 1e9;   // linear system power gain, signal path
    double g_sys_i = 1e9;   // linear system power gain, idler path
    double n_add_s = 0.0;   // added thermal quanta per mode
    double n_add_i = 0.0;
    double tau = 6e-6;      // acquisition time [s]
    double z = 50.0;        // line impedance [ohm]
    double f_p = 4.415e9;   // pump frequency [Hz]
    double delta = 2e8;     // detuning [Hz]

    void validate() const;

    double f_signal() const { return f_p + delta; }
    double f_idler() const { return f_p - delta; }

    /// Volts^-2 -> dimensionless conversion factor (1/Z)*(tau/(h*f)).
    double gamma_signal() const;
    double gamma_idler() const;
};

/// Added quanta equivalent to a noise temperature: n = kB*T/(h*f).
/// Rayleigh-Jeans convenience approximation for the chain.
double n_add_from_temperature(double t_sys_kelvin, double f_hz);

/// Paired pump-on / pump-off quadrature sample sets, calibrated units.
struct AcquisitionBatch {
    std::vector<std::array<double, 4>> on_samples;   // (x_s, p_s, x_i, p_i)
    std::vector<std::array<double, 4>> off_samples;
    std::uint64_t seed = 0;
    ChainSpec chain;

    std::size_t n_rep() const { return on_samples.size(); }
};

/// Measured covariances through the chain:
///   sigma_on  = state + sigma_thermal + I
///   sigma_off = sigma_thermal + 2*I
/// with sigma_thermal = diag(2*n_add_s, 2*n_add_s, 2*n_add_i, 2*n_add_i).
std::pair<CovMatrix4, CovMatrix4> measured_covariances(const CovMatrix4& state,
                                                       const ChainSpec& chain);

/// Zero-mean Gaussian draws with per-sample covariance sigma/4 for each
/// of the on/off streams (sigma_jk = 4*cov convention). Deterministic in
/// (seed, n_rep, sigma) regardless of internal parallelism; on and off
/// use decorrelated substreams of the one seed.
AcquisitionBatch sample_batch(const CovMatrix4& sigma_on, const CovMatrix4& sigma_off,
                              std::size_t n_rep, std::uint64_t seed,
                              const ChainSpec& chain);

/// Volts -> calibrated units: x = raw * sqrt(gamma) / sqrt(G_sys), with
/// the mode's own frequency and gain.
std::array<double, 4> raw_to_calibrated(const std::array<double, 4>& raw_volts,
                                        const ChainSpec& chain);
std::array<double, 4> calibrated_to_raw(const std::array<double, 4>& calibrated,
                                        const ChainSpec& chain);

// Binary record file: magic "TWPA", version, n_rep, seed, chain fields,
// then the on-block and off-block as little-endian 64-bit floats.
void write_batch_file(const std::string& path, const AcquisitionBatch& batch);
AcquisitionBatch read_batch_file(const std::string& path);

/// CSV export, header row `x_s,p_s,x_i,p_i,pump` (pump 1 = on, 0 = off).
void write_batch_csv(std::ostream& out, const AcquisitionBatch& batch);

}  // namespace twpa

#endif
