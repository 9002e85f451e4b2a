#ifndef TWPA_ESTIMATOR_HPP
#define TWPA_ESTIMATOR_HPP

#include "twpa/chain.hpp"
#include "twpa/gaussian.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

// Covariance-matrix reconstruction from sampled quadrature data:
// pump-on/off subtraction, batch-means uncertainties, differential
// histograms and repeated-experiment stability analysis.

namespace twpa {

/// Reconstructed state with per-entry standard errors.
struct CovEstimate {
    CovMatrix4 sigma = CovMatrix4::identity();      // on - off + I
    CovMatrix4 sigma_on = CovMatrix4::identity();
    CovMatrix4 sigma_off = CovMatrix4::identity();
    Eigen::Matrix4d stderr_entries = Eigen::Matrix4d::Zero();
    std::size_t n_rep = 0;
    int n_batches = 0;
    /// Per-block reconstructed sigmas (batch-means internals), kept for
    /// metric error propagation.
    std::vector<Eigen::Matrix4d> block_sigmas;
};

/// Sample covariance (divisor n-1, scaled by 4), on/off subtraction, and
/// batch-means standard errors over n_batches contiguous blocks.
CovEstimate estimate_covariance(const AcquisitionBatch& batch, int n_batches);

/// Signed 2D histogram: pump-on counts minus pump-off counts on a
/// uniform grid over [-range, range]^2.
struct DiffHistogram2D {
    std::string axis_a;   // quadrature name of the first axis
    std::string axis_b;
    int axis_a_index = 0; // component index into the 4-vector
    int axis_b_index = 0;
    int bins = 0;
    double range = 0.0;
    std::vector<std::int64_t> signed_counts;  // bins x bins, row-major in a
    std::int64_t in_range_on = 0;
    std::int64_t in_range_off = 0;
    std::int64_t overflow_on = 0;   // samples with either coordinate outside
    std::int64_t overflow_off = 0;

    double bin_width() const { return 2.0 * range / bins; }
    double center(int i) const { return -range + (i + 0.5) * bin_width(); }
    std::int64_t at(int ia, int ib) const {
        return signed_counts[static_cast<std::size_t>(ia) * bins + ib];
    }
    std::int64_t total_signed() const;
};

/// The six quadrature-pair histograms:
/// (x_s,p_s) (x_i,p_i) (x_s,x_i) (p_s,p_i) (x_s,p_i) (p_s,x_i).
std::array<DiffHistogram2D, 6> diff_histograms(const AcquisitionBatch& batch, int bins,
                                               double range);

/// CSV grid: comment block, then `<axis_a>,<axis_b>,signed_count` rows.
void write_histogram_csv(std::ostream& out, const DiffHistogram2D& hist);

/// Point metrics of a CovEstimate plus batch-resampled uncertainties.
struct EstimatedMetrics {
    EntanglementReport report;
    double log_negativity_unclipped = 0.0;  // -ln(nu_minus), diagnostics
    double e_n_stderr = 0.0;
    double sq_plus_db_stderr = 0.0;
};

EstimatedMetrics report_metrics(const CovEstimate& est);

/// Repeated-experiment study of the spread of E_N.
struct StabilityReport {
    std::vector<double> e_n_values;
    double mean = 0.0;
    double stddev = 0.0;
    // histogram of e_n_values
    double hist_lo = 0.0;
    double hist_hi = 0.0;
    std::vector<std::int64_t> hist_counts;
};

/// Runs `reps` independent simulated experiments (sub-seeded from `seed`)
/// of n_rep_each on/off acquisitions through `chain` and reports the
/// distribution of the reconstructed E_N.
StabilityReport stability_study(const CovMatrix4& state, const ChainSpec& chain, int reps,
                                std::size_t n_rep_each, std::uint64_t seed,
                                int hist_bins = 15);

void write_stability_csv(std::ostream& out, const StabilityReport& report);

// JSON serialization (stable field order).
std::string to_json(const CovEstimate& est, int indent = 2);
std::string to_json(const EstimatedMetrics& metrics, int indent = 2);
std::string to_json(const StabilityReport& report, int indent = 2);

}  // namespace twpa

#endif
