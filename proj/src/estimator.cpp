#include "twpa/estimator.hpp"

#include "twpa/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace twpa {

namespace {

using Sample = std::array<double, 4>;
using ordered_json = nlohmann::ordered_json;

constexpr std::size_t kPairwiseLeaf = 256;

// Sums of products (a_j - mu_j)(a_k - mu_k) for the 10 unique (j,k)
// pairs, accumulated with fixed-tree pairwise summation so results do
// not depend on how the work is split.
struct MomentSums {
    std::array<double, 10> m{};
    MomentSums& operator+=(const MomentSums& o) {
        for (std::size_t i = 0; i < m.size(); ++i) m[i] += o.m[i];
        return *this;
    }
};

constexpr std::array<std::pair<int, int>, 10> kMomentPairs = {{
    {0, 0}, {0, 1}, {0, 2}, {0, 3}, {1, 1}, {1, 2}, {1, 3}, {2, 2}, {2, 3}, {3, 3},
}};

std::array<double, 4> pairwise_mean_sums(const std::vector<Sample>& data, std::size_t lo,
                                         std::size_t hi) {
    if (hi - lo <= kPairwiseLeaf) {
        std::array<double, 4> s{};
        for (std::size_t k = lo; k < hi; ++k)
            for (int j = 0; j < 4; ++j) s[static_cast<size_t>(j)] += data[k][static_cast<size_t>(j)];
        return s;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    auto a = pairwise_mean_sums(data, lo, mid);
    const auto b = pairwise_mean_sums(data, mid, hi);
    for (int j = 0; j < 4; ++j) a[static_cast<size_t>(j)] += b[static_cast<size_t>(j)];
    return a;
}

MomentSums pairwise_moments(const std::vector<Sample>& data, std::size_t lo, std::size_t hi,
                            const std::array<double, 4>& mu) {
    if (hi - lo <= kPairwiseLeaf) {
        MomentSums s;
        for (std::size_t k = lo; k < hi; ++k) {
            Sample d;
            for (int j = 0; j < 4; ++j)
                d[static_cast<size_t>(j)] = data[k][static_cast<size_t>(j)] - mu[static_cast<size_t>(j)];
            for (std::size_t p = 0; p < kMomentPairs.size(); ++p) {
                s.m[p] += d[static_cast<size_t>(kMomentPairs[p].first)] *
                          d[static_cast<size_t>(kMomentPairs[p].second)];
            }
        }
        return s;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    MomentSums a = pairwise_moments(data, lo, mid, mu);
    a += pairwise_moments(data, mid, hi, mu);
    return a;
}

// sigma_jk = 4 * unbiased sample covariance over data[lo, hi).
Eigen::Matrix4d scaled_sample_cov(const std::vector<Sample>& data, std::size_t lo,
                                  std::size_t hi) {
    const std::size_t n = hi - lo;
    auto mu = pairwise_mean_sums(data, lo, hi);
    for (auto& v : mu) v /= static_cast<double>(n);
    const MomentSums s = pairwise_moments(data, lo, hi, mu);
    Eigen::Matrix4d out;
    for (std::size_t p = 0; p < kMomentPairs.size(); ++p) {
        const auto [j, k] = kMomentPairs[p];
        const double cov = s.m[p] / static_cast<double>(n - 1);
        out(j, k) = 4.0 * cov;
        out(k, j) = 4.0 * cov;
    }
    return out;
}

void check_finite(const std::vector<Sample>& data, const char* stream) {
    for (std::size_t k = 0; k < data.size(); ++k) {
        for (int j = 0; j < 4; ++j) {
            if (!std::isfinite(data[k][static_cast<size_t>(j)])) {
                throw std::invalid_argument(
                    std::string("estimate_covariance: non-finite value in ") + stream +
                    " record " + std::to_string(k));
            }
        }
    }
}

double sample_std(const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

// Block estimates at small sample counts can fluctuate outside the
// physical domain (det of the partially transposed sigma below zero),
// where the strict nu_minus is undefined. For the batch-means error
// machinery we continue it through the boundary with the modulus of the
// symplectic spectrum, which stays finite and hands back the strict
// value on the physical side.
double block_log_negativity(const Eigen::Matrix4d& sigma) {
    const double det_a = sigma.block<2, 2>(0, 0).determinant();
    const double det_b = sigma.block<2, 2>(2, 2).determinant();
    const double det_c = sigma.block<2, 2>(0, 2).determinant();
    const double det_sigma = sigma.determinant();
    const double delta = det_a + det_b - 2.0 * det_c;  // PT folded in
    const double disc = std::max(delta * delta - 4.0 * det_sigma, 0.0);
    const double denom = delta + std::sqrt(disc);
    double nu_sq;
    if (denom > 0.0) {
        nu_sq = 2.0 * det_sigma / denom;
    } else {
        nu_sq = 0.5 * (delta - std::sqrt(disc));
    }
    const double nu = std::sqrt(std::max(std::abs(nu_sq), 1e-300));
    return std::max(-std::log(nu), 0.0);
}

double block_sq_plus_db(const Eigen::Matrix4d& sigma) {
    const double var = (sigma(0, 0) + sigma(2, 2) + 2.0 * sigma(0, 2)) / 4.0;
    return 10.0 * std::log10(std::max(var, 1e-300) / 0.5);
}

constexpr std::array<const char*, 4> kQuadNames = {"x_s", "p_s", "x_i", "p_i"};
constexpr std::array<std::pair<int, int>, 6> kHistPairs = {{
    {0, 1}, {2, 3}, {0, 2}, {1, 3}, {0, 3}, {1, 2},
}};

ordered_json matrix_json(const Eigen::Matrix4d& m) {
    ordered_json arr = ordered_json::array();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) arr.push_back(m(i, j));
    return arr;
}

}  // namespace

CovEstimate estimate_covariance(const AcquisitionBatch& batch, int n_batches) {
    const std::size_t n = batch.n_rep();
    if (n < 2) throw std::invalid_argument("estimate_covariance: need n_rep >= 2");
    if (batch.off_samples.size() != n) {
        throw std::invalid_argument("estimate_covariance: on/off sample counts differ");
    }
    if (n_batches < 2 || static_cast<std::size_t>(n_batches) > n) {
        throw std::invalid_argument(
            "estimate_covariance: n_batches must lie in [2, n_rep], got " +
            std::to_string(n_batches));
    }
    check_finite(batch.on_samples, "on");
    check_finite(batch.off_samples, "off");

    CovEstimate est;
    est.n_rep = n;
    est.n_batches = n_batches;

    const Eigen::Matrix4d on = scaled_sample_cov(batch.on_samples, 0, n);
    const Eigen::Matrix4d off = scaled_sample_cov(batch.off_samples, 0, n);
    est.sigma_on = CovMatrix4(on);
    est.sigma_off = CovMatrix4(off);
    est.sigma = CovMatrix4(on - off + Eigen::Matrix4d::Identity());

    est.block_sigmas.reserve(static_cast<std::size_t>(n_batches));
    for (int b = 0; b < n_batches; ++b) {
        const std::size_t lo = n * static_cast<std::size_t>(b) / static_cast<std::size_t>(n_batches);
        const std::size_t hi =
            n * (static_cast<std::size_t>(b) + 1) / static_cast<std::size_t>(n_batches);
        if (hi - lo < 2) {
            throw std::invalid_argument("estimate_covariance: blocks need >= 2 samples");
        }
        const Eigen::Matrix4d bon = scaled_sample_cov(batch.on_samples, lo, hi);
        const Eigen::Matrix4d boff = scaled_sample_cov(batch.off_samples, lo, hi);
        est.block_sigmas.push_back(bon - boff + Eigen::Matrix4d::Identity());
    }

    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            std::vector<double> vals;
            vals.reserve(est.block_sigmas.size());
            for (const auto& bs : est.block_sigmas) vals.push_back(bs(i, j));
            double mean = 0.0;
            for (double v : vals) mean += v;
            mean /= static_cast<double>(vals.size());
            est.stderr_entries(i, j) =
                sample_std(vals, mean) / std::sqrt(static_cast<double>(n_batches));
        }
    }
    return est;
}

std::int64_t DiffHistogram2D::total_signed() const {
    std::int64_t acc = 0;
    for (auto c : signed_counts) acc += c;
    return acc;
}

std::array<DiffHistogram2D, 6> diff_histograms(const AcquisitionBatch& batch, int bins,
                                               double range) {
    if (bins < 2) throw std::invalid_argument("diff_histograms: bins must be >= 2");
    if (!(range > 0.0)) throw std::invalid_argument("diff_histograms: range must be > 0");

    std::array<DiffHistogram2D, 6> out;
    for (std::size_t h = 0; h < out.size(); ++h) {
        auto& hist = out[h];
        hist.axis_a_index = kHistPairs[h].first;
        hist.axis_b_index = kHistPairs[h].second;
        hist.axis_a = kQuadNames[static_cast<size_t>(hist.axis_a_index)];
        hist.axis_b = kQuadNames[static_cast<size_t>(hist.axis_b_index)];
        hist.bins = bins;
        hist.range = range;
        hist.signed_counts.assign(static_cast<std::size_t>(bins) * bins, 0);
    }

    const double width = 2.0 * range / bins;
    auto fill = [&](const std::vector<Sample>& block, int sign) {
        for (const auto& s : block) {
            for (auto& hist : out) {
                const double a = s[static_cast<size_t>(hist.axis_a_index)];
                const double b = s[static_cast<size_t>(hist.axis_b_index)];
                const int ia = static_cast<int>(std::floor((a + range) / width));
                const int ib = static_cast<int>(std::floor((b + range) / width));
                if (ia < 0 || ia >= bins || ib < 0 || ib >= bins) {
                    (sign > 0 ? hist.overflow_on : hist.overflow_off) += 1;
                    continue;
                }
                (sign > 0 ? hist.in_range_on : hist.in_range_off) += 1;
                hist.signed_counts[static_cast<std::size_t>(ia) * bins + ib] += sign;
            }
        }
    };
    fill(batch.on_samples, +1);
    fill(batch.off_samples, -1);
    return out;
}

void write_histogram_csv(std::ostream& out, const DiffHistogram2D& hist) {
    out << "# axis_a=" << hist.axis_a << "\n# axis_b=" << hist.axis_b
        << "\n# bins=" << hist.bins << "\n# range=" << hist.range
        << "\n# in_range_on=" << hist.in_range_on << "\n# in_range_off=" << hist.in_range_off
        << "\n# overflow_on=" << hist.overflow_on
        << "\n# overflow_off=" << hist.overflow_off << "\n";
    out << hist.axis_a << "," << hist.axis_b << ",signed_count\n";
    char buf[96];
    for (int ia = 0; ia < hist.bins; ++ia) {
        for (int ib = 0; ib < hist.bins; ++ib) {
            std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%lld\n", hist.center(ia),
                          hist.center(ib), static_cast<long long>(hist.at(ia, ib)));
            out << buf;
        }
    }
}

EstimatedMetrics report_metrics(const CovEstimate& est) {
    EstimatedMetrics m;
    m.report = analyze_state(est.sigma);
    m.log_negativity_unclipped = -std::log(m.report.nu_minus);

    std::vector<double> block_en;
    std::vector<double> block_sq;
    block_en.reserve(est.block_sigmas.size());
    block_sq.reserve(est.block_sigmas.size());
    for (const auto& bs : est.block_sigmas) {
        block_en.push_back(block_log_negativity(bs));
        block_sq.push_back(block_sq_plus_db(bs));
    }
    const double nb = static_cast<double>(est.block_sigmas.size());
    if (nb >= 2) {
        double mean_en = 0.0, mean_sq = 0.0;
        for (double v : block_en) mean_en += v;
        for (double v : block_sq) mean_sq += v;
        mean_en /= nb;
        mean_sq /= nb;
        m.e_n_stderr = sample_std(block_en, mean_en) / std::sqrt(nb);
        m.sq_plus_db_stderr = sample_std(block_sq, mean_sq) / std::sqrt(nb);
    }
    return m;
}

StabilityReport stability_study(const CovMatrix4& state, const ChainSpec& chain, int reps,
                                std::size_t n_rep_each, std::uint64_t seed, int hist_bins) {
    if (reps < 2) throw std::invalid_argument("stability_study: reps must be >= 2");
    if (hist_bins < 1) throw std::invalid_argument("stability_study: hist_bins must be >= 1");
    const auto [sigma_on, sigma_off] = measured_covariances(state, chain);

    StabilityReport rep;
    rep.e_n_values.reserve(static_cast<std::size_t>(reps));
    for (int i = 0; i < reps; ++i) {
        const std::uint64_t sub_seed = derive_seed(seed, 0x5741u, static_cast<std::uint64_t>(i));
        const AcquisitionBatch batch =
            sample_batch(sigma_on, sigma_off, n_rep_each, sub_seed, chain);
        const CovEstimate est = estimate_covariance(batch, 2);
        rep.e_n_values.push_back(log_negativity(est.sigma));
    }

    double mean = 0.0;
    for (double v : rep.e_n_values) mean += v;
    mean /= static_cast<double>(reps);
    rep.mean = mean;
    rep.stddev = sample_std(rep.e_n_values, mean);

    const auto [lo_it, hi_it] = std::minmax_element(rep.e_n_values.begin(), rep.e_n_values.end());
    double lo = *lo_it, hi = *hi_it;
    const double pad = (hi > lo) ? 0.05 * (hi - lo) : std::max(0.05 * std::abs(hi), 1e-6);
    rep.hist_lo = lo - pad;
    rep.hist_hi = hi + pad;
    rep.hist_counts.assign(static_cast<std::size_t>(hist_bins), 0);
    const double width = (rep.hist_hi - rep.hist_lo) / hist_bins;
    for (double v : rep.e_n_values) {
        int idx = static_cast<int>(std::floor((v - rep.hist_lo) / width));
        idx = std::clamp(idx, 0, hist_bins - 1);
        rep.hist_counts[static_cast<std::size_t>(idx)] += 1;
    }
    return rep;
}

void write_stability_csv(std::ostream& out, const StabilityReport& report) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "# reps=%zu\n# mean=%.10g\n# std=%.10g\n",
                  report.e_n_values.size(), report.mean, report.stddev);
    out << buf;
    out << "e_n_bin_center,count\n";
    const double width =
        (report.hist_hi - report.hist_lo) / static_cast<double>(report.hist_counts.size());
    for (std::size_t i = 0; i < report.hist_counts.size(); ++i) {
        const double center = report.hist_lo + (static_cast<double>(i) + 0.5) * width;
        std::snprintf(buf, sizeof(buf), "%.10g,%lld\n", center,
                      static_cast<long long>(report.hist_counts[i]));
        out << buf;
    }
}

std::string to_json(const CovEstimate& est, int indent) {
    ordered_json j;
    j["n_rep"] = est.n_rep;
    j["n_batches"] = est.n_batches;
    j["sigma"] = matrix_json(est.sigma.m());
    j["sigma_on"] = matrix_json(est.sigma_on.m());
    j["sigma_off"] = matrix_json(est.sigma_off.m());
    j["stderr"] = matrix_json(est.stderr_entries);
    return j.dump(indent);
}

std::string to_json(const EstimatedMetrics& m, int indent) {
    ordered_json j;
    j["nu_minus"] = m.report.nu_minus;
    j["log_negativity"] = m.report.log_negativity;
    j["log_negativity_unclipped"] = m.log_negativity_unclipped;
    j["log_negativity_stderr"] = m.e_n_stderr;
    j["entropy_formation"] = m.report.entropy_formation;
    j["var_x_plus"] = m.report.var_x_plus;
    j["var_p_plus"] = m.report.var_p_plus;
    j["var_x_minus"] = m.report.var_x_minus;
    j["var_p_minus"] = m.report.var_p_minus;
    j["sq_plus_db"] = m.report.sq_plus_db;
    j["sq_plus_db_stderr"] = m.sq_plus_db_stderr;
    j["squeezing_db_best"] = m.report.squeezing_db_best;
    return j.dump(indent);
}

std::string to_json(const StabilityReport& r, int indent) {
    ordered_json j;
    j["reps"] = r.e_n_values.size();
    j["mean"] = r.mean;
    j["stddev"] = r.stddev;
    j["e_n_values"] = r.e_n_values;
    j["hist_lo"] = r.hist_lo;
    j["hist_hi"] = r.hist_hi;
    j["hist_counts"] = r.hist_counts;
    return j.dump(indent);
}

}  // namespace twpa
