#include "twpa/chain.hpp"

#include "twpa/errors.hpp"
#include "twpa/rng.hpp"

#include <Eigen/Cholesky>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <thread>

static_assert(std::endian::native == std::endian::little,
              "batch file IO assumes a little-endian host");

namespace twpa {

namespace {

constexpr double kPlanck = 6.62607015e-34;    // J s
constexpr double kBoltzmann = 1.380649e-23;   // J/K

constexpr char kMagic[4] = {'T', 'W', 'P', 'A'};
constexpr std::uint32_t kFormatVersion = 1;

constexpr std::size_t kChunkSamples = 4096;
constexpr std::uint64_t kStreamOn = 0;
constexpr std::uint64_t kStreamOff = 1;

// Lower-triangular factor of sigma/4, the per-sample covariance.
Eigen::Matrix4d sample_factor(const CovMatrix4& sigma, const char* name) {
    Eigen::LLT<Eigen::Matrix4d> llt(sigma.m() / 4.0);
    if (llt.info() != Eigen::Success) {
        throw std::domain_error(std::string("sample_batch: ") + name +
                                " is not positive definite, cannot factorize");
    }
    return llt.matrixL();
}

void fill_stream(std::vector<std::array<double, 4>>& out, const Eigen::Matrix4d& factor,
                 std::uint64_t seed, std::uint64_t stream) {
    const std::size_t n = out.size();
    const std::size_t n_chunks = (n + kChunkSamples - 1) / kChunkSamples;

    auto run_chunk = [&](std::size_t chunk) {
        Splitmix64 rng(derive_seed(seed, stream, chunk));
        const std::size_t begin = chunk * kChunkSamples;
        const std::size_t end = std::min(begin + kChunkSamples, n);
        for (std::size_t k = begin; k < end; ++k) {
            Eigen::Vector4d z;
            rng.next_normal_pair(z(0), z(1));
            rng.next_normal_pair(z(2), z(3));
            const Eigen::Vector4d v = factor * z;
            out[k] = {v(0), v(1), v(2), v(3)};
        }
    };

    const unsigned hw = std::thread::hardware_concurrency();
    const std::size_t n_workers = std::min<std::size_t>(hw ? hw : 1, n_chunks);
    if (n_workers <= 1 || n_chunks < 4) {
        for (std::size_t c = 0; c < n_chunks; ++c) run_chunk(c);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) {
        workers.emplace_back([&, w] {
            for (std::size_t c = w; c < n_chunks; c += n_workers) run_chunk(c);
        });
    }
    for (auto& t : workers) t.join();
}

void write_f64(std::ofstream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

double read_f64(std::ifstream& in) {
    double v = 0.0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

}  // namespace

void ChainSpec::validate() const {
    if (!(g_sys_s >= 1.0 && g_sys_i >= 1.0)) {
        throw std::invalid_argument("ChainSpec: system gains must be >= 1");
    }
    if (!(n_add_s >= 0.0 && n_add_i >= 0.0)) {
        throw std::invalid_argument("ChainSpec: added noise quanta must be >= 0");
    }
    if (!(tau > 0.0)) throw std::invalid_argument("ChainSpec: tau must be > 0");
    if (!(z > 0.0)) throw std::invalid_argument("ChainSpec: impedance must be > 0");
    if (!(delta > 0.0 && delta < f_p)) {
        throw std::invalid_argument("ChainSpec: detuning must satisfy 0 < delta < f_p");
    }
}

double ChainSpec::gamma_signal() const { return (1.0 / z) * tau / (kPlanck * f_signal()); }
double ChainSpec::gamma_idler() const { return (1.0 / z) * tau / (kPlanck * f_idler()); }

double n_add_from_temperature(double t_sys_kelvin, double f_hz) {
    if (!(t_sys_kelvin >= 0.0)) {
        throw std::invalid_argument("n_add_from_temperature: temperature must be >= 0");
    }
    if (!(f_hz > 0.0)) {
        throw std::invalid_argument("n_add_from_temperature: frequency must be > 0");
    }
    return kBoltzmann * t_sys_kelvin / (kPlanck * f_hz);
}

std::pair<CovMatrix4, CovMatrix4> measured_covariances(const CovMatrix4& state,
                                                       const ChainSpec& chain) {
    chain.validate();
    Eigen::Vector4d thermal(2.0 * chain.n_add_s, 2.0 * chain.n_add_s, 2.0 * chain.n_add_i,
                            2.0 * chain.n_add_i);
    Eigen::Matrix4d on = state.m();
    on += thermal.asDiagonal().toDenseMatrix() + Eigen::Matrix4d::Identity();
    Eigen::Matrix4d off = thermal.asDiagonal().toDenseMatrix();
    off += 2.0 * Eigen::Matrix4d::Identity();
    return {CovMatrix4(on), CovMatrix4(off)};
}

AcquisitionBatch sample_batch(const CovMatrix4& sigma_on, const CovMatrix4& sigma_off,
                              std::size_t n_rep, std::uint64_t seed,
                              const ChainSpec& chain) {
    if (n_rep < 1) throw std::invalid_argument("sample_batch: n_rep must be >= 1");
    chain.validate();
    const Eigen::Matrix4d factor_on = sample_factor(sigma_on, "sigma_on");
    const Eigen::Matrix4d factor_off = sample_factor(sigma_off, "sigma_off");

    AcquisitionBatch batch;
    batch.seed = seed;
    batch.chain = chain;
    batch.on_samples.resize(n_rep);
    batch.off_samples.resize(n_rep);
    fill_stream(batch.on_samples, factor_on, seed, kStreamOn);
    fill_stream(batch.off_samples, factor_off, seed, kStreamOff);
    return batch;
}

std::array<double, 4> raw_to_calibrated(const std::array<double, 4>& raw_volts,
                                        const ChainSpec& chain) {
    const double cal_s = std::sqrt(chain.gamma_signal() / chain.g_sys_s);
    const double cal_i = std::sqrt(chain.gamma_idler() / chain.g_sys_i);
    return {raw_volts[0] * cal_s, raw_volts[1] * cal_s, raw_volts[2] * cal_i,
            raw_volts[3] * cal_i};
}

std::array<double, 4> calibrated_to_raw(const std::array<double, 4>& calibrated,
                                        const ChainSpec& chain) {
    const double cal_s = std::sqrt(chain.gamma_signal() / chain.g_sys_s);
    const double cal_i = std::sqrt(chain.gamma_idler() / chain.g_sys_i);
    return {calibrated[0] / cal_s, calibrated[1] / cal_s, calibrated[2] / cal_i,
            calibrated[3] / cal_i};
}

void write_batch_file(const std::string& path, const AcquisitionBatch& batch) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("write_batch_file: cannot open " + path);
    out.write(kMagic, 4);
    const std::uint32_t version = kFormatVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t n_rep = batch.n_rep();
    out.write(reinterpret_cast<const char*>(&n_rep), sizeof(n_rep));
    out.write(reinterpret_cast<const char*>(&batch.seed), sizeof(batch.seed));
    const ChainSpec& c = batch.chain;
    for (double v : {c.g_sys_s, c.g_sys_i, c.n_add_s, c.n_add_i, c.tau, c.z, c.f_p, c.delta}) {
        write_f64(out, v);
    }
    for (const auto& block : {batch.on_samples, batch.off_samples}) {
        for (const auto& s : block) {
            out.write(reinterpret_cast<const char*>(s.data()), 4 * sizeof(double));
        }
    }
    if (!out) throw io_error("write_batch_file: write failed for " + path);
}

AcquisitionBatch read_batch_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("read_batch_file: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw io_error("read_batch_file: " + path + " is not a TWPA batch file");
    }
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kFormatVersion) {
        throw io_error("read_batch_file: unsupported format version " +
                                 std::to_string(version));
    }
    std::uint64_t n_rep = 0;
    in.read(reinterpret_cast<char*>(&n_rep), sizeof(n_rep));
    AcquisitionBatch batch;
    in.read(reinterpret_cast<char*>(&batch.seed), sizeof(batch.seed));
    ChainSpec& c = batch.chain;
    for (double* field : {&c.g_sys_s, &c.g_sys_i, &c.n_add_s, &c.n_add_i, &c.tau, &c.z,
                          &c.f_p, &c.delta}) {
        *field = read_f64(in);
    }
    batch.on_samples.resize(n_rep);
    batch.off_samples.resize(n_rep);
    for (auto* block : {&batch.on_samples, &batch.off_samples}) {
        for (auto& s : *block) {
            in.read(reinterpret_cast<char*>(s.data()), 4 * sizeof(double));
        }
    }
    if (!in) throw io_error("read_batch_file: truncated file " + path);
    return batch;
}

void write_batch_csv(std::ostream& out, const AcquisitionBatch& batch) {
    out << "x_s,p_s,x_i,p_i,pump\n";
    char buf[160];
    for (int pump : {1, 0}) {
        const auto& block = pump ? batch.on_samples : batch.off_samples;
        for (const auto& s : block) {
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%d\n", s[0], s[1],
                          s[2], s[3], pump);
            out << buf;
        }
    }
}

}  // namespace twpa
