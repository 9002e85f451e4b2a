#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "twpa/gaussian.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

using namespace twpa;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent route to the minimum symplectic eigenvalue: the moduli of
// the eigenvalues of i*Omega*sigma (they come in +/- pairs).
double nu_minus_bruteforce(const CovMatrix4& sigma) {
    Eigen::Matrix4d omega = Eigen::Matrix4d::Zero();
    omega(0, 1) = 1.0;
    omega(1, 0) = -1.0;
    omega(2, 3) = 1.0;
    omega(3, 2) = -1.0;
    Eigen::Matrix4cd m =
        std::complex<double>(0.0, 1.0) * (omega * sigma.m()).cast<std::complex<double>>();
    Eigen::ComplexEigenSolver<Eigen::Matrix4cd> solver(m);
    double nu = 1e300;
    for (int i = 0; i < 4; ++i) nu = std::min(nu, std::abs(solver.eigenvalues()(i)));
    return nu;
}

}  // namespace

TEST_CASE("gain to squeezing amplitude") {
    CHECK(gain_to_r(1.0) == 0.0);
    // frozen: acosh(sqrt(1.30))
    CHECK(gain_to_r(1.30) == doctest::Approx(0.5234839575015944).epsilon(1e-12));
    CHECK(std::abs(gain_to_r(1.30) - 0.5235) < 0.0005);
    // frozen: acosh(2)
    CHECK(gain_to_r(4.0) == doctest::Approx(1.3169578969248166).epsilon(1e-12));
    CHECK_THROWS_AS(gain_to_r(0.99), std::domain_error);

    for (double g : {1.0, 1.3, 2.0, 10.0, 1e4}) {
        CHECK(r_to_gain(gain_to_r(g)) == doctest::Approx(g).epsilon(1e-12));
    }
}

TEST_CASE("squeeze spec validation") {
    CHECK_THROWS_AS(SqueezeSpec(-0.1, 0.0), std::invalid_argument);
    CHECK(SqueezeSpec(0.5, 2.0 * kPi + 0.25).phi() == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(SqueezeSpec(0.5, -0.25).phi() == doctest::Approx(2.0 * kPi - 0.25).epsilon(1e-12));
    CHECK(SqueezeSpec(0.5, 0.0).phi() == 0.0);
}

TEST_CASE("loss model") {
    CHECK_THROWS_AS(LossModel(1.2, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(LossModel(0.5, -0.1), std::invalid_argument);
    const LossModel lossless = LossModel::lossless();
    CHECK(lossless.epsilon_bar() == 0.0);
    CHECK(lossless.delta() == 0.0);  // degenerate case pinned to 0
    const LossModel asym(0.4, 0.8);
    CHECK(asym.epsilon_bar() == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(asym.delta() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("tms covariance entries") {
    const double r = 0.5235;

    SUBCASE("vacuum in, vacuum out") {
        const CovMatrix4 s = tms_covariance(SqueezeSpec(0.0, 1.0), LossModel(0.7, 0.9));
        CHECK((s.m() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-15);
    }
    SUBCASE("full loss gives vacuum") {
        const CovMatrix4 s = tms_covariance(SqueezeSpec(1.3, 0.4), LossModel(0.0, 0.0));
        CHECK((s.m() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-15);
    }
    SUBCASE("lossless entries at phi = 0") {
        const CovMatrix4 s = tms_covariance(SqueezeSpec(r, 0.0), LossModel::lossless());
        // frozen: cosh(2r), sinh(2r) at r = 0.5235
        const double c2 = 1.6000400749717378;
        const double s2 = 1.2490509363174762;
        for (int i = 0; i < 4; ++i) CHECK(s(i, i) == doctest::Approx(c2).epsilon(1e-12));
        CHECK(s(0, 2) == doctest::Approx(s2).epsilon(1e-12));
        CHECK(s(2, 0) == doctest::Approx(s2).epsilon(1e-12));
        CHECK(s(1, 3) == doctest::Approx(-s2).epsilon(1e-12));
        CHECK(s(0, 3) == 0.0);
        CHECK(s(0, 1) == 0.0);
    }
    SUBCASE("phase quadrature mixing at phi = pi/2") {
        const CovMatrix4 s = tms_covariance(SqueezeSpec(r, kPi / 2.0), LossModel::lossless());
        const double s2 = 1.2490509363174762;
        CHECK(s(0, 3) == doctest::Approx(s2).epsilon(1e-12));
        CHECK(s(1, 2) == doctest::Approx(s2).epsilon(1e-12));
        CHECK(std::abs(s(0, 2)) < 1e-15);
    }
    SUBCASE("loss scales blocks") {
        const CovMatrix4 s = tms_covariance(SqueezeSpec(r, 0.0), LossModel(0.5, 0.8));
        const double c2 = 1.6000400749717378;
        const double s2 = 1.2490509363174762;
        CHECK(s(0, 0) == doctest::Approx(0.5 * c2 + 0.5).epsilon(1e-12));
        CHECK(s(2, 2) == doctest::Approx(0.8 * c2 + 0.2).epsilon(1e-12));
        CHECK(s(0, 2) == doctest::Approx(std::sqrt(0.4) * s2).epsilon(1e-12));
    }
}

TEST_CASE("every tms covariance is physical") {
    for (double r : {0.0, 0.3, 0.7, 1.2, 2.0}) {
        for (double phi : {0.0, 1.0, 3.0, 5.5}) {
            for (double eta_s : {0.0, 0.3, 0.7, 1.0}) {
                for (double eta_i : {0.1, 0.6, 1.0}) {
                    const CovMatrix4 s =
                        tms_covariance(SqueezeSpec(r, phi), LossModel(eta_s, eta_i));
                    CHECK(s.physicality_eigenvalue() >= -1e-9);
                }
            }
        }
    }
}

TEST_CASE("partial transpose") {
    const CovMatrix4 s = tms_covariance(SqueezeSpec(0.5235, 0.0), LossModel::lossless());
    const CovMatrix4 pt = partial_transpose(s);
    // x-x corner untouched, p-p corner flips sign
    CHECK(pt(0, 2) == s(0, 2));
    CHECK(pt(1, 3) == -s(1, 3));
    CHECK(pt(3, 3) == s(3, 3));

    SUBCASE("identity is a fixed point") {
        const CovMatrix4 id = CovMatrix4::identity();
        CHECK((partial_transpose(id).m() - id.m()).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("involution is bit-exact") {
        for (double phi : {0.0, 0.7, 2.1, 4.9}) {
            const CovMatrix4 x = tms_covariance(SqueezeSpec(0.9, phi), LossModel(0.6, 0.9));
            const CovMatrix4 twice = partial_transpose(partial_transpose(x));
            CHECK((twice.m() - x.m()).cwiseAbs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("symplectic nu minus") {
    SUBCASE("vacuum sits on the separability boundary") {
        CHECK(symplectic_nu_minus(CovMatrix4::identity()) == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("PT of lossless TMS gives exp(-2r)") {
        const double r = 0.5235;
        const CovMatrix4 pt =
            partial_transpose(tms_covariance(SqueezeSpec(r, 0.0), LossModel::lossless()));
        // frozen: exp(-1.047)
        CHECK(symplectic_nu_minus(pt) == doctest::Approx(0.35098913865426146).epsilon(1e-11));
    }
    SUBCASE("thermal diagonal") {
        const CovMatrix4 th(Eigen::Matrix4d::Identity() * 3.0);
        const double nu = symplectic_nu_minus(partial_transpose(th));
        CHECK(nu == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(nu == doctest::Approx(nu_minus_bruteforce(partial_transpose(th))).epsilon(1e-10));
    }
    SUBCASE("det-formula route agrees with eigenvalue route") {
        for (double r : {0.1, 0.5, 1.0, 1.8}) {
            for (double eta_s : {0.4, 0.8, 1.0}) {
                for (double eta_i : {0.5, 1.0}) {
                    const CovMatrix4 s =
                        tms_covariance(SqueezeSpec(r, 0.9), LossModel(eta_s, eta_i));
                    const CovMatrix4 pt = partial_transpose(s);
                    const double nu = symplectic_nu_minus(pt);
                    CHECK(nu ==
                          doctest::Approx(nu_minus_bruteforce(pt)).epsilon(1e-9));
                    // original (physical) state has nu >= 1
                    CHECK(symplectic_nu_minus(s) >= 1.0 - 1e-12);
                }
            }
        }
    }
    SUBCASE("non-symmetric input rejected at the type level") {
        Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
        m(0, 1) = 0.5;
        CHECK_THROWS_AS(CovMatrix4{m}, std::invalid_argument);
    }
}

TEST_CASE("log negativity") {
    CHECK(log_negativity(CovMatrix4::identity()) == 0.0);

    SUBCASE("pure state closed form E_N = 2r") {
        for (double r = 0.1; r <= 2.0 + 1e-12; r += 0.1) {
            const CovMatrix4 s = tms_covariance(SqueezeSpec(r, 0.0), LossModel::lossless());
            CHECK(std::abs(log_negativity(s) - 2.0 * r) < 1e-9);
        }
    }
    SUBCASE("paper operating point with symmetric loss") {
        const CovMatrix4 s = tms_covariance(SqueezeSpec(0.5235, 0.0),
                                            LossModel::from_average_loss(0.492));
        // frozen: -ln(exp(-1.047) + (1-exp(-1.047))*0.492)
        CHECK(log_negativity(s) == doctest::Approx(0.4000262021544506).epsilon(1e-10));
    }
    SUBCASE("phase invariance") {
        const LossModel loss(0.62, 0.88);
        const double ref = log_negativity(tms_covariance(SqueezeSpec(0.8, 0.0), loss));
        for (int k = 0; k < 64; ++k) {
            const double phi = 2.0 * kPi * k / 64.0;
            const double en = log_negativity(tms_covariance(SqueezeSpec(0.8, phi), loss));
            CHECK(std::abs(en - ref) < 1e-9);
        }
    }
    SUBCASE("entangled exactly when nu_minus < 1") {
        for (double r : {0.0, 0.05, 0.3, 1.0}) {
            for (double eps : {0.0, 0.3, 0.8, 0.95}) {
                const CovMatrix4 s =
                    tms_covariance(SqueezeSpec(r, 0.0), LossModel::from_average_loss(eps));
                const double nu = symplectic_nu_minus(partial_transpose(s));
                const double en = log_negativity(s);
                CHECK((nu < 1.0) == (en > 0.0));
            }
        }
    }
}

TEST_CASE("closed-form lossy log negativity") {
    CHECK(log_negativity_closed_form(SqueezeSpec(0.0, 0.0), LossModel(0.5, 0.9)) == 0.0);
    // frozen scalar evaluations at r = 0.5235
    CHECK(log_negativity_closed_form(SqueezeSpec(0.5235, 0.0), LossModel::lossless()) ==
          doctest::Approx(1.047).epsilon(1e-12));
    CHECK(log_negativity_closed_form(SqueezeSpec(0.5235, 0.0),
                                     LossModel::from_average_loss(0.185)) ==
          doctest::Approx(0.7527779818727645).epsilon(1e-12));

    SUBCASE("matches matrix pipeline exactly for symmetric loss") {
        for (double r : {0.1, 0.5235, 1.0, 1.7}) {
            for (double eps : {0.0, 0.1, 0.35, 0.6}) {
                const SqueezeSpec sq(r, 0.0);
                const LossModel loss = LossModel::from_average_loss(eps);
                const double cf = log_negativity_closed_form(sq, loss);
                const double mp = log_negativity(tms_covariance(sq, loss));
                CHECK(std::abs(cf - mp) < 1e-9);
            }
        }
    }
    SUBCASE("asymmetric loss: measured agreement envelope") {
        // The closed form is an approximation off the delta = 0 axis. Over
        // r in [0.1, 2], eps_bar <= 0.3, |delta| <= 0.5 the deviation from
        // the matrix pipeline stays below 0.03 (worst case grows like
        // eps^2 * delta^2; at eps <= 0.2, |delta| <= 0.5 it is < 0.011).
        double worst_tight = 0.0;
        double worst_wide = 0.0;
        for (double r = 0.1; r <= 2.0 + 1e-9; r += 0.19) {
            for (double eps = 0.0; eps <= 0.3 + 1e-9; eps += 0.05) {
                for (double d = -1.0; d <= 1.0 + 1e-9; d += 0.25) {
                    const double eta_s = 1.0 - eps * (1.0 + d);
                    const double eta_i = 1.0 - eps * (1.0 - d);
                    if (eta_s < 0.0 || eta_s > 1.0 || eta_i < 0.0 || eta_i > 1.0) continue;
                    const SqueezeSpec sq(r, 0.0);
                    const LossModel loss(eta_s, eta_i);
                    const double dev = std::abs(log_negativity_closed_form(sq, loss) -
                                                log_negativity(tms_covariance(sq, loss)));
                    if (std::abs(d) <= 0.5) worst_tight = std::max(worst_tight, dev);
                    worst_wide = std::max(worst_wide, dev);
                }
            }
        }
        CHECK(worst_tight < 0.03);
        CHECK(worst_wide < 0.09);
    }
}

TEST_CASE("monotone degradation with loss") {
    const double r = 0.5235;
    double prev_en = 1e300;
    double prev_sq = -1e300;
    for (int i = 0; i < 20; ++i) {
        const double eps = i * (0.9 / 19.0);
        const LossModel loss = LossModel::from_average_loss(eps);
        const double en = log_negativity(tms_covariance(SqueezeSpec(r, kPi), loss));
        const double sq =
            squeezing_db(collective_variances(tms_covariance(SqueezeSpec(r, kPi), loss)).x_plus);
        CHECK(en <= prev_en + 1e-12);
        CHECK(sq >= prev_sq - 1e-12);  // |squeezing| shrinks toward 0 dB
        prev_en = en;
        prev_sq = sq;
    }
    SUBCASE("across r too") {
        for (double rr : {0.2, 0.7, 1.4}) {
            double prev = 1e300;
            for (int i = 0; i < 20; ++i) {
                const double eps = i * (0.9 / 19.0);
                const double en = log_negativity(
                    tms_covariance(SqueezeSpec(rr, 0.0), LossModel::from_average_loss(eps)));
                CHECK(en <= prev + 1e-12);
                prev = en;
            }
        }
    }
}

TEST_CASE("collective variances") {
    SUBCASE("vacuum reference") {
        const CollectiveVariances v = collective_variances(CovMatrix4::identity());
        CHECK(v.x_plus == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(v.p_plus == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(v.x_minus == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(v.p_minus == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("lossless minimum at phi = pi") {
        const CovMatrix4 s = tms_covariance(SqueezeSpec(0.5235, kPi), LossModel::lossless());
        // frozen: exp(-1.047)/2
        CHECK(collective_variances(s).x_plus ==
              doctest::Approx(0.17549456932713073).epsilon(1e-12));
    }
    SUBCASE("lossy value") {
        const CovMatrix4 s = tms_covariance(SqueezeSpec(0.5235, kPi),
                                            LossModel::from_average_loss(0.2));
        // frozen: 0.5*(0.2 + 0.8*exp(-1.047))
        CHECK(collective_variances(s).x_plus ==
              doctest::Approx(0.2403956554617046).epsilon(1e-12));
    }
    SUBCASE("phase law, period 2 pi") {
        const double r = 0.77;
        const double c2 = std::cosh(2.0 * r);
        const double s2 = std::sinh(2.0 * r);
        for (int k = 0; k < 16; ++k) {
            const double phi = 2.0 * kPi * k / 16.0;
            const CovMatrix4 s = tms_covariance(SqueezeSpec(r, phi), LossModel::lossless());
            const CollectiveVariances v = collective_variances(s);
            CHECK(v.x_plus == doctest::Approx((c2 + s2 * std::cos(phi)) / 2.0).epsilon(1e-12));
            // x_minus is the conjugate quadrature
            CHECK(v.x_minus == doctest::Approx((c2 - s2 * std::cos(phi)) / 2.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("squeezing in dB") {
    CHECK(squeezing_db(0.5) == 0.0);
    // frozen: 10*log10(0.2404/0.5)
    CHECK(squeezing_db(0.2404) == doctest::Approx(-3.180355410053169).epsilon(1e-12));
    CHECK_THROWS_AS(squeezing_db(0.0), std::domain_error);
    CHECK_THROWS_AS(squeezing_db(-0.1), std::domain_error);

    SUBCASE("paper operating point") {
        const CovMatrix4 s = tms_covariance(SqueezeSpec(0.5235, kPi),
                                            LossModel::from_average_loss(0.492));
        const double var = collective_variances(s).x_plus;
        // frozen: 0.5*(0.492 + 0.508*exp(-1.047)) and its dB value
        CHECK(var == doctest::Approx(0.3351512412181824).epsilon(1e-12));
        CHECK(squeezing_db(var) == doctest::Approx(-1.7372917221239261).epsilon(1e-12));
    }
}

TEST_CASE("entropy of formation") {
    CHECK(entropy_formation(0.0) == 0.0);
    // frozen scalar evaluations of the c+- formula
    CHECK(entropy_formation(0.4) == doctest::Approx(0.13826713697945556).epsilon(1e-12));
    CHECK(entropy_formation(1.047) == doctest::Approx(0.6051706114181378).epsilon(1e-12));
    CHECK_THROWS_AS(entropy_formation(-0.1), std::domain_error);

    SUBCASE("strictly increasing") {
        double prev = 0.0;
        for (double en = 0.05; en <= 3.0 + 1e-12; en += 0.05) {
            const double ef = entropy_formation(en);
            CHECK(ef > prev);
            prev = ef;
        }
    }
    SUBCASE("zero exactly at zero negativity") {
        CHECK(entropy_formation(1e-12) > 0.0);
    }
}

TEST_CASE("ebit rate") {
    CHECK(ebit_rate(0.0, 1e9) == 0.0);
    CHECK(ebit_rate(1.0, 1.0) == 1.0);
    // frozen: E_F(0.4) * 400 MHz, inside the 53 +/- 20 Mebit/s band
    const double rate = ebit_rate(entropy_formation(0.4), 4e8);
    CHECK(rate == doctest::Approx(55306854.79178222).epsilon(1e-10));
    CHECK(rate > 33e6);
    CHECK(rate < 73e6);
    CHECK_THROWS_AS(ebit_rate(0.5, -1.0), std::domain_error);
}

TEST_CASE("loss from unit cells") {
    CHECK(loss_from_cells(0, 8.2e-4).epsilon_bar() == 0.0);
    CHECK(loss_from_cells(1, 8.2e-4).epsilon_bar() == doctest::Approx(8.2e-4).epsilon(1e-12));
    const LossModel device = loss_from_cells(250, 8.2e-4);
    // frozen: (1 - 8.2e-4)^250
    CHECK(device.eta_s() == doctest::Approx(0.8145788107311209).epsilon(1e-12));
    CHECK(device.epsilon_bar() == doctest::Approx(0.18542118926887907).epsilon(1e-12));
    // 0.89 dB, inside the measured 0.5 - 1 dB window
    const double loss_db = -10.0 * std::log10(device.eta_s());
    CHECK(loss_db == doctest::Approx(0.8906689120832876).epsilon(1e-12));
    CHECK(loss_db > 0.5);
    CHECK(loss_db < 1.0);
    CHECK_THROWS_AS(loss_from_cells(-1, 1e-3), std::invalid_argument);
    CHECK_THROWS_AS(loss_from_cells(10, 1.0), std::invalid_argument);
}

TEST_CASE("analyze_state report") {
    const CovMatrix4 s =
        tms_covariance(SqueezeSpec(0.5235, kPi), LossModel::from_average_loss(0.492));
    const EntanglementReport rep = analyze_state(s);
    CHECK(rep.log_negativity == doctest::Approx(0.4000262021544506).epsilon(1e-10));
    CHECK(rep.log_negativity == std::max(-std::log(rep.nu_minus), 0.0));
    CHECK(rep.entropy_formation == doctest::Approx(entropy_formation(rep.log_negativity)));
    CHECK(rep.sq_plus_db == doctest::Approx(-1.7372917221239261).epsilon(1e-10));
    CHECK(rep.squeezing_db_best <= rep.sq_plus_db + 1e-12);
    CHECK(rep.var_x_plus == doctest::Approx(rep.var_p_minus).epsilon(1e-12));

    SUBCASE("separable state reports zero") {
        const EntanglementReport vac = analyze_state(CovMatrix4::identity());
        CHECK(vac.log_negativity == 0.0);
        CHECK(vac.entropy_formation == 0.0);
        CHECK(vac.sq_plus_db == 0.0);
    }
}

TEST_CASE("covariance matrix serialization") {
    const CovMatrix4 s = tms_covariance(SqueezeSpec(0.9, 2.3), LossModel(0.55, 0.95));
    const CovMatrix4 back = CovMatrix4::from_csv(s.to_csv());
    CHECK((back.m() - s.m()).cwiseAbs().maxCoeff() == 0.0);  // 17 digits round-trips
    CHECK_THROWS_AS(CovMatrix4::from_csv("1,2,3"), std::invalid_argument);
}
