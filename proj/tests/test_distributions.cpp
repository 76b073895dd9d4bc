#include <catch2/catch_amalgamated.hpp>

#include "paneltobit/distributions.hpp"

using namespace paneltobit;

namespace {

// two-sample Kolmogorov-Smirnov p-value (asymptotic)
double ks_two_sample_p(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = a.size(), nb = b.size();
    std::size_t i = 0, j = 0;
    double d = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        d = std::max(d, std::fabs(i / na - j / nb));
    }
    const double en = std::sqrt(na * nb / (na + nb));
    const double lam = (en + 0.12 + 0.11 / en) * d;
    double p = 0;
    for (int k = 1; k <= 100; ++k) p += 2 * std::pow(-1.0, k - 1) * std::exp(-2.0 * k * k * lam * lam);
    return std::clamp(p, 0.0, 1.0);
}

}  // namespace

TEST_CASE("truncated normal at the origin has mean -sqrt(2/pi)", "[distributions]") {
    RngStream rng = RngStream::from(1, {0});
    const int n = 1000000;
    double s = 0;
    for (int i = 0; i < n; ++i) s += draw_truncated_normal_neg(0.0, 1.0, rng);
    CHECK(s / n == Catch::Approx(-std::sqrt(2.0 / M_PI)).margin(0.003));
}

TEST_CASE("truncated normal with deeply negative mean is nearly untruncated", "[distributions]") {
    RngStream rng = RngStream::from(2, {0});
    const int n = 200000;
    double s = 0, mx = -1e300;
    for (int i = 0; i < n; ++i) {
        const double d = draw_truncated_normal_neg(-50.0, 1.0, rng);
        s += d;
        mx = std::max(mx, d);
    }
    CHECK(mx <= 0.0);
    CHECK(s / n == Catch::Approx(-50.0).margin(0.01));
}

TEST_CASE("truncated normal deep-tail path matches the analytic tail mean", "[distributions]") {
    // mean 10, sd 1 truncated to y <= 0: tail mean = 10 - phi(-10)/Phi(-10)
    const double ratio = normal_pdf(-10.0) / normal_cdf(-10.0);
    const double expect = 10.0 - ratio;
    RngStream rng = RngStream::from(3, {0});
    const int n = 100000;
    double s = 0;
    for (int i = 0; i < n; ++i) {
        const double d = draw_truncated_normal_neg(10.0, 1.0, rng);
        REQUIRE(d <= 0.0);
        REQUIRE(std::isfinite(d));
        s += d;
    }
    CHECK(s / n == Catch::Approx(expect).margin(3.0 * 0.1 / std::sqrt(n)));
}

TEST_CASE("truncated mvn in dimension 1 reduces to the univariate sampler", "[distributions]") {
    const int n = 100000;
    std::vector<double> uni(n), mvn(n);
    RngStream r1 = RngStream::from(4, {0});
    RngStream r2 = RngStream::from(5, {0});
    TruncatedMvnSpec spec;
    spec.mean = Eigen::VectorXd::Constant(1, 0.8);
    spec.cov = Eigen::MatrixXd::Constant(1, 1, 2.25);
    for (int i = 0; i < n; ++i) {
        uni[i] = draw_truncated_normal_neg(0.8, 1.5, r1);
        mvn[i] = draw_truncated_mvn_neg(spec, r2)[0];
    }
    CHECK(ks_two_sample_p(uni, mvn) > 0.01);
}

TEST_CASE("independent bivariate truncation reduces to univariate margins", "[distributions]") {
    TruncatedMvnSpec spec;
    spec.mean = Eigen::VectorXd::Zero(2);
    spec.cov = Eigen::MatrixXd::Identity(2, 2);
    RngStream rng = RngStream::from(6, {0});
    const int n = 100000;
    Eigen::Vector2d s = Eigen::Vector2d::Zero();
    for (int i = 0; i < n; ++i) s += draw_truncated_mvn_neg(spec, rng);
    CHECK(s[0] / n == Catch::Approx(-std::sqrt(2.0 / M_PI)).margin(0.01));
    CHECK(s[1] / n == Catch::Approx(-std::sqrt(2.0 / M_PI)).margin(0.01));
}

TEST_CASE("correlated truncated mvn matches a rejection oracle", "[distributions]") {
    TruncatedMvnSpec spec;
    spec.mean = Eigen::VectorXd::Zero(2);
    spec.cov.resize(2, 2);
    spec.cov << 1.0, 0.9, 0.9, 1.0;

    const int n = 60000;
    RngStream rng = RngStream::from(7, {0});
    Eigen::Vector2d mean_g = Eigen::Vector2d::Zero();
    Eigen::Matrix2d sec_g = Eigen::Matrix2d::Zero();
    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd d = draw_truncated_mvn_neg(spec, rng);
        mean_g += d;
        sec_g += d * d.transpose();
    }
    mean_g /= n;
    sec_g /= n;

    // brute-force rejection from the untruncated joint
    RngStream orc = RngStream::from(8, {0});
    const Eigen::MatrixXd L = spec.cov.llt().matrixL();
    Eigen::Vector2d mean_r = Eigen::Vector2d::Zero();
    Eigen::Matrix2d sec_r = Eigen::Matrix2d::Zero();
    int kept = 0;
    while (kept < n) {
        Eigen::Vector2d z(orc.normal(), orc.normal());
        Eigen::Vector2d y = L * z;
        if (y[0] <= 0 && y[1] <= 0) {
            mean_r += y;
            sec_r += y * y.transpose();
            ++kept;
        }
    }
    mean_r /= n;
    sec_r /= n;

    const double se = 3.0 * std::sqrt(2.0 / n);  // generous bound on both samplers
    for (int k = 0; k < 2; ++k) CHECK(mean_g[k] == Catch::Approx(mean_r[k]).margin(se));
    CHECK(sec_g(0, 1) == Catch::Approx(sec_r(0, 1)).margin(se));
    CHECK(sec_g(0, 0) == Catch::Approx(sec_r(0, 0)).margin(se));
}

TEST_CASE("truncated samplers never return positive values", "[distributions]") {
    RngStream rng = RngStream::from(9, {0});
    for (int i = 0; i < 20000; ++i) {
        CHECK(draw_truncated_normal_neg(3.0 * rng.normal(), 0.1 + rng.uniform(), rng) <= 0.0);
    }
}

TEST_CASE("nig draw moments", "[distributions]") {
    // sigma2 ~ IG(3, 2 tau): mean tau, variance tau^2
    const double tau = 1.7;
    NIGParams p = NIGParams::scalar(0.0, 2.0, 3.0, 2.0 * tau);
    RngStream rng = RngStream::from(10, {0});
    const int n = 1000000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double d = rng.inverse_gamma(p.a, p.b);
        s += d;
        s2 += d * d;
    }
    CHECK(s / n == Catch::Approx(tau).epsilon(0.01));

    // a=3, b=4: mean 2, variance 4
    CHECK(4.0 / (3.0 - 1.0) == Catch::Approx(2.0));
    CHECK(std::pow(4.0 / 2.0, 2) / (3.0 - 2.0) == Catch::Approx(4.0));
    RngStream rng2 = RngStream::from(11, {0});
    double m = 0, v = 0;
    const int n2 = 2000000;
    for (int i = 0; i < n2; ++i) {
        const double d = rng2.inverse_gamma(3.0, 4.0);
        m += d;
        v += d * d;
    }
    m /= n2;
    CHECK(m == Catch::Approx(2.0).margin(0.02));
    CHECK(v / n2 - m * m == Catch::Approx(4.0).margin(0.3));
}

TEST_CASE("nig degenerate scale pins theta at the location", "[distributions]") {
    NIGParams p = NIGParams::scalar(1.25, 1e-20, 3.0, 2.0);
    RngStream rng = RngStream::from(12, {0});
    for (int i = 0; i < 100; ++i) {
        const NIGDraw d = draw_nig(p, rng);
        CHECK(d.theta[0] == Catch::Approx(1.25).margin(1e-8));
    }
}

TEST_CASE("mniw marginal moments match the IW mean formula", "[distributions]") {
    // nu=7, S=4*diag(tau_l, tau_y): E[Sigma] = S/(7-2-1) = diag(tau_l, tau_y)
    MNIWParams p;
    p.M = Eigen::MatrixXd::Zero(1, 2);
    p.V = Eigen::MatrixXd::Identity(1, 1) * 5.0;
    p.nu = 7.0;
    p.S.resize(2, 2);
    const double tau_l = 1.0, tau_y = 2.5;
    p.S << 4.0 * tau_l, 0.0, 0.0, 4.0 * tau_y;

    RngStream rng = RngStream::from(13, {0});
    const int n = 200000;
    Eigen::Matrix2d s = Eigen::Matrix2d::Zero();
    double s11 = 0;
    for (int i = 0; i < n; ++i) {
        const MNIWDraw d = draw_mniw(p, rng);
        s += d.Sigma;
        s11 += d.Sigma(0, 0);
    }
    CHECK(s(0, 0) / n == Catch::Approx(tau_l).epsilon(0.015));
    CHECK(s(1, 1) / n == Catch::Approx(tau_y).epsilon(0.015));
    CHECK(s(0, 1) / n == Catch::Approx(0.0).margin(0.01));
    // (1,1) marginal of IW(7, 4D) corresponds to IG(3, 2 tau_l): mean tau_l
    CHECK(s11 / n == Catch::Approx(tau_l).epsilon(0.015));
}

TEST_CASE("mniw degenerate row covariance pins Phi at M", "[distributions]") {
    MNIWParams p;
    p.M = Eigen::MatrixXd::Constant(2, 2, 0.7);
    p.V = Eigen::MatrixXd::Identity(2, 2) * 1e-20;
    p.nu = 7.0;
    p.S = Eigen::MatrixXd::Identity(2, 2);
    RngStream rng = RngStream::from(14, {0});
    for (int i = 0; i < 50; ++i) {
        const MNIWDraw d = draw_mniw(p, rng);
        CHECK((d.Phi.array() - 0.7).abs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("stick breaking basics", "[distributions]") {
    RngStream rng = RngStream::from(15, {0});
    // K = 1 collapses to a point mass
    CHECK(draw_tsb_prior(1.0, 1, rng).pi[0] == 1.0);

    // tiny alpha concentrates on the first stick
    const Eigen::VectorXd pi = draw_tsb_prior(1e-8, 5, rng).pi;
    CHECK(pi[0] > 0.999);

    // alpha = 2: E[pi_1] = 1/3
    const int n = 1000000;
    double s = 0;
    for (int i = 0; i < n; ++i) s += draw_tsb_prior(2.0, 4, rng).pi[0];
    CHECK(s / n == Catch::Approx(1.0 / 3.0).margin(0.01));
}

TEST_CASE("stick-breaking weights sum to one and stay nonnegative", "[distributions]") {
    RngStream rng = RngStream::from(16, {0});
    for (int rep = 0; rep < 2000; ++rep) {
        const double alpha = 0.01 + 5.0 * rng.uniform();
        const int K = 1 + static_cast<int>(rng.uniform() * 25);
        const Eigen::VectorXd pi = draw_tsb_prior(alpha, K, rng).pi;
        REQUIRE(pi.size() == K);
        REQUIRE((pi.array() >= 0.0).all());
        REQUIRE(std::fabs(pi.sum() - 1.0) < 1e-12);
    }
}

TEST_CASE("samplers are reproducible under a fixed stream", "[distributions]") {
    TruncatedMvnSpec spec;
    spec.mean = Eigen::VectorXd::Constant(3, -0.2);
    spec.cov = Eigen::MatrixXd::Identity(3, 3);
    spec.cov(0, 1) = spec.cov(1, 0) = 0.4;
    RngStream a = RngStream::from(99, {1});
    RngStream b = RngStream::from(99, {1});
    const Eigen::VectorXd da = draw_truncated_mvn_neg(spec, a);
    const Eigen::VectorXd db = draw_truncated_mvn_neg(spec, b);
    REQUIRE((da - db).norm() == 0.0);
}
