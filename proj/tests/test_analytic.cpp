#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <gtest/gtest.h>

#include "irslab/analytic.hpp"
#include "irslab/random.hpp"
#include "irslab/units.hpp"

using namespace irslab;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

template <class F>
double integrate(F f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-13);
}

double rayleigh_pdf(double x, double xi) { return x <= 0.0 ? 0.0 : x / xi * std::exp(-x * x / (2.0 * xi)); }

// Truncated Gaussian written from scratch; normalizer by quadrature.
struct TruncGauss {
    double mu, s2, norm;
    TruncGauss(double mu_, double s2_) : mu(mu_), s2(s2_) {
        norm = integrate([&](double y) { return raw(y); }, 0.0, mu + 40.0 * std::sqrt(s2));
    }
    double raw(double y) const { return std::exp(-(y - mu) * (y - mu) / (2.0 * s2)); }
    double pdf(double y) const { return y < 0.0 ? 0.0 : raw(y) / norm; }
    double cdf(double y) const {
        if (y <= 0.0) return 0.0;
        return integrate([&](double t) { return raw(t); }, 0.0, y) / norm;
    }
};

double pdf_R_oracle(double x, double xi, const TruncGauss& y) {
    if (x <= 0.0) return 0.0;
    return integrate([&](double u) { return rayleigh_pdf(u, xi) * y.pdf(x - u); }, 0.0, x);
}

// P(lambda + Y <= x) = integral of f_lambda(u) F_Y(x - u) over [0, x], with
// F_Y in closed form through erfc (no library code under test).
double cdf_R_oracle(double x, double xi, double mu, double s2) {
    if (x <= 0.0) return 0.0;
    const double s = std::sqrt(s2);
    const double z0 = 0.5 * std::erfc(mu / (s * std::sqrt(2.0)));  // P(N < 0)
    auto fy = [&](double y) { return (0.5 * std::erfc(-(y - mu) / (s * std::sqrt(2.0))) - z0) / (1.0 - z0); };
    return integrate([&](double u) { return rayleigh_pdf(u, xi) * fy(x - u); }, 0.0, x);
}

struct Params {
    double xi_u, mu_y, sigma2_y;
};

const std::vector<Params> kParams{
    {1.0, 3.0, 0.8}, {0.3, 0.5, 1.0}, {2.0, 20.0, 2.0}, {0.05, 5.0, 0.5}, {4.0, 1.0, 0.2}, {0.8, 0.0, 1.5},
};

std::vector<double> sample_points(const CltMoments& m, int count = 50) {
    const double hi = m.mu_y + m.mu_u + 8.0 * (m.sigma_y() + std::sqrt(m.xi_u));
    std::vector<double> xs;
    for (int i = 1; i <= count; ++i) xs.push_back(hi * i / (count + 0.5));
    return xs;
}

LinkGains gains(double xi_u, double xi_h, double xi_g) {
    LinkGains g;
    g.zeta_u = {2.0 * xi_u};
    g.zeta_h = {2.0 * xi_h};
    g.zeta_g = 2.0 * xi_g;
    g.update_aggregates();
    return g;
}

}  // namespace

TEST(CltMoments, SingleElement) {
    const auto m = clt_moments(gains(1.0, 1.0, 1.0), ReflectionConfig::uniform(1, 1.0));
    EXPECT_NEAR(m.mu_y, kPi / 2, 1e-15);
    EXPECT_NEAR(m.sigma2_y, (16.0 - kPi * kPi) / 4.0, 1e-15);
    EXPECT_GE(m.psi, 1.0);
    EXPECT_LE(m.psi, 2.0);
    EXPECT_GT(m.a, 0.0);
    EXPECT_NEAR(m.mu_u, std::sqrt(kPi / 2), 1e-15);
}

TEST(CltMoments, Linearity) {
    const auto g = gains(0.4, 0.7, 0.2);
    const auto one = clt_moments(g, ReflectionConfig::uniform(1, 0.9));
    const auto hundred = clt_moments(g, ReflectionConfig::uniform(100, 0.9));
    EXPECT_NEAR(hundred.mu_y / one.mu_y, 100.0, 1e-12);
    EXPECT_NEAR(hundred.sigma2_y / one.sigma2_y, 100.0, 1e-12);
}

TEST(CltMoments, Errors) {
    EXPECT_THROW(clt_moments(gains(1, 1, 1), ReflectionConfig{}), std::invalid_argument);
    EXPECT_THROW(make_clt_moments(0.0, 1.0, 1.0), std::invalid_argument);
    EXPECT_THROW(make_clt_moments(1.0, 1.0, 0.0), std::invalid_argument);
    EXPECT_THROW(SnrDistribution(make_clt_moments(1, 1, 1), 0.0), std::invalid_argument);
}

TEST(PdfY, NormalizationAndPeak) {
    for (const auto& p : kParams) {
        const auto m = make_clt_moments(p.xi_u, p.mu_y, p.sigma2_y);
        EXPECT_EQ(pdf_Y(-0.1, m), 0.0);
        const double total = integrate([&](double y) { return pdf_Y(y, m); }, 0.0, m.mu_y + 40.0 * m.sigma_y());
        EXPECT_NEAR(total, 1.0, 1e-9);
        EXPECT_NEAR(pdf_Y(m.mu_y, m), m.psi / std::sqrt(2.0 * kPi * m.sigma2_y), 1e-15);
        const TruncGauss oracle(p.mu_y, p.sigma2_y);
        for (double y : {0.1, 0.5 * p.mu_y + 0.2, p.mu_y + 1.0}) EXPECT_NEAR(cdf_Y(y, m), oracle.cdf(y), 1e-12);
    }
}

TEST(PdfR, MatchesConvolution) {
    for (const auto& p : kParams) {
        const auto m = make_clt_moments(p.xi_u, p.mu_y, p.sigma2_y);
        const TruncGauss y(p.mu_y, p.sigma2_y);
        for (double x : sample_points(m)) {
            EXPECT_NEAR(pdf_R(x, m), pdf_R_oracle(x, p.xi_u, y), 1e-8)
                << "xi=" << p.xi_u << " mu=" << p.mu_y << " s2=" << p.sigma2_y << " x=" << x;
        }
    }
}

TEST(PdfR, IntegratesToOneAndVanishes) {
    for (const auto& p : kParams) {
        const auto m = make_clt_moments(p.xi_u, p.mu_y, p.sigma2_y);
        const double hi = m.mu_y + 40.0 * (m.sigma_y() + std::sqrt(m.xi_u));
        EXPECT_NEAR(integrate([&](double x) { return pdf_R(x, m); }, 0.0, hi), 1.0, 1e-6);
        EXPECT_EQ(pdf_R(-1.0, m), 0.0);
        EXPECT_LT(pdf_R(hi, m), 1e-12);
        for (double x : sample_points(m, 200)) EXPECT_GE(pdf_R(x, m), 0.0);
    }
}

TEST(PdfR, NegligibleDirectLinkReducesToY) {
    const auto m = make_clt_moments(1e-10, 4.0, 1.0);
    for (double x : {1.0, 3.0, 4.0, 5.5, 8.0}) EXPECT_NEAR(pdf_R(x, m), pdf_Y(x, m), 1e-4);
}

TEST(PdfR, ExtremeArgumentsStayFinite) {
    const auto m = make_clt_moments(0.01, 200.0, 0.05);
    for (double x : {1e-8, 1.0, 150.0, 199.9, 200.1, 300.0, 1e6}) {
        EXPECT_TRUE(std::isfinite(pdf_R(x, m))) << x;
        EXPECT_TRUE(std::isfinite(cdf_R(x, m))) << x;
    }
}

TEST(CdfR, MatchesIndependentQuadrature) {
    for (const auto& p : kParams) {
        const auto m = make_clt_moments(p.xi_u, p.mu_y, p.sigma2_y);
        for (double x : sample_points(m)) {
            EXPECT_NEAR(cdf_R(x, m), cdf_R_oracle(x, p.xi_u, p.mu_y, p.sigma2_y), 1e-6) << x;
            const double own = integrate([&](double t) { return pdf_R(t, m); }, 0.0, x);
            EXPECT_NEAR(cdf_R(x, m), own, 1e-6) << x;
        }
    }
}

TEST(CdfR, MonotoneWithLimits) {
    for (const auto& p : kParams) {
        const auto m = make_clt_moments(p.xi_u, p.mu_y, p.sigma2_y);
        EXPECT_EQ(cdf_R(0.0, m), 0.0);
        EXPECT_EQ(cdf_R(-1e10, m), 0.0);
        EXPECT_EQ(cdf_R(kInf, m), 1.0);
        EXPECT_NEAR(cdf_R(1e10, m), 1.0, 1e-15);
        double prev = 0.0;
        for (double x : sample_points(m, 1000)) {
            const double c = cdf_R(x, m);
            EXPECT_GE(c, prev - 1e-15);
            prev = c;
        }
    }
}

TEST(CdfR, MatchesSampling) {
    // lambda_u + Ytilde drawn directly: Rayleigh by inverse CDF, truncated
    // Gaussian by rejection.
    const Params p{0.9, 2.0, 1.1};
    const auto m = make_clt_moments(p.xi_u, p.mu_y, p.sigma2_y);
    Xoshiro256 rng(77);
    const int n = 1000000;
    std::vector<double> r;
    r.reserve(n);
    while (static_cast<int>(r.size()) < n) {
        const double y = p.mu_y + std::sqrt(p.sigma2_y) * standard_normal(rng);
        if (y < 0.0) continue;
        r.push_back(rayleigh(rng, p.xi_u) + y);
    }
    std::sort(r.begin(), r.end());
    double ks = 0.0;
    for (int i = 0; i < n; ++i) {
        const double f = cdf_R(r[i], m);
        ks = std::max({ks, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
    }
    EXPECT_LE(ks, 0.005);
}

TEST(SnrTransform, ChangeOfVariables) {
    const auto m = make_clt_moments(1.0, 3.0, 0.8);
    const SnrDistribution d(m, 0.5);
    EXPECT_EQ(cdf_snr(0.0, d), cdf_R(0.0, m));
    EXPECT_THROW(cdf_snr(-1.0, d), std::invalid_argument);
    EXPECT_THROW(pdf_snr(-1.0, d), std::invalid_argument);
    for (double y : {0.3, 2.0, 7.0}) EXPECT_DOUBLE_EQ(cdf_snr(y, d), cdf_R(std::sqrt(y / 0.5), m));
    // Singular at 0 like y^{-1/2}; tanh-sinh handles the endpoint.
    boost::math::quadrature::tanh_sinh<double> ts;
    const double total = ts.integrate([&](double y) { return pdf_snr(y, d); }, 0.0, 400.0, 1e-10);
    EXPECT_NEAR(total, 1.0, 1e-6);
}

TEST(Outage, LimitsAndMonotonicity) {
    const auto m = make_clt_moments(1.0, 2.0, 0.8);
    EXPECT_EQ(outage(0.0, SnrDistribution(m, 1.0)), 0.0);
    EXPECT_NEAR(outage(1e12, SnrDistribution(m, 1.0)), 1.0, 1e-12);
    double prev = 1.0;
    for (double gdb = -30.0; gdb <= 30.0; gdb += 0.5) {
        const double o = outage(1.0, SnrDistribution(m, db_to_linear(gdb)));
        EXPECT_LE(o, prev + 1e-15);
        prev = o;
    }
    prev = 0.0;
    for (double th = 0.0; th <= 100.0; th += 0.5) {
        const double o = outage(th, SnrDistribution(m, 1.0));
        EXPECT_GE(o, prev - 1e-15);
        prev = o;
    }
}

TEST(Outage, InverseForTarget) {
    for (const auto& p : kParams) {
        const auto m = make_clt_moments(p.xi_u, p.mu_y, p.sigma2_y);
        for (double target : {1e-4, 1e-2, 0.3}) {
            const double gbar = gbar_for_outage(target, 1.0, m);
            EXPECT_NEAR(outage(1.0, SnrDistribution(m, gbar)) / target, 1.0, 1e-8);
        }
    }
    EXPECT_THROW(gbar_for_outage(0.0, 1.0, make_clt_moments(1, 1, 1)), std::invalid_argument);
}

TEST(Moments, LambdaU) {
    EXPECT_DOUBLE_EQ(moment_lambda_u(0, 3.0), 1.0);
    EXPECT_NEAR(moment_lambda_u(2, 1.0), 2.0, 1e-15);
    for (unsigned n = 1; n <= 4; ++n) {
        for (double xi : {0.7, 2.3}) {
            const double q = integrate([&](double x) { return std::pow(x, n) * rayleigh_pdf(x, xi); }, 0.0,
                                       60.0 * std::sqrt(xi));
            EXPECT_NEAR(moment_lambda_u(n, xi) / q, 1.0, 1e-10) << n << ' ' << xi;
        }
    }
}

TEST(Moments, TruncatedY) {
    for (const auto& p : kParams) {
        const auto m = make_clt_moments(p.xi_u, p.mu_y, p.sigma2_y);
        const TruncGauss y(p.mu_y, p.sigma2_y);
        EXPECT_NEAR(moment_Y_trunc(0, m), 1.0, 1e-9);
        for (unsigned n = 1; n <= 4; ++n) {
            const double q =
                integrate([&](double t) { return std::pow(t, n) * y.pdf(t); }, 0.0, p.mu_y + 40.0 * std::sqrt(p.sigma2_y));
            EXPECT_NEAR(moment_Y_trunc(n, m) / q, 1.0, 1e-8) << n;
        }
        // Second moment through the variance form.
        const double mean = moment_Y_trunc(1, m);
        const double var = integrate([&](double t) { return (t - mean) * (t - mean) * y.pdf(t); }, 0.0,
                                     p.mu_y + 40.0 * std::sqrt(p.sigma2_y));
        EXPECT_NEAR(moment_Y_trunc(2, m) / (var + mean * mean), 1.0, 1e-8);
    }
    EXPECT_NEAR(moment_Y_trunc(1, make_clt_moments(1.0, 50.0, 1.0)), 50.0, 1e-9);
    EXPECT_THROW(moment_Y_trunc(5, make_clt_moments(1, 1, 1)), std::invalid_argument);
}

TEST(RateBounds, Limits) {
    const auto m = make_clt_moments(1.0, 3.0, 0.8);
    EXPECT_NEAR(rate_upper(SnrDistribution(m, 1e-12)), 0.0, 1e-10);
    EXPECT_NEAR(rate_lower(SnrDistribution(m, 1e-12)), 0.0, 1e-10);
    // Vanishing randomness closes the Jensen gap.
    const auto tight = make_clt_moments(1e-9, 100.0, 1e-6);
    EXPECT_NEAR(rate_lower(SnrDistribution(tight, 10.0)), rate_upper(SnrDistribution(tight, 10.0)), 1e-6);
}

TEST(RateBounds, MeanSnrMatchesMoments) {
    const auto m = make_clt_moments(0.6, 4.0, 1.2);
    const SnrDistribution d(m, 2.0);
    // E[(lambda + Y)^2] for the untruncated Gaussian Y.
    const double second = 2.0 * 0.6 + 2.0 * m.mu_u * 4.0 + 16.0 + 1.2;
    EXPECT_NEAR(mean_snr(d), 2.0 * second, 1e-12);
    const SnrDistribution printed(m, 2.0, FormulaMode::AsPrinted);
    EXPECT_NEAR(mean_snr(printed), 2.0 * (second - 0.6 + m.mu_u * m.mu_u), 1e-12);
}

TEST(RateBounds, LowerBelowUpper) {
    Xoshiro256 rng(31);
    for (int i = 0; i < 1000; ++i) {
        const double xi = std::exp(uniform(rng, -6.0, 4.0));
        const double mu = std::exp(uniform(rng, -3.0, 5.0));
        const double s2 = std::exp(uniform(rng, -4.0, 4.0));
        const double gbar = std::exp(uniform(rng, -7.0, 7.0));
        const SnrDistribution d(make_clt_moments(xi, mu, s2), gbar);
        EXPECT_LE(rate_lower(d), rate_upper(d) + 1e-12) << xi << ' ' << mu << ' ' << s2 << ' ' << gbar;
    }
}

TEST(RateBounds, RateUpperNondecreasingInGbar) {
    const auto m = make_clt_moments(0.5, 2.0, 0.6);
    double prev = 0.0;
    for (double gdb = -20; gdb <= 20; gdb += 1) {
        const double r = rate_upper(SnrDistribution(m, db_to_linear(gdb)));
        EXPECT_GE(r, prev);
        prev = r;
    }
}

TEST(QuantizedBound, MonotoneInBitsAndBelowLimit) {
    // Moments must come from an actual element set: the bound relies on
    // mu^2 (16 - pi^2) >= pi^2 sigma^2, which holds for N >= 1.
    Xoshiro256 rng(41);
    for (int i = 0; i < 200; ++i) {
        const auto g = gains(std::exp(uniform(rng, -4, 2)), std::exp(uniform(rng, -3, 3)), std::exp(uniform(rng, -3, 3)));
        const auto n = static_cast<std::size_t>(1 + 200 * uniform01(rng));
        const SnrDistribution d(clt_moments(g, ReflectionConfig::uniform(n, uniform(rng, 0.05, 1.0))),
                                std::exp(uniform(rng, -5, 5)));
        const double limit = rate_upper(d);
        double prev = 0.0;
        for (int b = 1; b <= 12; ++b) {
            const double r = rate_upper_quantized(d, b);
            EXPECT_GE(r, prev - 1e-14);
            EXPECT_LE(r, limit + 1e-12);
            prev = r;
        }
        EXPECT_NEAR(rate_upper_quantized(d, 30), limit, 1e-9);
    }
    EXPECT_THROW(rate_upper_quantized(SnrDistribution(make_clt_moments(1, 1, 1), 1.0), 0), std::invalid_argument);
}

TEST(QuantizedBound, MatchesUniformErrorExpectation) {
    // E|lambda + sum c_n e^{j eps_n}|^2 for eps uniform on [-tau, tau),
    // evaluated with the exact Rayleigh-product moments.
    const double xi_u = 0.8, xi_g = 0.3, xi_h = 0.5, beta = 0.9;
    const int n = 16;
    const auto g = gains(xi_u, xi_h, xi_g);
    const auto m = clt_moments(g, ReflectionConfig::uniform(n, beta));
    for (int b : {1, 2, 3}) {
        const double tau = kPi / std::ldexp(1.0, b);
        const double s = std::sin(tau) / tau;
        const double ec = beta * kPi / 2.0 * std::sqrt(xi_g * xi_h);  // E[c]
        const double ec2 = beta * beta * 4.0 * xi_g * xi_h;          // E[c^2]
        const double mu_u = std::sqrt(kPi * xi_u / 2.0);
        const double expected = 2.0 * xi_u + 2.0 * mu_u * n * ec * s + n * ec2 + n * (n - 1.0) * ec * ec * s * s;
        const double arg = std::exp2(rate_upper_quantized(SnrDistribution(m, 1.0), b)) - 1.0;
        EXPECT_NEAR(arg / expected, 1.0, 1e-12) << b;
    }
}

TEST(DirectLink, ExactRateMatchesQuadrature) {
    for (double xi : {0.05, 0.7, 5.0}) {
        for (double gdb : {-20.0, 0.0, 20.0}) {
            const double gbar = db_to_linear(gdb);
            const double mean = 2.0 * xi * gbar;
            boost::math::quadrature::tanh_sinh<double> ts;
            const double q = ts.integrate([&](double y) { return std::log2(1.0 + y) * std::exp(-y / mean) / mean; },
                                          0.0, kInf, 1e-13);
            EXPECT_NEAR(direct_rate_exact(xi, gbar) / q, 1.0, 1e-9) << xi << ' ' << gdb;
            EXPECT_LE(direct_rate_exact(xi, gbar), direct_rate_upper(xi, gbar));
        }
    }
    // Asymptotic branch agrees with the series branch near the switch.
    const double z_lo = 49.9, z_hi = 50.1;
    EXPECT_NEAR(direct_rate_exact(1.0, 1.0 / (2.0 * z_lo)) / direct_rate_exact(1.0, 1.0 / (2.0 * z_hi)), z_hi / z_lo,
                2e-3);
}

TEST(DirectLink, OutageInverse) {
    const double g = direct_gbar_for_outage(0.01, 1.0, 0.8);
    EXPECT_NEAR(direct_cdf_snr(1.0, 0.8, g), 0.01, 1e-15);
}

TEST(Modes, ParseAndDiffer) {
    EXPECT_EQ(parse_formula_mode("as-printed"), FormulaMode::AsPrinted);
    EXPECT_EQ(parse_formula_mode("rederived"), FormulaMode::Rederived);
    EXPECT_THROW(parse_formula_mode("exact"), std::invalid_argument);
    EXPECT_EQ(to_string(FormulaMode::AsPrinted), "as-printed");
    const auto m = make_clt_moments(1.0, 3.0, 0.8);
    const SnrDistribution printed(m, 1.0, FormulaMode::AsPrinted);
    const SnrDistribution fixed(m, 1.0);
    EXPECT_TRUE(std::isfinite(pdf_snr(2.0, printed)));
    EXPECT_TRUE(std::isfinite(cdf_snr(2.0, printed)));
    EXPECT_TRUE(std::isfinite(rate_lower(printed)));
    EXPECT_NE(rate_upper(printed), rate_upper(fixed));
    EXPECT_NE(pdf_R(3.0, m, FormulaMode::AsPrinted), pdf_R(3.0, m));
}
