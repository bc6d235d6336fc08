#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "padiff/schedule.hpp"

using namespace padiff;

TEST_CASE("linear schedule endpoints and derived tables") {
    NoiseSchedule s = linear_schedule(1000, 1e-4, 0.02);
    CHECK(s.beta_at(1) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(s.beta_at(1000) == doctest::Approx(0.02).epsilon(1e-12));
    CHECK(s.alpha_bar_at(1) == doctest::Approx(0.9999).epsilon(1e-12));

    // independent product oracle in extended precision
    long double prod = 1.0L;
    for (int t = 1; t <= 1000; ++t) {
        long double b = 1e-4L + (0.02L - 1e-4L) * (t - 1) / 999.0L;
        prod *= 1.0L - b;
    }
    CHECK(std::abs(s.alpha_bar_at(1000) - static_cast<double>(prod)) /
              static_cast<double>(prod) <
          1e-8);
    CHECK(s.alpha_bar_at(1000) == doctest::Approx(4.0e-5).epsilon(0.10));

    for (int t = 1; t <= 1000; ++t) {
        CHECK(s.sigma_at(t) == doctest::Approx(std::sqrt(s.beta_at(t))).epsilon(1e-12));
        if (t > 1) {
            CHECK(s.beta_at(t) >= s.beta_at(t - 1));
            CHECK(s.alpha_bar_at(t) < s.alpha_bar_at(t - 1));
        }
        CHECK(std::isfinite(s.alpha_bar_at(t)));
    }

    CHECK_THROWS_AS(linear_schedule(1, 1e-4, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(linear_schedule(10, 0.0, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(linear_schedule(10, 0.02, 1e-4), std::invalid_argument);
    CHECK_THROWS_AS(linear_schedule(10, 1e-4, 1.0), std::invalid_argument);
}

TEST_CASE("forward_sample closed form") {
    NoiseSchedule s = linear_schedule(1000, 1e-4, 0.02);
    Rng rng(3);
    ImageD x0 = rng.normal_image<double>(4, 4);
    ImageD zero = ImageD::Zero(4, 4);

    SUBCASE("t=1 with zero noise is sqrt(1-beta_1) x0") {
        ImageD xt = forward_sample(x0, 1, zero, s);
        CHECK(((xt - x0 * std::sqrt(0.9999)).abs() < 1e-12).all());
    }
    SUBCASE("zero signal leaves scaled noise") {
        ImageD eps = rng.normal_image<double>(4, 4);
        ImageD xt = forward_sample(zero, 700, eps, s);
        double c = std::sqrt(1.0 - s.alpha_bar_at(700));
        CHECK(((xt - eps * c).abs() < 1e-12).all());
    }
    SUBCASE("shape mismatch rejected") {
        CHECK_THROWS_AS(forward_sample(x0, 1, ImageD(ImageD::Zero(3, 3)), s),
                        std::invalid_argument);
        CHECK_THROWS_AS(forward_sample(x0, 0, zero, s), std::invalid_argument);
        CHECK_THROWS_AS(forward_sample(x0, 1001, zero, s), std::invalid_argument);
    }
}

TEST_CASE("stepwise chain matches the closed-form marginal (Monte Carlo)") {
    NoiseSchedule s = linear_schedule(1000, 1e-4, 0.02);
    const int t_target = 50;
    const int trials = 10000;
    Rng rng(17);
    double x0 = 0.8;

    double sum_step = 0, sumsq_step = 0, sum_closed = 0, sumsq_closed = 0;
    for (int i = 0; i < trials; ++i) {
        double x = x0;
        for (int t = 1; t <= t_target; ++t)
            x = std::sqrt(1.0 - s.beta_at(t)) * x + std::sqrt(s.beta_at(t)) * rng.normal();
        sum_step += x;
        sumsq_step += x * x;

        ImageD x0img = ImageD::Constant(1, 1, x0);
        ImageD eps = ImageD::Constant(1, 1, rng.normal());
        double xc = forward_sample(x0img, t_target, eps, s)(0, 0);
        sum_closed += xc;
        sumsq_closed += xc * xc;
    }
    double ab = s.alpha_bar_at(t_target);
    double mean_exp = std::sqrt(ab) * x0;
    double var_exp = 1.0 - ab;

    auto check_moments = [&](double sum, double sumsq) {
        double mean = sum / trials;
        double var = sumsq / trials - mean * mean;
        double se_mean = std::sqrt(var_exp / trials);
        double se_var = var_exp * std::sqrt(2.0 / (trials - 1));
        CHECK(std::abs(mean - mean_exp) < 3 * se_mean);
        CHECK(std::abs(var - var_exp) < 3 * se_var);
    };
    check_moments(sum_step, sumsq_step);
    check_moments(sum_closed, sumsq_closed);
}

TEST_CASE("reverse_step formula") {
    NoiseSchedule s = linear_schedule(1000, 1e-4, 0.02);
    Rng rng(9);
    ImageD x = rng.normal_image<double>(3, 3);
    ImageD zero = ImageD::Zero(3, 3);

    SUBCASE("zeroed noise terms") {
        ImageD out = reverse_step(x, 5, zero, zero, s);
        CHECK(((out - x / std::sqrt(1.0 - s.beta_at(5))).abs() < 1e-14).all());
    }
    SUBCASE("z coefficient is sqrt(beta_t)") {
        ImageD z = ImageD::Constant(3, 3, 1.0);
        ImageD a = reverse_step(x, 7, zero, zero, s);
        ImageD b = reverse_step(x, 7, zero, z, s);
        CHECK(((b - a - std::sqrt(s.beta_at(7))).abs() < 1e-14).all());
    }
    SUBCASE("dual implementation at t=2") {
        ImageD eps_hat = rng.normal_image<double>(3, 3);
        ImageD z = rng.normal_image<double>(3, 3);
        ImageD got = reverse_step(x, 2, eps_hat, z, s);
        // scalar re-implementation straight from the update rule
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                double b = s.beta_at(2), ab = s.alpha_bar_at(2);
                double want = (x(r, c) - b / std::sqrt(1.0 - ab) * eps_hat(r, c)) /
                                  std::sqrt(1.0 - b) +
                              std::sqrt(b) * z(r, c);
                CHECK(std::abs(got(r, c) - want) < 1e-6);
            }
    }
    SUBCASE("t=0 rejected") {
        CHECK_THROWS_AS(reverse_step(x, 0, zero, zero, s), std::invalid_argument);
    }
}

TEST_CASE("one-step inversion at t=1") {
    // At t=1 the reverse coefficient on eps equals sqrt(beta_1), so
    // reversing a single stepwise transition with the true noise and
    // z=0 recovers x0 exactly. (For t>1 the reverse update targets the
    // total accumulated noise, not the per-step one.)
    NoiseSchedule s = linear_schedule(1000, 1e-4, 0.02);
    Rng rng(21);
    ImageD x0 = rng.normal_image<double>(4, 4);
    ImageD eps = rng.normal_image<double>(4, 4);
    ImageD x1 = x0 * std::sqrt(1.0 - s.beta_at(1)) + eps * std::sqrt(s.beta_at(1));
    ImageD back = reverse_step(x1, 1, eps, ImageD(ImageD::Zero(4, 4)), s);
    CHECK(((back - x0).abs() < 1e-5).all());
}

TEST_CASE("training_loss") {
    Rng rng(30);
    ImageD eps = rng.normal_image<double>(6, 6);

    CHECK(training_loss(eps, eps) == doctest::Approx(0.0));

    ImageD zero = ImageD::Zero(6, 6);
    ImageD c = ImageD::Constant(6, 6, 0.7);
    CHECK(training_loss(zero, c) == doctest::Approx(0.49).epsilon(1e-12));

    SUBCASE("brute-force oracle") {
        ImageD a = rng.normal_image<double>(5, 7);
        ImageD b = rng.normal_image<double>(5, 7);
        double acc = 0;
        for (int r = 0; r < 5; ++r)
            for (int col = 0; col < 7; ++col) {
                double d = a(r, col) - b(r, col);
                acc += d * d;
            }
        CHECK(std::abs(training_loss(a, b) - acc / 35.0) < 1e-7);

        double acc1 = 0;
        for (int r = 0; r < 5; ++r)
            for (int col = 0; col < 7; ++col) acc1 += std::abs(a(r, col) - b(r, col));
        CHECK(std::abs(training_loss(a, b, LossNorm::l1) - acc1 / 35.0) < 1e-7);
    }
    SUBCASE("shape mismatch rejected") {
        CHECK_THROWS_AS(training_loss(eps, ImageD(ImageD::Zero(5, 5))), std::invalid_argument);
    }
}
