#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "padiff/metrics.hpp"
#include "padiff/stats.hpp"

#include <cmath>

using namespace padiff;

namespace {

// independent SSIM: naive loops, no shared code with the library
double ssim_brute(const ImageF& a, const ImageF& b, int w, double range) {
    double c1 = 0.01 * range * 0.01 * range;
    double c2 = 0.03 * range * 0.03 * range;
    double sum = 0;
    long count = 0;
    for (int r0 = 0; r0 + w <= a.rows(); ++r0)
        for (int c0 = 0; c0 + w <= a.cols(); ++c0) {
            double ma = 0, mb = 0;
            for (int r = 0; r < w; ++r)
                for (int c = 0; c < w; ++c) {
                    ma += a(r0 + r, c0 + c);
                    mb += b(r0 + r, c0 + c);
                }
            double n = static_cast<double>(w) * w;
            ma /= n;
            mb /= n;
            double va = 0, vb = 0, cov = 0;
            for (int r = 0; r < w; ++r)
                for (int c = 0; c < w; ++c) {
                    double da = a(r0 + r, c0 + c) - ma;
                    double db = b(r0 + r, c0 + c) - mb;
                    va += da * da;
                    vb += db * db;
                    cov += da * db;
                }
            va /= n;
            vb /= n;
            cov /= n;
            sum += (2 * ma * mb + c1) * (2 * cov + c2) /
                   ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return sum / count;
}

}  // namespace

TEST_CASE("psnr: closed-form and brute-force oracles") {
    ImageF a = ImageF::Constant(8, 8, 0.5f);
    ImageF b = a + 0.1f;
    // MSE = 0.01 -> 10 log10(1/0.01) = 20 dB
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-6));
    CHECK(std::isinf(psnr(a, a)));

    SUBCASE("random images against a naive MSE loop") {
        Rng rng(8);
        ImageF x = rng.normal_image<float>(12, 12).abs().min(1.0f);
        ImageF y = rng.normal_image<float>(12, 12).abs().min(1.0f);
        double mse = 0;
        for (int r = 0; r < 12; ++r)
            for (int c = 0; c < 12; ++c) {
                double d = static_cast<double>(x(r, c)) - y(r, c);
                mse += d * d;
            }
        mse /= 144.0;
        CHECK(psnr(x, y) == doctest::Approx(10 * std::log10(1.0 / mse)).epsilon(1e-9));
    }
    SUBCASE("range scaling adds 20 log10(range)") {
        Rng rng(9);
        ImageF x = rng.normal_image<float>(8, 8);
        ImageF y = rng.normal_image<float>(8, 8);
        CHECK(psnr(x, y, 2.0) ==
              doctest::Approx(psnr(x, y, 1.0) + 20 * std::log10(2.0)).epsilon(1e-9));
    }
    SUBCASE("preconditions") {
        CHECK_THROWS_AS(psnr(a, ImageF::Zero(4, 4)), std::invalid_argument);
        CHECK_THROWS_AS(psnr(a, b, 0.0), std::invalid_argument);
    }
}

TEST_CASE("ssim: identical images score 1") {
    Rng rng(10);
    ImageF x = rng.normal_image<float>(10, 10).abs().min(1.0f);
    CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("ssim: constant images follow the closed luminance form") {
    // zero variance: structure term is exactly 1, luminance term remains
    double mu_a = 0.3, mu_b = 0.7, c1 = 0.01 * 0.01;
    double expected = (2 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1);
    ImageF a = ImageF::Constant(9, 9, 0.3f);
    ImageF b = ImageF::Constant(9, 9, 0.7f);
    CHECK(ssim(a, b) == doctest::Approx(expected).epsilon(1e-5));
}

TEST_CASE("ssim: random images against a brute-force implementation") {
    Rng rng(11);
    ImageF x = rng.normal_image<float>(12, 12).abs().min(1.0f);
    ImageF y = (x + 0.3f * rng.normal_image<float>(12, 12)).min(1.0f).max(0.0f);
    for (int w : {3, 5, 7})
        CHECK(ssim(x, y, w) == doctest::Approx(ssim_brute(x, y, w, 1.0)).epsilon(1e-6));
}

TEST_CASE("ssim: preconditions") {
    ImageF a = ImageF::Zero(6, 6);
    CHECK_THROWS_AS(ssim(a, ImageF::Zero(5, 5)), std::invalid_argument);
    CHECK_THROWS_AS(ssim(a, a, 7), std::invalid_argument);  // window > image
    CHECK_THROWS_AS(ssim(a, a, 0), std::invalid_argument);
}

TEST_CASE("spearman: exact values") {
    CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
    CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
    CHECK(spearman({1, 2, 3, 4, 5, 6}, {2, 1, 4, 3, 6, 5}) ==
          doctest::Approx(0.8285714285714287).epsilon(1e-9));
    // tie-aware: scipy gives 0.9486832980505139 for this pair
    CHECK(spearman({1.0, 2.0, 2.0, 3.0}, {1.0, 2.0, 3.0, 4.0}) ==
          doctest::Approx(0.9486832980505139).epsilon(1e-9));
    CHECK_THROWS_AS(spearman({1, 1, 1}, {1, 2, 3}), std::invalid_argument);
}

TEST_CASE("incomplete beta and Student t p-values match reference values") {
    CHECK(incomplete_beta(1, 1, 0.37) == doctest::Approx(0.37).epsilon(1e-10));
    CHECK(incomplete_beta(1, 2, 0.25) ==
          doctest::Approx(1 - 0.75 * 0.75).epsilon(1e-10));
    CHECK(incomplete_beta(2, 3, 0.4) == doctest::Approx(0.5248).epsilon(1e-9));
    CHECK(student_t_p_value(2.0, 10) ==
          doctest::Approx(0.07338803477074039).epsilon(1e-8));
    CHECK(student_t_p_value(2.228, 10) ==
          doctest::Approx(0.050011771817111327).epsilon(1e-8));
    CHECK(student_t_p_value(-2.0, 10) ==
          doctest::Approx(student_t_p_value(2.0, 10)).epsilon(1e-12));
}

TEST_CASE("paired t-test against a reference implementation") {
    std::vector<double> a{1.2, 0.8, 1.5, 1.1, 0.9, 1.3};
    std::vector<double> b{1.0, 0.7, 1.2, 1.15, 0.85, 1.05};
    PairedTTest r = paired_t_test(a, b);
    CHECK(r.df == 5);
    CHECK(r.t_statistic == doctest::Approx(2.6294249557814227).epsilon(1e-9));
    CHECK(r.p_value == doctest::Approx(0.04656552254803445).epsilon(1e-7));

    SUBCASE("degenerate cases") {
        PairedTTest same = paired_t_test(a, a);
        CHECK(same.p_value == doctest::Approx(1.0));
        std::vector<double> shifted(a);
        for (double& v : shifted) v += 0.5;
        PairedTTest shift = paired_t_test(shifted, a);
        CHECK(shift.p_value == doctest::Approx(0.0));
        CHECK_THROWS_AS(paired_t_test(a, std::vector<double>{1.0}), std::invalid_argument);
    }
}

TEST_CASE("correlate_confidence: corruption tied to low confidence yields high rank correlation") {
    // restored = target where confidence is high, noisy where it is low
    Rng rng(21);
    std::vector<ImageF> targets, confs, restored;
    const int size = 24;
    for (int i = 0; i < 6; ++i) {
        ImageF target = rng.normal_image<float>(size, size).abs().min(1.0f);
        ImageF conf = ImageF::Zero(size, size);
        for (int r = 0; r < size; ++r)
            for (int c = 0; c < size; ++c)
                conf(r, c) = 0.2f + 0.8f * static_cast<float>(c) / (size - 1);
        ImageF noise = rng.normal_image<float>(size, size);
        restored.push_back(clip01(ImageF(target + noise * (1.0f - conf) * 0.6f)));
        targets.push_back(std::move(target));
        confs.push_back(std::move(conf));
    }
    CorrelationResult r = correlate_confidence(restored, targets, confs, 5, 10, 200, 3);
    REQUIRE(r.spearman_defined);
    CHECK(r.spearman > 0.8);
    long total = 0;
    for (const CorrelationBin& b : r.bins) total += b.n_windows;
    CHECK(total == 6 * 200);

    SUBCASE("bin means are stable across window-sampling seeds") {
        CorrelationResult r2 =
            correlate_confidence(restored, targets, confs, 5, 10, 200, 99);
        REQUIRE(r2.spearman_defined);
        CHECK(r2.spearman > 0.8);
        for (size_t b = 0; b < r.bins.size(); ++b)
            if (r.bins[b].n_windows >= 50 && r2.bins[b].n_windows >= 50)
                CHECK(std::abs(r.bins[b].mean_ssim - r2.bins[b].mean_ssim) < 0.1);
    }
    SUBCASE("constant confidence occupies one bin and is flagged undefined") {
        for (ImageF& c : confs) c.setConstant(1.0f);
        CorrelationResult deg = correlate_confidence(restored, targets, confs, 5, 10, 50, 0);
        CHECK(!deg.spearman_defined);
        CHECK(deg.populated_bins == 1);
        long gaps = 0;
        for (const CorrelationBin& b : deg.bins)
            if (b.n_windows == 0) ++gaps;
        CHECK(gaps == 9);  // empty bins reported, not erased
    }
    SUBCASE("preconditions") {
        CHECK_THROWS_AS(correlate_confidence({}, targets, confs, 5, 10, 10, 0),
                        std::invalid_argument);
        CHECK_THROWS_AS(correlate_confidence(restored, targets, confs, 40, 10, 10, 0),
                        std::invalid_argument);
    }
}

TEST_CASE("evaluate + aggregate on the baseline method") {
    Rng rng(31);
    std::vector<PairedSample> samples;
    for (int i = 0; i < 3; ++i) {
        VesselPhantom ph = generate_phantom(200 + i, 16, 3);
        Rng srng = Rng::with_stream(41, static_cast<uint64_t>(i));
        samples.push_back(make_sample(ph, 3, 8, 0.15, i, srng));
    }
    SamplerModels models;
    NoiseSchedule schedule = linear_schedule(10, 1e-4, 0.02);
    EvalMethod m;
    m.name = "baseline";
    m.mode = SampleMode::baseline;

    std::vector<std::vector<ImageF>> outputs;
    std::vector<EvalRow> rows = evaluate(models, schedule, samples, {m}, 7, &outputs);
    REQUIRE(rows.size() == 3);
    REQUIRE(outputs.size() == 1);
    REQUIRE(outputs[0].size() == 3);
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].sample_id == static_cast<int>(i));
        CHECK(rows[i].method == "baseline");
        // rows must agree with metrics recomputed from the captured outputs
        CHECK(rows[i].psnr_db ==
              doctest::Approx(psnr(outputs[0][i], samples[i].target)).epsilon(1e-12));
        CHECK(rows[i].ssim ==
              doctest::Approx(ssim(outputs[0][i], samples[i].target)).epsilon(1e-12));
    }

    std::vector<MethodAggregate> aggs = aggregate(rows);
    REQUIRE(aggs.size() == 1);
    CHECK(aggs[0].n == 3);
    double mean_ssim = (rows[0].ssim + rows[1].ssim + rows[2].ssim) / 3.0;
    CHECK(aggs[0].mean_ssim == doctest::Approx(mean_ssim).epsilon(1e-12));
}
