#ifndef PADIFF_METRICS_HPP
#define PADIFF_METRICS_HPP

// Image-quality metrics, batch evaluation over a split, and the
// confidence-vs-local-quality correlation study.

#include "padiff/sampler.hpp"

#include <string>
#include <vector>

namespace padiff {

// 10 log10(range^2 / MSE), in dB; +infinity for identical images.
double psnr(const ImageF& a, const ImageF& b, double range = 1.0);

// Mean SSIM over all uniform window x window patches (stride 1),
// population statistics, C1 = (0.01 range)^2, C2 = (0.03 range)^2.
double ssim(const ImageF& a, const ImageF& b, int window = 7, double range = 1.0);

struct EvalMethod {
    std::string name;
    SampleMode mode = SampleMode::baseline;
    GuidanceConfig guidance;
};

struct EvalRow {
    int sample_id = 0;
    std::string method;
    double w = 0;
    bool use_confidence = true;
    double psnr_db = 0;
    double ssim = 0;
};

struct MethodAggregate {
    std::string method;
    double mean_psnr_db = 0;
    double mean_ssim = 0;
    long n = 0;
};

// Runs every method on every sample. Per-sample seeds are derived from
// `seed` and the sample index only, so methods are paired: they share
// the initial x_T and the reverse-noise stream. When `outputs` is
// non-null it receives outputs[method][sample].
std::vector<EvalRow> evaluate(const SamplerModels& models, const NoiseSchedule& schedule,
                              const std::vector<PairedSample>& samples,
                              const std::vector<EvalMethod>& methods, uint64_t seed,
                              std::vector<std::vector<ImageF>>* outputs = nullptr);

std::vector<MethodAggregate> aggregate(const std::vector<EvalRow>& rows);

void write_report_csv(const std::string& path, const std::vector<EvalRow>& rows);
// `seed` is recorded so every report names the run that produced it.
void write_aggregates_json(const std::string& path,
                           const std::vector<MethodAggregate>& aggregates,
                           uint64_t seed);

struct CorrelationBin {
    double lo = 0, hi = 0;
    double mean_ssim = 0;
    long n_windows = 0;
};

struct CorrelationResult {
    std::vector<CorrelationBin> bins;  // n_bins over the confidence range [0.2, 1]
    double spearman = 0;               // over the populated bins
    // false when fewer than two populated bins exist or the bin means are
    // constant; empty bins themselves are reported with n_windows = 0.
    bool spearman_defined = false;
    int populated_bins = 0;
};

// Draws random windows from each restored/target pair, bins them by the
// window's mean value in the matching confidence map, and correlates bin
// confidence with mean local SSIM. Intended for single-shot-conditioned
// outputs paired with the conditioning shot's confidence map.
CorrelationResult correlate_confidence(const std::vector<ImageF>& restored,
                                       const std::vector<ImageF>& targets,
                                       const std::vector<ImageF>& confidences,
                                       int window = 7, int n_bins = 20,
                                       int windows_per_sample = 200, uint64_t seed = 0);

void write_correlation_csv(const std::string& path, const CorrelationResult& result);

}  // namespace padiff

#endif
