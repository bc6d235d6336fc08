#ifndef PADIFF_SAMPLER_HPP
#define PADIFF_SAMPLER_HPP

// Reverse-process sampling with quality guidance built on the
// confidence-weighted noise mix, plus plain DDPM and a classifier-free
// guidance arm for comparison.

#include "padiff/phantom.hpp"
#include "padiff/schedule.hpp"
#include "padiff/unet.hpp"

#include <functional>

namespace padiff {

struct GuidanceConfig {
    double w = 0.0;        // guidance scale, >= 0
    int t_guide = 0;       // guidance active on [T, t_guide]; below it w is forced to 0
    bool use_confidence = true;   // weighted mix vs plain average ("w/o h" ablation)
    bool normalize_weights = false;  // divide by sum of maps instead of M
};

enum class SampleMode { baseline, ddpm_single, ddpm_multi, guided, cfg };

SampleMode parse_sample_mode(const std::string& name);
std::string sample_mode_name(SampleMode mode);

// Callable views so the mixing rules can be exercised with stub
// predictors; x_t is in model range, the shot in data range.
using SinglePredictFn =
    std::function<ImageF(const ImageF& x_t, int t, const ImageF& shot)>;
using PredictFn = std::function<ImageF(const ImageF& x_t, int t)>;

// Confidence-weighted mix of single-shot predictions:
//   (1/M) sum_m h_m (.) eps_single(x_t, t, L_m).
ImageF noise_mix(const SinglePredictFn& single_predict, const ImageF& x_t, int t,
                 const std::vector<ImageF>& shots,
                 const std::vector<ImageF>& confidences, const GuidanceConfig& cfg);

// (1+w) eps_multi - w eps_mix, with w forced to 0 below t_guide.
ImageF guided_epsilon(const PredictFn& multi_predict,
                      const SinglePredictFn& single_predict, const ImageF& x_t, int t,
                      const std::vector<ImageF>& shots,
                      const std::vector<ImageF>& confidences, const GuidanceConfig& cfg);

// Classifier-free guidance: (1+w) eps(x_t,t,c) - w eps(x_t,t,null).
ImageF cfg_epsilon(const PredictFn& cond_predict, const PredictFn& uncond_predict,
                   const ImageF& x_t, int t, double w);

// The shot with the highest mean confidence; this is what the
// single-shot sampling arm conditions on.
const ShotImage& most_reliable_shot(const PairedSample& sample);

struct SamplerModels {
    NoisePredictor<float>* single_model = nullptr;
    NoisePredictor<float>* multi_model = nullptr;
};

struct SampleRequest {
    const PairedSample* sample = nullptr;
    uint64_t seed = 0;
    GuidanceConfig guidance;
    SampleMode mode = SampleMode::ddpm_multi;
};

// Full reverse process from x_T ~ N(0, I); returns the restored image in
// [0,1]. The noise stream depends only on the seed, so runs that share a
// seed are paired across modes. `trace`, when non-null, receives the
// intermediate image after every reverse step.
ImageF sample(const SamplerModels& models, const NoiseSchedule& schedule,
              const SampleRequest& request, std::vector<ImageF>* trace = nullptr);

}  // namespace padiff

#endif
