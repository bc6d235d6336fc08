#include "padiff/sampler.hpp"

namespace padiff {

SampleMode parse_sample_mode(const std::string& name) {
    if (name == "baseline") return SampleMode::baseline;
    if (name == "ddpm_single") return SampleMode::ddpm_single;
    if (name == "ddpm_multi") return SampleMode::ddpm_multi;
    if (name == "guided") return SampleMode::guided;
    if (name == "cfg") return SampleMode::cfg;
    throw std::invalid_argument("unknown sample mode: " + name);
}

std::string sample_mode_name(SampleMode mode) {
    switch (mode) {
        case SampleMode::baseline: return "baseline";
        case SampleMode::ddpm_single: return "ddpm_single";
        case SampleMode::ddpm_multi: return "ddpm_multi";
        case SampleMode::guided: return "guided";
        case SampleMode::cfg: return "cfg";
    }
    return "?";
}

ImageF noise_mix(const SinglePredictFn& single_predict, const ImageF& x_t, int t,
                 const std::vector<ImageF>& shots,
                 const std::vector<ImageF>& confidences, const GuidanceConfig& cfg) {
    if (shots.empty()) throw std::invalid_argument("noise_mix: need at least one shot");
    if (cfg.use_confidence && confidences.size() != shots.size())
        throw std::invalid_argument("noise_mix: confidence/shot count mismatch");

    ImageF acc = ImageF::Zero(x_t.rows(), x_t.cols());
    for (size_t m = 0; m < shots.size(); ++m) {
        ImageF pred = single_predict(x_t, t, shots[m]);
        if (cfg.use_confidence)
            acc += confidences[m] * pred;
        else
            acc += pred;
    }
    if (cfg.use_confidence && cfg.normalize_weights) {
        ImageF weight_sum = ImageF::Zero(x_t.rows(), x_t.cols());
        for (const ImageF& h : confidences) weight_sum += h;
        return acc / weight_sum;
    }
    return acc / static_cast<float>(shots.size());
}

ImageF guided_epsilon(const PredictFn& multi_predict,
                      const SinglePredictFn& single_predict, const ImageF& x_t, int t,
                      const std::vector<ImageF>& shots,
                      const std::vector<ImageF>& confidences, const GuidanceConfig& cfg) {
    ImageF eps_multi = multi_predict(x_t, t);
    if (cfg.w == 0.0 || t < cfg.t_guide) return eps_multi;
    ImageF eps_mix = noise_mix(single_predict, x_t, t, shots, confidences, cfg);
    float w = static_cast<float>(cfg.w);
    return (1.0f + w) * eps_multi - w * eps_mix;
}

ImageF cfg_epsilon(const PredictFn& cond_predict, const PredictFn& uncond_predict,
                   const ImageF& x_t, int t, double w) {
    ImageF cond = cond_predict(x_t, t);
    if (w == 0.0) return cond;
    float wf = static_cast<float>(w);
    return (1.0f + wf) * cond - wf * uncond_predict(x_t, t);
}

const ShotImage& most_reliable_shot(const PairedSample& sample) {
    if (sample.shots.empty())
        throw std::invalid_argument("most_reliable_shot: sample has no shots");
    size_t best = 0;
    float best_mean = sample.shots[0].confidence.values.mean();
    for (size_t m = 1; m < sample.shots.size(); ++m) {
        float mean = sample.shots[m].confidence.values.mean();
        if (mean > best_mean) {
            best_mean = mean;
            best = m;
        }
    }
    return sample.shots[best];
}

namespace {

std::vector<ImageF> shot_images(const PairedSample& s) {
    std::vector<ImageF> out;
    for (const ShotImage& shot : s.shots) out.push_back(shot.image);
    return out;
}

std::vector<ImageF> confidence_maps(const PairedSample& s) {
    std::vector<ImageF> out;
    for (const ShotImage& shot : s.shots) out.push_back(shot.confidence.values);
    return out;
}

}  // namespace

ImageF sample(const SamplerModels& models, const NoiseSchedule& schedule,
              const SampleRequest& request, std::vector<ImageF>* trace) {
    const PairedSample& s = *request.sample;
    const int h = static_cast<int>(s.target.rows());
    const int w = static_cast<int>(s.target.cols());
    const SampleMode mode = request.mode;

    if (mode == SampleMode::baseline) return average_shots(s.shots);

    NoisePredictor<float>* multi = models.multi_model;
    NoisePredictor<float>* single = models.single_model;
    if ((mode == SampleMode::ddpm_multi || mode == SampleMode::cfg ||
         mode == SampleMode::guided) &&
        !multi)
        throw unsupported_error("sample: multi model required for mode " +
                                sample_mode_name(mode));
    if ((mode == SampleMode::ddpm_single || mode == SampleMode::guided) && !single)
        throw unsupported_error("sample: single model required for mode " +
                                sample_mode_name(mode));

    std::vector<ImageF> shots = shot_images(s);
    std::vector<ImageF> confs = confidence_maps(s);

    PredictFn multi_fn;
    if (multi)
        multi_fn = [&](const ImageF& x, int t) { return multi->predict(x, t, shots); };
    SinglePredictFn single_fn;
    if (single)
        single_fn = [&](const ImageF& x, int t, const ImageF& shot) {
            return single->predict(x, t, {shot});
        };

    Rng rng = Rng::with_stream(request.seed, 0x73616d70ull);
    ImageF x = rng.normal_image<float>(h, w);
    for (int t = schedule.T; t >= 1; --t) {
        ImageF eps_hat;
        switch (mode) {
            case SampleMode::ddpm_multi:
                eps_hat = multi_fn(x, t);
                break;
            case SampleMode::ddpm_single:
                eps_hat = single_fn(x, t, most_reliable_shot(s).image);
                break;
            case SampleMode::guided:
                eps_hat = guided_epsilon(multi_fn, single_fn, x, t, shots, confs,
                                         request.guidance);
                break;
            case SampleMode::cfg:
                eps_hat = cfg_epsilon(
                    multi_fn,
                    [&](const ImageF& xc, int tc) {
                        return multi->predict_unconditional(xc, tc);
                    },
                    x, t, request.guidance.w);
                break;
            default:
                throw std::invalid_argument("sample: bad mode");
        }
        ImageF z = t > 1 ? rng.normal_image<float>(h, w)
                         : ImageF(ImageF::Zero(h, w));
        x = reverse_step(x, t, eps_hat, z, schedule);
        // wide safety band: inert for sane dynamics (|x| stays ~O(1)),
        // keeps extreme guidance scales finite instead of overflowing
        x = x.min(10.0f).max(-10.0f);
        if (trace) trace->push_back(from_model_range(x));
    }
    return from_model_range(x);
}

}  // namespace padiff
