#ifndef PADIFF_TRAINER_HPP
#define PADIFF_TRAINER_HPP

// Trains the single- and multi-shot-conditioned noise predictors:
// sample (x0, t, eps), form x_t with the closed-form forward process,
// minimize the noise-prediction loss with Adam.

#include "padiff/checkpoint.hpp"
#include "padiff/phantom.hpp"
#include "padiff/schedule.hpp"
#include "padiff/unet.hpp"

#include <string>

namespace padiff {

struct TrainConfig {
    long iterations = 2000;
    int batch_size = 8;
    double learning_rate = 1e-4;
    std::string condition_mode = "multi";   // "single" or "multi"
    double condition_dropout_prob = 0.0;    // enables unconditional prediction
    uint64_t seed = 0;
    long checkpoint_interval = 0;           // 0: only the final checkpoint
    std::string dataset_path;
    std::string out_dir;
    std::string model_name;                 // default: eps_<condition_mode>

    int T = 1000;
    double beta_1 = 1e-4;
    double beta_T = 0.02;
    LossNorm loss_norm = LossNorm::squared_l2;

    int base_width = 32;
    std::vector<int> channel_mult{1, 2, 2};
    int emb_dim = 64;
};

struct TrainResult {
    std::string checkpoint_path;
    double first_window_loss = 0;  // mean loss, first 10% of iterations
    double last_window_loss = 0;   // mean loss, last 10%
};

// Uniform choice among the sample's M shots; the paired confidence
// travels with the shot.
const ShotImage& single_shot_selection(const PairedSample& sample, Rng& rng);

TrainResult train(const TrainConfig& config, NoisePredictor<float>* model_out = nullptr);

// Simple Adam over a parameter-visiting model.
class Adam {
public:
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(UNet<float>& net);

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Eigen::ArrayXf> m_, v_;
};

}  // namespace padiff

#endif
