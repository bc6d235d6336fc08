#include "padiff/trainer.hpp"

#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace padiff {

const ShotImage& single_shot_selection(const PairedSample& sample, Rng& rng) {
    if (sample.shots.empty())
        throw std::invalid_argument("single_shot_selection: sample has no shots");
    int m = rng.uniform_int(0, static_cast<int>(sample.shots.size()) - 1);
    return sample.shots[static_cast<size_t>(m)];
}

void Adam::step(UNet<float>& net) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    size_t i = 0;
    net.visit_params([&](const std::string&, Mat<float>& v, Mat<float>& g) {
        if (i >= m_.size()) {
            m_.emplace_back(Eigen::ArrayXf::Zero(v.size()));
            v_.emplace_back(Eigen::ArrayXf::Zero(v.size()));
        }
        Eigen::Map<Eigen::ArrayXf> p(v.data(), v.size());
        Eigen::Map<const Eigen::ArrayXf> grad(g.data(), g.size());
        m_[i] = static_cast<float>(beta1_) * m_[i] + static_cast<float>(1 - beta1_) * grad;
        v_[i] = static_cast<float>(beta2_) * v_[i] +
                static_cast<float>(1 - beta2_) * grad.square();
        Eigen::ArrayXf m_hat = m_[i] / static_cast<float>(bc1);
        Eigen::ArrayXf v_hat = v_[i] / static_cast<float>(bc2);
        p -= static_cast<float>(lr_) * m_hat / (v_hat.sqrt() + static_cast<float>(eps_));
        ++i;
    });
}

TrainResult train(const TrainConfig& config, NoisePredictor<float>* model_out) {
    if (config.condition_mode != "single" && config.condition_mode != "multi")
        throw std::invalid_argument("train: condition_mode must be single or multi");
    if (config.iterations < 1) throw std::invalid_argument("train: iterations must be >= 1");
    if (!fs::exists(config.dataset_path))
        throw not_found_error("train: dataset not found at " + config.dataset_path);

    std::vector<PairedSample> data = load_split(config.dataset_path, "train");
    if (data.empty()) throw not_found_error("train: empty train split");
    DatasetConfig meta = load_meta(config.dataset_path);

    UNetConfig arch;
    arch.cond_channels = config.condition_mode == "single" ? 1 : meta.n_shots;
    arch.base_width = config.base_width;
    arch.channel_mult = config.channel_mult;
    arch.emb_dim = config.emb_dim;
    arch.cond_dropout_trained = config.condition_dropout_prob > 0;
    NoisePredictor<float> model(arch, config.seed);

    NoiseSchedule schedule = linear_schedule(config.T, config.beta_1, config.beta_T);
    Adam opt(config.learning_rate);
    Rng rng = Rng::with_stream(config.seed, 0x747261696eull);

    fs::create_directories(config.out_dir);
    std::string name =
        config.model_name.empty() ? "eps_" + config.condition_mode : config.model_name;
    std::string ckpt_path = (fs::path(config.out_dir) / (name + ".npz")).string();
    std::ofstream loss_csv(fs::path(config.out_dir) / (name + "_loss.csv"));
    loss_csv << "step,loss\n";

    CheckpointInfo info;
    info.arch = arch;
    info.T = config.T;
    info.beta_1 = config.beta_1;
    info.beta_T = config.beta_T;

    const int h = static_cast<int>(data[0].target.rows());
    const int w = static_cast<int>(data[0].target.cols());
    const long window = std::max<long>(1, config.iterations / 10);
    TrainResult result;
    result.checkpoint_path = ckpt_path;
    double first_sum = 0, last_sum = 0;
    long first_n = 0, last_n = 0;

    for (long step = 1; step <= config.iterations; ++step) {
        model.net().zero_grad();
        double batch_loss = 0;
        for (int b = 0; b < config.batch_size; ++b) {
            const PairedSample& s =
                data[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(data.size()) - 1))];
            int t = rng.uniform_int(1, config.T);
            ImageF eps = rng.normal_image<float>(h, w);
            ImageF x0 = to_model_range(s.target);
            ImageF x_t = forward_sample(x0, t, eps, schedule);

            std::vector<ImageF> cond;
            if (config.condition_mode == "single") {
                cond.push_back(single_shot_selection(s, rng).image);
            } else {
                for (const ShotImage& shot : s.shots) cond.push_back(shot.image);
            }
            if (arch.cond_dropout_trained &&
                rng.uniform() < config.condition_dropout_prob) {
                // null token: 0.5 in data range, i.e. all-zero in model range
                for (ImageF& c : cond) c.setConstant(0.5f);
            }

            FeatureMap<float> x = model.pack(x_t, cond);
            FeatureMap<float> out = model.net().forward(x, t);
            Eigen::Map<const ImageF> eps_hat(out.v.data(), h, w);
            batch_loss += training_loss(eps, ImageF(eps_hat), config.loss_norm);

            FeatureMap<float> dout;
            dout.h = h;
            dout.w = w;
            float scale = 1.0f / (static_cast<float>(h) * w * config.batch_size);
            if (config.loss_norm == LossNorm::squared_l2)
                dout.v = (out.v - Eigen::Map<const Mat<float>>(eps.data(), 1, h * w)) *
                         (2.0f * scale);
            else
                dout.v = (out.v - Eigen::Map<const Mat<float>>(eps.data(), 1, h * w))
                             .cwiseSign() * scale;
            model.net().backward(dout);
        }
        opt.step(model.net());

        batch_loss /= config.batch_size;
        loss_csv << step << "," << batch_loss << "\n";
        if (step <= window) { first_sum += batch_loss; ++first_n; }
        if (step > config.iterations - window) { last_sum += batch_loss; ++last_n; }

        if (config.checkpoint_interval > 0 && step % config.checkpoint_interval == 0 &&
            step < config.iterations) {
            info.train_step = step;
            save_checkpoint(ckpt_path, model, info);
        }
    }

    info.train_step = config.iterations;
    save_checkpoint(ckpt_path, model, info);
    result.first_window_loss = first_sum / first_n;
    result.last_window_loss = last_sum / last_n;
    if (model_out) *model_out = model;
    return result;
}

}  // namespace padiff
