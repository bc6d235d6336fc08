#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "padiff/trainer.hpp"

#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;
using namespace padiff;

namespace {

std::string tiny_dataset() {
    static std::string root;
    if (root.empty()) {
        root = (fs::temp_directory_path() / "padiff_trainer_data").string();
        fs::remove_all(root);
        DatasetConfig dc;
        dc.n_train = 12;
        dc.n_val = 2;
        dc.n_test = 2;
        dc.image_size = 16;
        dc.n_shots = 3;
        dc.n_hq_shots = 8;
        build_dataset(root, dc, 5);
    }
    return root;
}

TrainConfig tiny_train_config(const std::string& out_tag) {
    TrainConfig tc;
    tc.dataset_path = tiny_dataset();
    tc.out_dir = (fs::temp_directory_path() / ("padiff_trainer_" + out_tag)).string();
    tc.iterations = 40;
    tc.batch_size = 4;
    tc.learning_rate = 2e-3;
    tc.T = 200;
    tc.seed = 17;
    tc.base_width = 8;
    tc.channel_mult = {1, 2};
    tc.emb_dim = 16;
    return tc;
}

}  // namespace

TEST_CASE("single_shot_selection: uniform over the M shots") {
    VesselPhantom ph = generate_phantom(3, 16, 3);
    Rng srng(9);
    PairedSample s = make_sample(ph, 3, 8, 0.15, 0, srng);

    Rng rng(42);
    int counts[3] = {0, 0, 0};
    for (int i = 0; i < 1000; ++i) {
        const ShotImage& shot = single_shot_selection(s, rng);
        for (int m = 0; m < 3; ++m)
            if (&shot == &s.shots[m]) ++counts[m];
    }
    for (int m = 0; m < 3; ++m) {
        CHECK(counts[m] > 233);  // 1000/3 +- 100
        CHECK(counts[m] < 433);
    }
    PairedSample empty;
    CHECK_THROWS_AS(single_shot_selection(empty, rng), std::invalid_argument);
}

TEST_CASE("Adam: first step moves each parameter by about -lr * sign(grad)") {
    UNetConfig cfg{1, 8, {1}, 16, false};
    UNet<float> net(cfg, 1);
    std::vector<float> before;
    net.visit_params([&](const std::string&, Mat<float>& v, Mat<float>& g) {
        for (Eigen::Index i = 0; i < v.size(); ++i) before.push_back(v.data()[i]);
        g.setConstant(0.5f);  // positive gradient everywhere
    });
    Adam opt(1e-2);
    opt.step(net);
    size_t i = 0;
    bool all_match = true;
    net.visit_params([&](const std::string&, Mat<float>& v, Mat<float>&) {
        for (Eigen::Index k = 0; k < v.size(); ++k, ++i) {
            // bias-corrected first step: delta = -lr * g / (|g| + eps) ~ -lr
            double delta = static_cast<double>(v.data()[k]) - before[i];
            if (std::abs(delta + 1e-2) > 1e-5) all_match = false;
        }
    });
    CHECK(all_match);
}

TEST_CASE("train: loss decreases and the checkpoint round-trips") {
    TrainConfig tc = tiny_train_config("a");
    NoisePredictor<float> model;
    TrainResult r = train(tc, &model);
    CHECK(r.last_window_loss < r.first_window_loss);
    CHECK(fs::exists(r.checkpoint_path));

    CheckpointInfo info;
    NoisePredictor<float> loaded = load_checkpoint(r.checkpoint_path, &info);
    CHECK(info.train_step == tc.iterations);
    CHECK(info.T == tc.T);
    CHECK(info.arch.cond_channels == 3);  // multi mode by default

    // loaded model predicts identically to the in-memory one
    Rng rng(55);
    ImageF x = rng.normal_image<float>(16, 16);
    std::vector<ImageF> cond(3, ImageF(rng.normal_image<float>(16, 16).abs().min(1.0f)));
    CHECK((model.predict(x, 100, cond) == loaded.predict(x, 100, cond)).all());

    SUBCASE("loss csv has one row per step") {
        std::ifstream f(fs::path(tc.out_dir) / "eps_multi_loss.csv");
        REQUIRE(f.good());
        std::string line;
        long rows = 0;
        std::getline(f, line);
        CHECK(line == "step,loss");
        while (std::getline(f, line))
            if (!line.empty()) ++rows;
        CHECK(rows == tc.iterations);
    }
}

TEST_CASE("train: reproducible for a fixed seed") {
    TrainConfig tc1 = tiny_train_config("b1");
    tc1.iterations = 12;
    TrainConfig tc2 = tiny_train_config("b2");
    tc2.iterations = 12;
    NoisePredictor<float> m1, m2;
    train(tc1, &m1);
    train(tc2, &m2);

    bool identical = true;
    std::vector<float> p1;
    m1.net().visit_params([&](const std::string&, Mat<float>& v, Mat<float>&) {
        for (Eigen::Index i = 0; i < v.size(); ++i) p1.push_back(v.data()[i]);
    });
    size_t i = 0;
    m2.net().visit_params([&](const std::string&, Mat<float>& v, Mat<float>&) {
        for (Eigen::Index k = 0; k < v.size(); ++k, ++i)
            if (v.data()[k] != p1[i]) identical = false;
    });
    CHECK(identical);
}

TEST_CASE("train: single mode and condition dropout") {
    TrainConfig tc = tiny_train_config("c");
    tc.iterations = 8;
    tc.condition_mode = "single";
    tc.condition_dropout_prob = 0.5;
    NoisePredictor<float> model;
    train(tc, &model);
    CHECK(model.config().cond_channels == 1);
    CHECK(model.config().cond_dropout_trained);

    Rng rng(66);
    ImageF x = rng.normal_image<float>(16, 16);
    ImageF u = model.predict_unconditional(x, 50);  // must not throw
    CHECK(u.isFinite().all());

    SUBCASE("without dropout the unconditional branch is rejected") {
        TrainConfig tc2 = tiny_train_config("d");
        tc2.iterations = 4;
        tc2.condition_mode = "single";
        NoisePredictor<float> plain;
        train(tc2, &plain);
        CHECK(!plain.config().cond_dropout_trained);
        CHECK_THROWS_AS(plain.predict_unconditional(x, 50), unsupported_error);
    }
}

TEST_CASE("train: preconditions") {
    TrainConfig tc = tiny_train_config("e");
    tc.condition_mode = "both";
    CHECK_THROWS_AS(train(tc), std::invalid_argument);
    tc.condition_mode = "multi";
    tc.dataset_path = "/nonexistent/dataset";
    CHECK_THROWS_AS(train(tc), not_found_error);
}
