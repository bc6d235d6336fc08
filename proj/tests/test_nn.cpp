#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "padiff/schedule.hpp"
#include "padiff/unet.hpp"

using namespace padiff;

namespace {

UNetConfig tiny_config() {
    UNetConfig cfg;
    cfg.cond_channels = 1;
    cfg.base_width = 8;
    cfg.channel_mult = {1, 2};
    cfg.emb_dim = 16;
    return cfg;
}

}  // namespace

TEST_CASE("predict: shape, finiteness, determinism") {
    NoisePredictor<float> model(tiny_config(), 5);
    Rng rng(1);
    ImageF x_t = rng.normal_image<float>(8, 8);
    std::vector<ImageF> cond{ImageF(rng.normal_image<float>(8, 8).abs().min(1.0f))};

    ImageF out = model.predict(x_t, 400, cond);
    CHECK(out.rows() == 8);
    CHECK(out.cols() == 8);
    CHECK(out.isFinite().all());

    ImageF again = model.predict(x_t, 400, cond);
    CHECK((out == again).all());

    SUBCASE("shape invariance across timesteps") {
        for (int t : {1, 10, 500, 1000}) {
            ImageF y = model.predict(x_t, t, cond);
            CHECK(y.rows() == 8);
            CHECK(y.cols() == 8);
            CHECK(y.isFinite().all());
        }
    }
    SUBCASE("condition count mismatch rejected") {
        CHECK_THROWS_AS(model.predict(x_t, 1, {}), std::invalid_argument);
        CHECK_THROWS_AS(model.predict(x_t, 1, {cond[0], cond[0]}), std::invalid_argument);
    }
}

TEST_CASE("predict_unconditional requires dropout training") {
    Rng rng(2);
    ImageF x_t = rng.normal_image<float>(8, 8);

    NoisePredictor<float> plain(tiny_config(), 5);
    CHECK_THROWS_AS(plain.predict_unconditional(x_t, 10), unsupported_error);

    UNetConfig cfg = tiny_config();
    cfg.cond_dropout_trained = true;
    NoisePredictor<float> dropout(cfg, 5);
    ImageF a = dropout.predict_unconditional(x_t, 10);
    ImageF b = dropout.predict_unconditional(x_t, 10);
    CHECK((a == b).all());
    CHECK(a.rows() == 8);

    // the null token is the all-zero condition in model range
    std::vector<ImageF> null_cond{ImageF::Constant(8, 8, 0.5f)};
    CHECK((a == dropout.predict(x_t, 10, null_cond)).all());
}

TEST_CASE("untrained prediction is near zero so initial loss is about 1") {
    NoisePredictor<float> model(tiny_config(), 9);
    Rng rng(4);
    double loss_acc = 0;
    for (int i = 0; i < 8; ++i) {
        ImageF eps = rng.normal_image<float>(8, 8);
        ImageF x_t = rng.normal_image<float>(8, 8);
        std::vector<ImageF> cond{ImageF::Constant(8, 8, 0.3f)};
        loss_acc += training_loss(eps, model.predict(x_t, 300, cond));
    }
    double loss = loss_acc / 8;
    CHECK(loss > 0.8);
    CHECK(loss < 1.3);
}

TEST_CASE("analytic gradients match central finite differences") {
    UNetConfig cfg = tiny_config();
    NoisePredictor<double> model(cfg, 31);
    UNet<double>& net = model.net();

    Rng rng(13);
    ImageD x_t = rng.normal_image<double>(8, 8);
    ImageD eps = rng.normal_image<double>(8, 8);
    std::vector<ImageD> cond{ImageD(rng.normal_image<double>(8, 8).abs().min(1.0))};
    const int t = 250;

    auto loss_of = [&]() {
        return training_loss(eps, model.predict(x_t, t, cond));
    };

    // analytic pass
    net.zero_grad();
    FeatureMap<double> packed = model.pack(x_t, cond);
    FeatureMap<double> out = net.forward(packed, t);
    Mat<double> eps_row = Eigen::Map<const Mat<double>>(eps.data(), 1, 64);
    FeatureMap<double> dout{Mat<double>((out.v - eps_row) * (2.0 / 64.0)), 8, 8};
    net.backward(dout);

    struct ParamRef {
        std::string name;
        Mat<double>* value;
        Mat<double>* grad;
        Eigen::Index i, j;
    };
    std::vector<ParamRef> all;
    net.visit_params([&](const std::string& name, Mat<double>& v, Mat<double>& g) {
        for (Eigen::Index i = 0; i < v.rows(); ++i)
            for (Eigen::Index j = 0; j < v.cols(); ++j)
                all.push_back({name, &v, &g, i, j});
    });
    REQUIRE(all.size() > 5000);

    Rng pick(99);
    int checked = 0;
    double worst = 0;
    while (checked < 50) {
        const ParamRef& p = all[static_cast<size_t>(pick.uniform_int(
            0, static_cast<int>(all.size()) - 1))];
        double analytic = (*p.grad)(p.i, p.j);

        const double h = 1e-5;
        double saved = (*p.value)(p.i, p.j);
        (*p.value)(p.i, p.j) = saved + h;
        double lp = loss_of();
        (*p.value)(p.i, p.j) = saved - h;
        double lm = loss_of();
        (*p.value)(p.i, p.j) = saved;
        double numeric = (lp - lm) / (2 * h);

        double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        double rel = std::abs(analytic - numeric) / denom;
        worst = std::max(worst, rel);
        INFO("param ", p.name, " (", p.i, ",", p.j, "): analytic=", analytic,
             " numeric=", numeric);
        CHECK(rel < 1e-3);
        ++checked;
    }
    MESSAGE("worst relative gradient error over 50 params: ", worst);
}

TEST_CASE("odd image sizes rejected for multi-level nets") {
    NoisePredictor<float> model(tiny_config(), 5);
    Rng rng(1);
    ImageF x_t = rng.normal_image<float>(9, 9);
    std::vector<ImageF> cond{ImageF::Constant(9, 9, 0.1f)};
    CHECK_THROWS_AS(model.predict(x_t, 1, cond), std::invalid_argument);
}
