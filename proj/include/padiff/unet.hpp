#ifndef PADIFF_UNET_HPP
#define PADIFF_UNET_HPP

// Encoder-decoder noise predictor: residual blocks, skip connections,
// self-attention at the coarsest level, sinusoidal timestep embedding,
// conditioning shots concatenated at the input layer.

#include "padiff/nn.hpp"

#include <vector>

namespace padiff {

struct UNetConfig {
    int cond_channels = 1;            // 1 for the single model, M for the multi model
    int base_width = 32;
    std::vector<int> channel_mult{1, 2, 2};
    int emb_dim = 64;
    bool cond_dropout_trained = false;

    int levels() const { return static_cast<int>(channel_mult.size()); }
    int in_channels() const { return 1 + cond_channels; }
    int width(int level) const { return base_width * channel_mult[level]; }
};

template <class S>
class UNet {
public:
    UNet() = default;

    UNet(const UNetConfig& cfg, uint64_t seed) : cfg_(cfg) {
        Rng rng = Rng::with_stream(seed, 0x756e6574ull);
        int L = cfg.levels();
        time_l1 = Linear<S>(cfg.emb_dim, cfg.emb_dim, rng);
        time_l2 = Linear<S>(cfg.emb_dim, cfg.emb_dim, rng);
        stem = Conv2d<S>(cfg.in_channels(), cfg.width(0), 3, rng);
        for (int l = 0; l < L; ++l)
            enc.emplace_back(l == 0 ? cfg.width(0) : cfg.width(l - 1), cfg.width(l),
                             cfg.emb_dim, rng);
        attn = SelfAttention<S>(cfg.width(L - 1), rng);
        mid = ResBlock<S>(cfg.width(L - 1), cfg.width(L - 1), cfg.emb_dim, rng);
        for (int l = L - 1; l >= 0; --l) {
            int out_c = l > 0 ? cfg.width(l - 1) : cfg.width(0);
            dec.emplace_back(2 * cfg.width(l), out_c, cfg.emb_dim, rng);
        }
        // small head init so an untrained model predicts near-zero noise
        head = Conv2d<S>(cfg.width(0), 1, 3, rng, 0.01);
    }

    const UNetConfig& config() const { return cfg_; }

    // x: (1 + cond_channels) x (h*w), model range. Caches activations
    // for a subsequent backward() call.
    FeatureMap<S> forward(const FeatureMap<S>& x, int t) {
        int L = cfg_.levels();
        if (x.channels() != cfg_.in_channels())
            throw std::invalid_argument("UNet: input channel count mismatch");
        if ((x.h >> (L - 1)) << (L - 1) != x.h || (x.w >> (L - 1)) << (L - 1) != x.w)
            throw std::invalid_argument("UNet: image side not divisible by 2^(levels-1)");

        e0_ = sinusoidal_embedding(t);
        e1_ = time_l1.forward(e0_);
        Vec<S> e1a = silu<S>(e1_);
        emb_ = time_l2.forward(e1a);

        pools_.assign(L - 1, AvgPool2<S>());
        skips_.resize(L);
        FeatureMap<S> h = stem.forward(x);
        for (int l = 0; l < L; ++l) {
            h = enc[l].forward(h, emb_);
            if (l == L - 1) h = attn.forward(h);
            skips_[l] = h;
            if (l + 1 < L) h = pools_[l].forward(h);
        }
        h = mid.forward(h, emb_);

        ups_.assign(L - 1, Upsample2<S>());
        for (int i = 0; i < L; ++i) {
            int l = L - 1 - i;
            FeatureMap<S> cat;
            cat.h = h.h;
            cat.w = h.w;
            cat.v.resize(h.v.rows() + skips_[l].v.rows(), h.v.cols());
            cat.v.topRows(h.v.rows()) = h.v;
            cat.v.bottomRows(skips_[l].v.rows()) = skips_[l].v;
            h = dec[i].forward(cat, emb_);
            if (l > 0) h = ups_[l - 1].forward(h);
        }
        u0_ = h.v;
        FeatureMap<S> a{silu(h.v), h.h, h.w};
        return head.forward(a);
    }

    // Backpropagates dL/d(output); parameter gradients accumulate into
    // each layer's g* buffers.
    void backward(const FeatureMap<S>& dout) {
        int L = cfg_.levels();
        Vec<S> demb = Vec<S>::Zero(cfg_.emb_dim);

        FeatureMap<S> da = head.backward(dout);
        FeatureMap<S> dh{da.v.cwiseProduct(silu_grad(u0_)), da.h, da.w};

        std::vector<FeatureMap<S>> dskips(L);
        for (int i = L - 1; i >= 0; --i) {
            int l = L - 1 - i;
            if (l > 0) dh = ups_[l - 1].backward(dh);
            FeatureMap<S> dcat = dec[i].backward(dh, demb);
            int top = static_cast<int>(dcat.v.rows()) - skips_[l].channels();
            dh.h = dcat.h;
            dh.w = dcat.w;
            dh.v = dcat.v.topRows(top);
            dskips[l].h = dcat.h;
            dskips[l].w = dcat.w;
            dskips[l].v = dcat.v.bottomRows(skips_[l].channels());
        }
        dh = mid.backward(dh, demb);
        for (int l = L - 1; l >= 0; --l) {
            if (l + 1 < L) dh = pools_[l].backward(dh);
            dh.v += dskips[l].v;
            if (l == L - 1) dh = attn.backward(dh);
            dh = enc[l].backward(dh, demb);
        }
        stem.backward(dh);

        Vec<S> de1a = time_l2.backward(demb);
        Vec<S> de1 = de1a.cwiseProduct(silu_grad<S>(e1_));
        time_l1.backward(de1);
    }

    void zero_grad() {
        time_l1.zero_grad();
        time_l2.zero_grad();
        stem.zero_grad();
        for (auto& r : enc) r.zero_grad();
        attn.zero_grad();
        mid.zero_grad();
        for (auto& r : dec) r.zero_grad();
        head.zero_grad();
    }

    void visit_params(const ParamVisitor<S>& f) {
        time_l1.visit("time.l1", f);
        time_l2.visit("time.l2", f);
        stem.visit("stem", f);
        for (size_t l = 0; l < enc.size(); ++l) enc[l].visit("enc" + std::to_string(l), f);
        attn.visit("attn", f);
        mid.visit("mid", f);
        for (size_t l = 0; l < dec.size(); ++l) dec[l].visit("dec" + std::to_string(l), f);
        head.visit("head", f);
    }

    size_t parameter_count() {
        size_t n = 0;
        visit_params([&](const std::string&, Mat<S>& v, Mat<S>&) {
            n += static_cast<size_t>(v.size());
        });
        return n;
    }

    Vec<S> sinusoidal_embedding(int t) const {
        int half = cfg_.emb_dim / 2;
        Vec<S> e(cfg_.emb_dim);
        for (int i = 0; i < half; ++i) {
            double freq = std::exp(-std::log(10000.0) * i / half);
            e(i) = static_cast<S>(std::sin(t * freq));
            e(half + i) = static_cast<S>(std::cos(t * freq));
        }
        return e;
    }

    Linear<S> time_l1, time_l2;
    Conv2d<S> stem, head;
    std::vector<ResBlock<S>> enc, dec;
    SelfAttention<S> attn;
    ResBlock<S> mid;

private:
    UNetConfig cfg_;
    Vec<S> e0_, e1_, emb_;
    std::vector<FeatureMap<S>> skips_;
    std::vector<AvgPool2<S>> pools_;
    std::vector<Upsample2<S>> ups_;
    Mat<S> u0_;
};

// The conditional noise-estimation model surface. Conditioning images
// arrive in data range [0,1] and are mapped to model range internally;
// x_t is already in model range.
template <class S>
class NoisePredictor {
public:
    NoisePredictor() = default;
    NoisePredictor(const UNetConfig& cfg, uint64_t seed) : net_(cfg, seed) {}

    const UNetConfig& config() const { return net_.config(); }
    UNet<S>& net() { return net_; }
    const UNet<S>& net() const { return net_; }

    Image<S> predict(const Image<S>& x_t, int t, const std::vector<Image<S>>& cond) {
        if (static_cast<int>(cond.size()) != net_.config().cond_channels)
            throw std::invalid_argument("predict: condition channel count mismatch");
        FeatureMap<S> x = pack(x_t, cond);
        FeatureMap<S> y = net_.forward(x, t);
        return Eigen::Map<const Image<S>>(y.v.data(), x_t.rows(), x_t.cols());
    }

    Image<S> predict_unconditional(const Image<S>& x_t, int t) {
        if (!net_.config().cond_dropout_trained)
            throw unsupported_error(
                "predict_unconditional: model was not trained with condition dropout");
        std::vector<Image<S>> null_cond(
            net_.config().cond_channels,
            Image<S>::Constant(x_t.rows(), x_t.cols(), S(0.5)));
        // 0.5 in data range maps to the all-zero null token in model range
        return predict(x_t, t, null_cond);
    }

    // Stacks x_t (model range) over the conditions (data range -> model range).
    FeatureMap<S> pack(const Image<S>& x_t, const std::vector<Image<S>>& cond) const {
        int h = static_cast<int>(x_t.rows());
        int w = static_cast<int>(x_t.cols());
        FeatureMap<S> x;
        x.h = h;
        x.w = w;
        x.v.resize(1 + cond.size(), h * w);
        x.v.row(0) = Eigen::Map<const Vec<S>>(x_t.data(), h * w).transpose();
        for (size_t i = 0; i < cond.size(); ++i) {
            Image<S> c = to_model_range(cond[i]);
            x.v.row(1 + i) = Eigen::Map<const Vec<S>>(c.data(), h * w).transpose();
        }
        return x;
    }

private:
    UNet<S> net_;
};

}  // namespace padiff

#endif
