#ifndef PADIFF_NN_HPP
#define PADIFF_NN_HPP

// Small dense-NN toolkit on Eigen: conv / linear / pooling / attention
// layers with explicit forward caches and hand-written backward passes.
// Everything is templated on the scalar so gradient checks can run in
// double while training runs in float.

#include "padiff/core.hpp"

#include <functional>
#include <string>
#include <vector>

namespace padiff {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Feature map: one row per channel, pixels flattened row-major.
template <class S>
struct FeatureMap {
    Mat<S> v;
    int h = 0;
    int w = 0;

    int channels() const { return static_cast<int>(v.rows()); }
};

template <class S>
using ParamVisitor =
    std::function<void(const std::string& name, Mat<S>& value, Mat<S>& grad)>;

template <class S>
Mat<S> silu(const Mat<S>& x) {
    return x.array() / (S(1) + (-x.array()).exp());
}

template <class S>
Mat<S> silu_grad(const Mat<S>& x) {
    auto sig = (S(1) + (-x.array()).exp()).inverse();
    return (sig * (S(1) + x.array() * (S(1) - sig))).matrix();
}

template <class S>
void he_init(Mat<S>& w, int fan_in, Rng& rng, double gain = 1.0) {
    double std_dev = gain * std::sqrt(2.0 / fan_in);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            w(i, j) = static_cast<S>(rng.normal() * std_dev);
}

// 2-D convolution with kernel size 1 or 3 (pad 1), via im2col + GEMM.
template <class S>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(int in_c, int out_c, int k, Rng& rng, double init_gain = 1.0)
        : in_c_(in_c), out_c_(out_c), k_(k) {
        if (k != 1 && k != 3) throw std::invalid_argument("Conv2d: kernel must be 1 or 3");
        W.resize(out_c, in_c * k * k);
        he_init(W, in_c * k * k, rng, init_gain);
        b = Mat<S>::Zero(out_c, 1);
        gW = Mat<S>::Zero(W.rows(), W.cols());
        gb = Mat<S>::Zero(out_c, 1);
    }

    FeatureMap<S> forward(const FeatureMap<S>& x) {
        h_ = x.h;
        w_ = x.w;
        FeatureMap<S> y;
        y.h = x.h;
        y.w = x.w;
        if (k_ == 1) {
            cols_ = x.v;
        } else {
            im2col(x.v);
        }
        y.v.noalias() = W * cols_;
        y.v.colwise() += b.col(0);
        return y;
    }

    FeatureMap<S> backward(const FeatureMap<S>& dy) {
        gW.noalias() += dy.v * cols_.transpose();
        gb.col(0) += dy.v.rowwise().sum();
        FeatureMap<S> dx;
        dx.h = h_;
        dx.w = w_;
        if (k_ == 1) {
            dx.v.noalias() = W.transpose() * dy.v;
        } else {
            Mat<S> dcols = W.transpose() * dy.v;
            dx.v = Mat<S>::Zero(in_c_, h_ * w_);
            col2im(dcols, dx.v);
        }
        return dx;
    }

    void zero_grad() {
        gW.setZero();
        gb.setZero();
    }

    void visit(const std::string& prefix, const ParamVisitor<S>& f) {
        f(prefix + ".W", W, gW);
        f(prefix + ".b", b, gb);
    }

    Mat<S> W, b, gW, gb;

private:
    void im2col(const Mat<S>& x) {
        int n = h_ * w_;
        cols_.resize(in_c_ * 9, n);
        for (int c = 0; c < in_c_; ++c) {
            const S* src = x.row(c).data();
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    S* dst = cols_.row((c * 3 + ky) * 3 + kx).data();
                    int dy = ky - 1, dx = kx - 1;
                    for (int y = 0; y < h_; ++y) {
                        int sy = y + dy;
                        S* drow = dst + y * w_;
                        if (sy < 0 || sy >= h_) {
                            std::fill(drow, drow + w_, S(0));
                            continue;
                        }
                        const S* srow = src + sy * w_;
                        int x0 = std::max(0, -dx);
                        int x1 = std::min(w_, w_ - dx);
                        if (x0 > 0) std::fill(drow, drow + x0, S(0));
                        for (int xx = x0; xx < x1; ++xx) drow[xx] = srow[xx + dx];
                        if (x1 < w_) std::fill(drow + x1, drow + w_, S(0));
                    }
                }
            }
        }
    }

    void col2im(const Mat<S>& dcols, Mat<S>& dx) {
        for (int c = 0; c < in_c_; ++c) {
            S* dst = dx.row(c).data();
            for (int ky = 0; ky < 3; ++ky) {
                for (int kx = 0; kx < 3; ++kx) {
                    const S* src = dcols.row((c * 3 + ky) * 3 + kx).data();
                    int dy = ky - 1, dxo = kx - 1;
                    for (int y = 0; y < h_; ++y) {
                        int sy = y + dy;
                        if (sy < 0 || sy >= h_) continue;
                        const S* srow = src + y * w_;
                        S* drow = dst + sy * w_;
                        int x0 = std::max(0, -dxo);
                        int x1 = std::min(w_, w_ - dxo);
                        for (int xx = x0; xx < x1; ++xx) drow[xx + dxo] += srow[xx];
                    }
                }
            }
        }
    }

    int in_c_ = 0, out_c_ = 0, k_ = 0;
    int h_ = 0, w_ = 0;
    Mat<S> cols_;
};

template <class S>
class Linear {
public:
    Linear() = default;
    Linear(int in, int out, Rng& rng, double init_gain = 1.0) {
        W.resize(out, in);
        he_init(W, in, rng, init_gain);
        b = Mat<S>::Zero(out, 1);
        gW = Mat<S>::Zero(out, in);
        gb = Mat<S>::Zero(out, 1);
    }

    Vec<S> forward(const Vec<S>& x) {
        x_ = x;
        return W * x + b.col(0);
    }

    Vec<S> backward(const Vec<S>& dy) {
        gW.noalias() += dy * x_.transpose();
        gb.col(0) += dy;
        return W.transpose() * dy;
    }

    void zero_grad() {
        gW.setZero();
        gb.setZero();
    }

    void visit(const std::string& prefix, const ParamVisitor<S>& f) {
        f(prefix + ".W", W, gW);
        f(prefix + ".b", b, gb);
    }

    Mat<S> W, b, gW, gb;

private:
    Vec<S> x_;
};

template <class S>
class AvgPool2 {
public:
    FeatureMap<S> forward(const FeatureMap<S>& x) {
        h_ = x.h;
        w_ = x.w;
        int oh = x.h / 2, ow = x.w / 2;
        FeatureMap<S> y;
        y.h = oh;
        y.w = ow;
        y.v.resize(x.v.rows(), oh * ow);
        for (int c = 0; c < x.channels(); ++c) {
            const S* src = x.v.row(c).data();
            S* dst = y.v.row(c).data();
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox)
                    dst[oy * ow + ox] =
                        (src[(2 * oy) * w_ + 2 * ox] + src[(2 * oy) * w_ + 2 * ox + 1] +
                         src[(2 * oy + 1) * w_ + 2 * ox] +
                         src[(2 * oy + 1) * w_ + 2 * ox + 1]) *
                        S(0.25);
        }
        return y;
    }

    FeatureMap<S> backward(const FeatureMap<S>& dy) {
        int oh = h_ / 2, ow = w_ / 2;
        FeatureMap<S> dx;
        dx.h = h_;
        dx.w = w_;
        dx.v.resize(dy.v.rows(), h_ * w_);
        for (int c = 0; c < dy.channels(); ++c) {
            const S* src = dy.v.row(c).data();
            S* dst = dx.v.row(c).data();
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    S g = src[oy * ow + ox] * S(0.25);
                    dst[(2 * oy) * w_ + 2 * ox] = g;
                    dst[(2 * oy) * w_ + 2 * ox + 1] = g;
                    dst[(2 * oy + 1) * w_ + 2 * ox] = g;
                    dst[(2 * oy + 1) * w_ + 2 * ox + 1] = g;
                }
        }
        return dx;
    }

private:
    int h_ = 0, w_ = 0;
};

// Nearest-neighbour x2 upsampling.
template <class S>
class Upsample2 {
public:
    FeatureMap<S> forward(const FeatureMap<S>& x) {
        h_ = x.h;
        w_ = x.w;
        FeatureMap<S> y;
        y.h = 2 * x.h;
        y.w = 2 * x.w;
        y.v.resize(x.v.rows(), y.h * y.w);
        for (int c = 0; c < x.channels(); ++c) {
            const S* src = x.v.row(c).data();
            S* dst = y.v.row(c).data();
            for (int yy = 0; yy < y.h; ++yy)
                for (int xx = 0; xx < y.w; ++xx)
                    dst[yy * y.w + xx] = src[(yy / 2) * w_ + xx / 2];
        }
        return y;
    }

    FeatureMap<S> backward(const FeatureMap<S>& dy) {
        FeatureMap<S> dx;
        dx.h = h_;
        dx.w = w_;
        dx.v = Mat<S>::Zero(dy.v.rows(), h_ * w_);
        int ow = 2 * w_;
        for (int c = 0; c < dy.channels(); ++c) {
            const S* src = dy.v.row(c).data();
            S* dst = dx.v.row(c).data();
            for (int yy = 0; yy < 2 * h_; ++yy)
                for (int xx = 0; xx < ow; ++xx)
                    dst[(yy / 2) * w_ + xx / 2] += src[yy * ow + xx];
        }
        return dx;
    }

private:
    int h_ = 0, w_ = 0;
};

// Single-head self-attention over spatial tokens, with residual output.
template <class S>
class SelfAttention {
public:
    SelfAttention() = default;
    SelfAttention(int channels, Rng& rng) : c_(channels) {
        auto init = [&](Mat<S>& m, double gain) {
            m.resize(channels, channels);
            he_init(m, channels, rng, gain);
        };
        init(Wq, 1.0);
        init(Wk, 1.0);
        init(Wv, 1.0);
        init(Wo, 0.2);
        gWq = Mat<S>::Zero(c_, c_);
        gWk = gWq;
        gWv = gWq;
        gWo = gWq;
    }

    FeatureMap<S> forward(const FeatureMap<S>& x) {
        x_ = x.v;
        q_.noalias() = Wq * x.v;
        k_.noalias() = Wk * x.v;
        v_.noalias() = Wv * x.v;
        S scale = S(1) / static_cast<S>(std::sqrt(static_cast<double>(c_)));
        Mat<S> scores = (q_.transpose() * k_) * scale;  // tokens x tokens
        attn_ = scores;
        for (Eigen::Index i = 0; i < attn_.rows(); ++i) {
            S m = attn_.row(i).maxCoeff();
            attn_.row(i) = (attn_.row(i).array() - m).exp();
            attn_.row(i) /= attn_.row(i).sum();
        }
        mix_.noalias() = v_ * attn_.transpose();
        FeatureMap<S> y;
        y.h = x.h;
        y.w = x.w;
        y.v.noalias() = Wo * mix_;
        y.v += x.v;
        return y;
    }

    FeatureMap<S> backward(const FeatureMap<S>& dy) {
        gWo.noalias() += dy.v * mix_.transpose();
        Mat<S> dmix = Wo.transpose() * dy.v;
        Mat<S> dv = dmix * attn_;
        Mat<S> dattn = dmix.transpose() * v_;  // tokens x tokens
        // softmax rows: dS_ij = A_ij (dA_ij - sum_j A_ij dA_ij)
        Mat<S> ds = attn_;
        for (Eigen::Index i = 0; i < ds.rows(); ++i) {
            S dot = attn_.row(i).dot(dattn.row(i));
            ds.row(i) = attn_.row(i).cwiseProduct(
                (dattn.row(i).array() - dot).matrix());
        }
        S scale = S(1) / static_cast<S>(std::sqrt(static_cast<double>(c_)));
        Mat<S> dq = (k_ * ds.transpose()) * scale;
        Mat<S> dk = (q_ * ds) * scale;
        gWq.noalias() += dq * x_.transpose();
        gWk.noalias() += dk * x_.transpose();
        gWv.noalias() += dv * x_.transpose();
        FeatureMap<S> dx;
        dx.h = dy.h;
        dx.w = dy.w;
        dx.v = dy.v;  // residual
        dx.v.noalias() += Wq.transpose() * dq;
        dx.v.noalias() += Wk.transpose() * dk;
        dx.v.noalias() += Wv.transpose() * dv;
        return dx;
    }

    void zero_grad() {
        gWq.setZero();
        gWk.setZero();
        gWv.setZero();
        gWo.setZero();
    }

    void visit(const std::string& prefix, const ParamVisitor<S>& f) {
        f(prefix + ".Wq", Wq, gWq);
        f(prefix + ".Wk", Wk, gWk);
        f(prefix + ".Wv", Wv, gWv);
        f(prefix + ".Wo", Wo, gWo);
    }

    Mat<S> Wq, Wk, Wv, Wo, gWq, gWk, gWv, gWo;

private:
    int c_ = 0;
    Mat<S> x_, q_, k_, v_, attn_, mix_;
};

// Residual block with a per-channel timestep-embedding shift between
// the two convolutions.
template <class S>
class ResBlock {
public:
    ResBlock() = default;
    ResBlock(int in_c, int out_c, int emb_dim, Rng& rng)
        : in_c_(in_c), out_c_(out_c) {
        conv1 = Conv2d<S>(in_c, out_c, 3, rng);
        conv2 = Conv2d<S>(out_c, out_c, 3, rng, 0.5);
        emb_lin = Linear<S>(emb_dim, out_c, rng, 0.5);
        if (in_c != out_c) skip = Conv2d<S>(in_c, out_c, 1, rng);
    }

    FeatureMap<S> forward(const FeatureMap<S>& x, const Vec<S>& emb) {
        x_ = x.v;
        FeatureMap<S> a0{silu(x.v), x.h, x.w};
        FeatureMap<S> h1 = conv1.forward(a0);
        Vec<S> proj = emb_lin.forward(emb);
        h1.v.colwise() += proj;
        h1_ = h1.v;
        FeatureMap<S> a1{silu(h1.v), h1.h, h1.w};
        FeatureMap<S> y = conv2.forward(a1);
        if (in_c_ != out_c_) {
            FeatureMap<S> xs{x.v, x.h, x.w};
            y.v += skip.forward(xs).v;
        } else {
            y.v += x.v;
        }
        return y;
    }

    // demb accumulates the gradient w.r.t. the shared embedding vector.
    FeatureMap<S> backward(const FeatureMap<S>& dy, Vec<S>& demb) {
        FeatureMap<S> da1 = conv2.backward(dy);
        FeatureMap<S> dh1{da1.v.cwiseProduct(silu_grad(h1_)), da1.h, da1.w};
        demb += emb_lin.backward(dh1.v.rowwise().sum());
        FeatureMap<S> da0 = conv1.backward(dh1);
        FeatureMap<S> dx;
        dx.h = da0.h;
        dx.w = da0.w;
        dx.v = da0.v.cwiseProduct(silu_grad(x_));
        if (in_c_ != out_c_) {
            dx.v += skip.backward(dy).v;
        } else {
            dx.v += dy.v;
        }
        return dx;
    }

    void zero_grad() {
        conv1.zero_grad();
        conv2.zero_grad();
        emb_lin.zero_grad();
        if (in_c_ != out_c_) skip.zero_grad();
    }

    void visit(const std::string& prefix, const ParamVisitor<S>& f) {
        conv1.visit(prefix + ".conv1", f);
        conv2.visit(prefix + ".conv2", f);
        emb_lin.visit(prefix + ".emb", f);
        if (in_c_ != out_c_) skip.visit(prefix + ".skip", f);
    }

    Conv2d<S> conv1, conv2, skip;
    Linear<S> emb_lin;

private:
    int in_c_ = 0, out_c_ = 0;
    Mat<S> x_, h1_;
};

}  // namespace padiff

#endif
