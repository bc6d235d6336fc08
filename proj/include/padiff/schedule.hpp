#ifndef PADIFF_SCHEDULE_HPP
#define PADIFF_SCHEDULE_HPP

// Noise schedule, forward diffusion, single reverse step, and the
// training loss. Timesteps are 1-based: beta(t) for t in [1, T].

#include "padiff/core.hpp"

#include <vector>

namespace padiff {

struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;       // beta[t-1] = beta_t
    std::vector<double> alpha_bar;  // prod_{s<=t} (1 - beta_s)
    std::vector<double> sigma;      // sqrt(beta_t)

    double beta_at(int t) const { return beta.at(static_cast<size_t>(t) - 1); }
    double alpha_bar_at(int t) const { return alpha_bar.at(static_cast<size_t>(t) - 1); }
    double sigma_at(int t) const { return sigma.at(static_cast<size_t>(t) - 1); }
};

inline NoiseSchedule linear_schedule(int T, double beta_1, double beta_T) {
    if (T < 2) throw std::invalid_argument("linear_schedule: T must be >= 2");
    if (!(beta_1 > 0 && beta_1 <= beta_T && beta_T < 1))
        throw std::invalid_argument("linear_schedule: need 0 < beta_1 <= beta_T < 1");
    NoiseSchedule s;
    s.T = T;
    s.beta.resize(T);
    s.alpha_bar.resize(T);
    s.sigma.resize(T);
    double prod = 1.0;
    for (int t = 1; t <= T; ++t) {
        double b = beta_1 + (beta_T - beta_1) * static_cast<double>(t - 1) / (T - 1);
        prod *= 1.0 - b;
        s.beta[t - 1] = b;
        s.alpha_bar[t - 1] = prod;
        s.sigma[t - 1] = std::sqrt(b);
    }
    return s;
}

// Closed-form marginal of the stepwise forward process:
// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.
template <class Scalar>
Image<Scalar> forward_sample(const Image<Scalar>& x0, int t, const Image<Scalar>& eps,
                             const NoiseSchedule& s) {
    if (t < 1 || t > s.T) throw std::invalid_argument("forward_sample: t out of range");
    if (eps.rows() != x0.rows() || eps.cols() != x0.cols())
        throw std::invalid_argument("forward_sample: eps shape mismatch");
    double ab = s.alpha_bar_at(t);
    return x0 * static_cast<Scalar>(std::sqrt(ab)) +
           eps * static_cast<Scalar>(std::sqrt(1.0 - ab));
}

// x_{t-1} = (x_t - beta_t / sqrt(1 - alpha_bar_t) * eps_hat) / sqrt(1 - beta_t)
//           + sigma_t z.
// The caller supplies z (zero at t = 1 by convention).
template <class Scalar>
Image<Scalar> reverse_step(const Image<Scalar>& x_t, int t, const Image<Scalar>& eps_hat,
                           const Image<Scalar>& z, const NoiseSchedule& s) {
    if (t < 1 || t > s.T) throw std::invalid_argument("reverse_step: t out of range");
    if (eps_hat.rows() != x_t.rows() || eps_hat.cols() != x_t.cols())
        throw std::invalid_argument("reverse_step: eps_hat shape mismatch");
    double b = s.beta_at(t);
    double ab = s.alpha_bar_at(t);
    Scalar inv = static_cast<Scalar>(1.0 / std::sqrt(1.0 - b));
    Scalar coef = static_cast<Scalar>(b / std::sqrt(1.0 - ab));
    return (x_t - eps_hat * coef) * inv + z * static_cast<Scalar>(s.sigma_at(t));
}

enum class LossNorm { squared_l2, l1 };

// Mean over pixels of the elementwise prediction error.
template <class Scalar>
double training_loss(const Image<Scalar>& eps, const Image<Scalar>& eps_hat,
                     LossNorm norm = LossNorm::squared_l2) {
    if (eps.rows() != eps_hat.rows() || eps.cols() != eps_hat.cols())
        throw std::invalid_argument("training_loss: shape mismatch");
    Image<Scalar> d = eps - eps_hat;
    if (norm == LossNorm::squared_l2)
        return d.template cast<double>().square().mean();
    return d.template cast<double>().abs().mean();
}

}  // namespace padiff

#endif
