#ifndef PADIFF_CORE_HPP
#define PADIFF_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace padiff {

template <class Scalar>
using Image = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using ImageF = Image<float>;
using ImageD = Image<double>;

// Error kinds used across the library. not_found_error and
// unsupported_error carry distinct types so callers can map them to
// exit codes; everything precondition-shaped is std::invalid_argument.
struct not_found_error : std::runtime_error {
    explicit not_found_error(const std::string& what) : std::runtime_error(what) {}
};

struct unsupported_error : std::runtime_error {
    explicit unsupported_error(const std::string& what) : std::runtime_error(what) {}
};

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Seeded generator with in-house uniform/normal transforms so that
// streams are bit-stable across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed), seed_mix_(splitmix64(seed)) {}

    uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive bounds
    int uniform_int(int lo, int hi) {
        if (hi < lo) throw std::invalid_argument("uniform_int: hi < lo");
        uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
        return lo + static_cast<int>(gen_() % span);
    }

    // Box-Muller with a cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    template <class Scalar>
    Image<Scalar> normal_image(Eigen::Index rows, Eigen::Index cols) {
        Image<Scalar> out(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j)
                out(i, j) = static_cast<Scalar>(normal());
        return out;
    }

    // Independent substream; `stream` disambiguates forks from the same parent.
    Rng fork(uint64_t stream) const {
        return Rng(splitmix64(seed_mix_ ^ splitmix64(stream)));
    }

    static Rng with_stream(uint64_t seed, uint64_t stream) {
        return Rng(splitmix64(splitmix64(seed) ^ splitmix64(stream)));
    }

private:
    std::mt19937_64 gen_;
    uint64_t seed_mix_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

template <class Scalar>
Image<Scalar> clip01(const Image<Scalar>& img) {
    return img.min(Scalar(1)).max(Scalar(0));
}

// Model range is [-1, 1]; data range is [0, 1].
template <class Scalar>
Image<Scalar> to_model_range(const Image<Scalar>& img01) {
    return img01 * Scalar(2) - Scalar(1);
}

template <class Scalar>
Image<Scalar> from_model_range(const Image<Scalar>& img) {
    return (img.min(Scalar(1)).max(Scalar(-1)) + Scalar(1)) * Scalar(0.5);
}

}  // namespace padiff

#endif
