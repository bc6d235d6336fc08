#include "padiff/phantom.hpp"

#include "padiff/npz.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace padiff {

namespace {

struct Curve {
    std::vector<Eigen::Vector2d> points;  // densely sampled centerline
    double radius;                        // Gaussian cross-section sigma, px
    double peak;
};

Eigen::Vector2d bezier(const Eigen::Vector2d p[4], double t) {
    double u = 1.0 - t;
    return u * u * u * p[0] + 3 * u * u * t * p[1] + 3 * u * t * t * p[2] +
           t * t * t * p[3];
}

Curve sample_curve(int size, Rng& rng) {
    Curve c;
    double margin = 0.12 * size;
    Eigen::Vector2d ctrl[4];
    for (int k = 0; k < 4; ++k)
        ctrl[k] = {rng.uniform(margin, size - 1 - margin),
                   rng.uniform(margin, size - 1 - margin)};
    int n = 6 * size;
    c.points.reserve(n + 1);
    for (int i = 0; i <= n; ++i)
        c.points.push_back(bezier(ctrl, static_cast<double>(i) / n));
    c.radius = rng.uniform(0.5, 0.95) * std::sqrt(size / 32.0);
    c.peak = rng.uniform(0.6, 1.0);
    return c;
}

double min_point_distance(const Curve& a, const Curve& b) {
    double best = 1e30;
    for (const auto& p : a.points)
        for (const auto& q : b.points)
            best = std::min(best, (p - q).norm());
    return best;
}

}  // namespace

VesselPhantom generate_phantom(uint64_t seed, int size, int n_vessels) {
    if (size < 16) throw std::invalid_argument("generate_phantom: size must be >= 16");
    if (n_vessels < 1) throw std::invalid_argument("generate_phantom: n_vessels must be >= 1");

    Rng rng = Rng::with_stream(seed, 0x70686172ull);
    std::vector<Curve> curves;
    // Rejection sampling keeps the tubes disjoint so the mask has one
    // connected component per vessel.
    for (int v = 0; v < n_vessels; ++v) {
        Curve cand;
        bool placed = false;
        for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
            cand = sample_curve(size, rng);
            // thin the tubes progressively if placement keeps failing
            cand.radius *= std::pow(0.85, attempt / 100);
            placed = true;
            for (const Curve& prev : curves) {
                double gap = 2.5 * (cand.radius + prev.radius) + 1.5;
                if (min_point_distance(cand, prev) < gap) {
                    placed = false;
                    break;
                }
            }
        }
        curves.push_back(cand);
    }

    VesselPhantom ph;
    ph.image = ImageF::Zero(size, size);
    for (int r = 0; r < size; ++r) {
        for (int col = 0; col < size; ++col) {
            Eigen::Vector2d p(static_cast<double>(r), static_cast<double>(col));
            double best = 0.0;
            for (const Curve& c : curves) {
                double d2 = 1e30;
                for (const auto& q : c.points) d2 = std::min(d2, (p - q).squaredNorm());
                double cut = 2.5 * c.radius;
                if (d2 < cut * cut) {
                    double val = c.peak * std::exp(-d2 / (2.0 * c.radius * c.radius));
                    best = std::max(best, val);
                }
            }
            ph.image(r, col) = static_cast<float>(std::min(best, 1.0));
        }
    }
    ph.vessel_mask = ph.image > 0.0f;
    return ph;
}

ImageF attenuation_field(const ShotGeometry& g, int size) {
    if (g.sigma <= 0) throw std::invalid_argument("attenuation_field: sigma must be > 0");
    if (g.center_row < 0 || g.center_row > size - 1 || g.center_col < 0 ||
        g.center_col > size - 1)
        throw std::invalid_argument("attenuation_field: center out of bounds");
    ImageF out(size, size);
    double inv = 1.0 / (2.0 * g.sigma * g.sigma);
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            double dr = r - g.center_row;
            double dc = c - g.center_col;
            out(r, c) = static_cast<float>(0.2 + 0.8 * std::exp(-(dr * dr + dc * dc) * inv));
        }
    }
    return out;
}

ConfidenceMap make_confidence_map(const ShotGeometry& geometry, int size) {
    return ConfidenceMap{attenuation_field(geometry, size)};
}

ShotImage simulate_shot(const VesselPhantom& phantom, const ShotGeometry& geometry,
                        double noise_level, uint64_t seed) {
    if (noise_level < 0) throw std::invalid_argument("simulate_shot: noise_level must be >= 0");
    int size = static_cast<int>(phantom.image.rows());
    ShotImage shot;
    shot.geometry = geometry;
    shot.confidence = make_confidence_map(geometry, size);
    ImageF att = attenuation_field(geometry, size);
    Rng rng = Rng::with_stream(seed, 0x73686f74ull);
    ImageF noise = rng.normal_image<float>(size, size);
    shot.image = clip01<float>(phantom.image * att + noise * static_cast<float>(noise_level));
    return shot;
}

ImageF average_shots(const std::vector<ShotImage>& shots) {
    if (shots.empty()) throw std::invalid_argument("average_shots: empty shot list");
    ImageF acc = ImageF::Zero(shots[0].image.rows(), shots[0].image.cols());
    for (const ShotImage& s : shots) {
        if (s.image.rows() != acc.rows() || s.image.cols() != acc.cols())
            throw std::invalid_argument("average_shots: shape mismatch");
        acc += s.image;
    }
    return acc / static_cast<float>(shots.size());
}

ShotGeometry sample_geometry(int size, Rng& rng) {
    ShotGeometry g;
    g.center_row = rng.uniform(0.1 * (size - 1), 0.9 * (size - 1));
    g.center_col = rng.uniform(0.1 * (size - 1), 0.9 * (size - 1));
    g.sigma = rng.uniform(0.2, 0.4) * size;
    return g;
}

PairedSample make_sample(const VesselPhantom& phantom, int n_shots, int n_hq_shots,
                         double noise_level, int location_id, Rng& rng) {
    PairedSample sample;
    sample.location_id = location_id;
    for (int m = 0; m < n_shots; ++m) {
        ShotGeometry g = sample_geometry(static_cast<int>(phantom.image.rows()), rng);
        sample.shots.push_back(simulate_shot(phantom, g, noise_level, rng.next_u64()));
    }
    std::vector<ShotImage> hq;
    hq.reserve(n_hq_shots);
    for (int k = 0; k < n_hq_shots; ++k) {
        ShotGeometry g = sample_geometry(static_cast<int>(phantom.image.rows()), rng);
        hq.push_back(simulate_shot(phantom, g, noise_level, rng.next_u64()));
    }
    sample.target = average_shots(hq);
    return sample;
}

namespace {

void write_sample(const std::string& dir, int index, const PairedSample& s,
                  uint64_t phantom_seed, int n_vessels) {
    char name[64];
    std::snprintf(name, sizeof(name), "sample_%06d", index);
    int m = static_cast<int>(s.shots.size());
    int h = static_cast<int>(s.target.rows());
    int w = static_cast<int>(s.target.cols());

    std::vector<float> shots(static_cast<size_t>(m) * h * w);
    std::vector<float> conf(static_cast<size_t>(m) * h * w);
    for (int i = 0; i < m; ++i) {
        std::copy(s.shots[i].image.data(), s.shots[i].image.data() + h * w,
                  shots.begin() + static_cast<size_t>(i) * h * w);
        std::copy(s.shots[i].confidence.values.data(),
                  s.shots[i].confidence.values.data() + h * w,
                  conf.begin() + static_cast<size_t>(i) * h * w);
    }
    NpzWriter npz(dir + "/" + name + ".npz");
    npz.add_array("shots", {static_cast<size_t>(m), static_cast<size_t>(h),
                            static_cast<size_t>(w)}, shots.data());
    npz.add_array("conf", {static_cast<size_t>(m), static_cast<size_t>(h),
                           static_cast<size_t>(w)}, conf.data());
    npz.add_array("target", {static_cast<size_t>(h), static_cast<size_t>(w)},
                  s.target.data());
    npz.close();

    json side;
    side["location_id"] = s.location_id;
    side["phantom_seed"] = phantom_seed;
    side["n_vessels"] = n_vessels;
    json geoms = json::array();
    for (const ShotImage& shot : s.shots)
        geoms.push_back({{"center_row", shot.geometry.center_row},
                         {"center_col", shot.geometry.center_col},
                         {"sigma", shot.geometry.sigma}});
    side["geometries"] = geoms;
    std::ofstream(dir + "/" + name + ".json") << side.dump(2) << "\n";
}

}  // namespace

void build_dataset(const std::string& root, const DatasetConfig& cfg, uint64_t seed) {
    if (cfg.n_train < 1 || cfg.n_val < 1 || cfg.n_test < 1)
        throw std::invalid_argument("build_dataset: split counts must be >= 1");
    if (cfg.n_shots < 1) throw std::invalid_argument("build_dataset: n_shots must be >= 1");
    uint64_t tv_lo = cfg.trainval_phantom_seed;
    uint64_t tv_hi = tv_lo + static_cast<uint64_t>(cfg.n_train + cfg.n_val);
    uint64_t te_lo = cfg.test_phantom_seed;
    uint64_t te_hi = te_lo + static_cast<uint64_t>(cfg.n_test);
    if (tv_lo < te_hi && te_lo < tv_hi)
        throw std::invalid_argument("build_dataset: test phantom seeds overlap train/val");

    struct Split {
        const char* name;
        int count;
        uint64_t seed0;
    };
    const Split splits[] = {
        {"train", cfg.n_train, tv_lo},
        {"val", cfg.n_val, tv_lo + static_cast<uint64_t>(cfg.n_train)},
        {"test", cfg.n_test, te_lo},
    };

    int location = 0;
    for (const Split& sp : splits) {
        fs::create_directories(fs::path(root) / sp.name);
        for (int i = 0; i < sp.count; ++i, ++location) {
            uint64_t phantom_seed = sp.seed0 + static_cast<uint64_t>(i);
            Rng rng = Rng::with_stream(seed, splitmix64(phantom_seed) ^ 0x646174ull);
            int n_vessels = rng.uniform_int(2, 4);
            VesselPhantom ph = generate_phantom(phantom_seed, cfg.image_size, n_vessels);
            PairedSample s = make_sample(ph, cfg.n_shots, cfg.n_hq_shots,
                                         cfg.noise_level, location, rng);
            write_sample((fs::path(root) / sp.name).string(), i, s, phantom_seed,
                         n_vessels);
        }
    }

    json meta;
    meta["M"] = cfg.n_shots;
    meta["K_hq"] = cfg.n_hq_shots;
    meta["noise_level"] = cfg.noise_level;
    meta["image_size"] = cfg.image_size;
    meta["n_train"] = cfg.n_train;
    meta["n_val"] = cfg.n_val;
    meta["n_test"] = cfg.n_test;
    meta["seed"] = seed;
    meta["trainval_phantom_seed"] = cfg.trainval_phantom_seed;
    meta["test_phantom_seed"] = cfg.test_phantom_seed;
    std::ofstream(fs::path(root) / "meta.json") << meta.dump(2) << "\n";
}

DatasetConfig load_meta(const std::string& root) {
    std::ifstream in(fs::path(root) / "meta.json");
    if (!in) throw not_found_error("dataset meta.json missing under " + root);
    json meta = json::parse(in);
    DatasetConfig cfg;
    cfg.n_shots = meta.at("M");
    cfg.n_hq_shots = meta.at("K_hq");
    cfg.noise_level = meta.at("noise_level");
    cfg.image_size = meta.at("image_size");
    cfg.n_train = meta.at("n_train");
    cfg.n_val = meta.at("n_val");
    cfg.n_test = meta.at("n_test");
    cfg.trainval_phantom_seed = meta.at("trainval_phantom_seed");
    cfg.test_phantom_seed = meta.at("test_phantom_seed");
    return cfg;
}

std::vector<PairedSample> load_split(const std::string& root, const std::string& split) {
    fs::path dir = fs::path(root) / split;
    if (!fs::exists(dir)) throw not_found_error("dataset split missing: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".npz") files.push_back(e.path());
    std::sort(files.begin(), files.end());

    std::vector<PairedSample> out;
    for (const fs::path& f : files) {
        NpzReader npz(f.string());
        NpyArray shots = npz.array("shots");
        NpyArray conf = npz.array("conf");
        NpyArray target = npz.array("target");
        if (shots.shape.size() != 3 || target.shape.size() != 2)
            throw std::runtime_error("dataset: bad array rank in " + f.string());
        size_t m = shots.shape[0], h = shots.shape[1], w = shots.shape[2];

        PairedSample s;
        s.target = Eigen::Map<const ImageF>(target.data.data(), h, w);

        fs::path side = f;
        side.replace_extension(".json");
        json meta;
        if (std::ifstream in{side}; in) meta = json::parse(in);
        if (meta.count("location_id")) s.location_id = meta["location_id"];

        for (size_t i = 0; i < m; ++i) {
            ShotImage shot;
            shot.image = Eigen::Map<const ImageF>(shots.data.data() + i * h * w, h, w);
            shot.confidence.values =
                Eigen::Map<const ImageF>(conf.data.data() + i * h * w, h, w);
            if (meta.count("geometries")) {
                const json& g = meta["geometries"][i];
                shot.geometry = {g["center_row"], g["center_col"], g["sigma"]};
            }
            s.shots.push_back(std::move(shot));
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace padiff
