#ifndef PADIFF_PHANTOM_HPP
#define PADIFF_PHANTOM_HPP

// Synthetic paired-data simulator: vessel phantoms, per-shot degraded
// images driven by a light-irradiation geometry, confidence maps, and
// averaged ground truth.

#include "padiff/core.hpp"

#include <string>
#include <vector>

namespace padiff {

struct VesselPhantom {
    ImageF image;  // intensities in [0,1]
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> vessel_mask;
};

struct ShotGeometry {
    double center_row = 0;  // light-irradiation position, pixels
    double center_col = 0;
    double sigma = 1;       // spread of the scattering Gaussian, pixels
};

struct ConfidenceMap {
    ImageF values;  // each entry in [0.2, 1.0], peak at the geometry center
};

struct ShotImage {
    ImageF image;  // [0,1]
    ShotGeometry geometry;
    ConfidenceMap confidence;
};

struct PairedSample {
    std::vector<ShotImage> shots;  // the M inputs
    ImageF target;                 // high-quality image, [0,1]
    int location_id = 0;
};

struct DatasetConfig {
    int n_train = 256;
    int n_val = 16;
    int n_test = 64;
    int image_size = 32;
    int n_shots = 3;        // M
    int n_hq_shots = 20;    // K_hq, shots averaged into the target
    double noise_level = 0.15;
    // Phantom seed offsets per split. Test must not overlap train/val
    // (different "subjects").
    uint64_t trainval_phantom_seed = 1000;
    uint64_t test_phantom_seed = 900000;
};

VesselPhantom generate_phantom(uint64_t seed, int size, int n_vessels);

ConfidenceMap make_confidence_map(const ShotGeometry& geometry, int size);

// Per-pixel signal attenuation; same Gaussian-with-0.2-floor form as the
// confidence map, so the confidence map is an exact reliability prior.
ImageF attenuation_field(const ShotGeometry& geometry, int size);

ShotImage simulate_shot(const VesselPhantom& phantom, const ShotGeometry& geometry,
                        double noise_level, uint64_t seed);

ImageF average_shots(const std::vector<ShotImage>& shots);

ShotGeometry sample_geometry(int size, Rng& rng);

PairedSample make_sample(const VesselPhantom& phantom, int n_shots, int n_hq_shots,
                         double noise_level, int location_id, Rng& rng);

// Writes <root>/{train,val,test}/sample_%06d.npz (+ .json geometry
// sidecars) and <root>/meta.json. Deterministic per (config, seed).
void build_dataset(const std::string& root, const DatasetConfig& config, uint64_t seed);

std::vector<PairedSample> load_split(const std::string& root, const std::string& split);

DatasetConfig load_meta(const std::string& root);

}  // namespace padiff

#endif
