#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fcce/fcm.hpp"
#include "fcce/matrix.hpp"

namespace fcce::data {

/// Phantom generator settings. Boundary blur stands in for the partial-volume effect.
struct PhantomConfig {
    std::size_t size = 32;
    int num_classes = 4;
    double boundary_blur_sigma = 0.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 1;
    std::size_t count = 64;

    void validate() const;
};

struct LabeledImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> intensities;  // in [0, 1]
    std::vector<int> labels;          // in [0, c)
    std::optional<ClassMatrix> memberships;
    // Provenance recorded in the dataset manifest.
    std::size_t index = 0;
    std::uint64_t seed = 0;
    double blur = 0.0;
    double noise = 0.0;

    std::size_t pixels() const noexcept { return height * width; }
};

struct DatasetSplit {
    std::vector<LabeledImage> train;
    std::vector<LabeledImage> val;
    double split_fraction = 0.8;
};

/// Display names for the default four tissue classes.
const std::vector<std::string>& class_names();

/// Mean intensity of class k: evenly spaced from 0.05 (background) to 0.9.
double class_mean(int k, int num_classes);

/// Nested deformed rings (background outside, innermost class at the centre), crisp
/// labels taken before blurring, then Gaussian blur and additive Gaussian noise.
/// Images are independent of each other and of the blur/noise settings' geometry.
std::vector<LabeledImage> generate_phantoms(const PhantomConfig& cfg);
LabeledImage generate_phantom(const PhantomConfig& cfg, std::size_t index);

/// Separable Gaussian blur with a kernel truncated at radius ceil(3 sigma), clamped borders.
std::vector<double> gaussian_blur(const std::vector<double>& image, std::size_t height, std::size_t width,
                                  double sigma);

/// Runs FCM on every image (caching memberships), shuffles with `seed` and splits.
/// The FCM cluster count must match the label count when memberships are blended.
DatasetSplit prepare_dataset(std::vector<LabeledImage> images, const fcm::FcmConfig& fcm_cfg,
                             double split_fraction, std::uint64_t seed);

/// Shuffle and split without touching memberships.
DatasetSplit split_dataset(std::vector<LabeledImage> images, double split_fraction, std::uint64_t seed);

/// Computes and caches FCM memberships in place; image order is preserved.
void cache_memberships(std::vector<LabeledImage>& images, const fcm::FcmConfig& fcm_cfg);

// Directory layout: img_%04d.pgm, lbl_%04d.pgm, mem_%04d.bin (when cached) and
// manifest.txt with one "index seed blur noise" line per image.
void save_dataset(const std::filesystem::path& root, const std::vector<LabeledImage>& images);
std::vector<LabeledImage> load_dataset(const std::filesystem::path& root);

std::string indexed_name(const char* prefix, std::size_t index, const char* extension);

}  // namespace fcce::data
