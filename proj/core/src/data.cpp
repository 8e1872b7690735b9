#include "fcce/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "fcce/parallel.hpp"
#include "fcce/pgm.hpp"
#include "fcce/random.hpp"
#include "fcce/tensor_file.hpp"

namespace fcce::data {

namespace {

constexpr int kMaxRegenerations = 64;

struct RingGeometry {
    double cx, cy, outer;
    double amplitude[3];
    double phase[3];
    std::vector<double> band_jitter;
};

RingGeometry draw_geometry(Rng& rng, std::size_t size, int num_classes) {
    const double s = static_cast<double>(size);
    RingGeometry g;
    g.cx = s / 2.0 - 0.5 + rng.uniform(-s / 16.0, s / 16.0);
    g.cy = s / 2.0 - 0.5 + rng.uniform(-s / 16.0, s / 16.0);
    g.outer = s * rng.uniform(0.36, 0.44);
    for (int m = 0; m < 3; ++m) {
        g.amplitude[m] = rng.uniform(-0.08, 0.08);
        g.phase[m] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    for (int k = 1; k < num_classes; ++k) {
        g.band_jitter.push_back(rng.uniform(-0.05, 0.05));
    }
    return g;
}

std::vector<int> rasterize(const RingGeometry& g, std::size_t size, int num_classes) {
    std::vector<int> labels(size * size, 0);
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            const double dx = static_cast<double>(x) - g.cx;
            const double dy = static_cast<double>(y) - g.cy;
            const double theta = std::atan2(dy, dx);
            double deform = 1.0;
            for (int m = 0; m < 3; ++m) {
                deform += g.amplitude[m] * std::cos((m + 2) * theta + g.phase[m]);
            }
            const double rho = std::sqrt(dx * dx + dy * dy) / deform;
            int label = 0;
            // Boundary k separates class k-1 (outside) from class k (inside); radii shrink with k.
            for (int k = 1; k < num_classes; ++k) {
                const double frac = 1.0 - 0.75 * static_cast<double>(k - 1) / static_cast<double>(num_classes - 1);
                const double radius = g.outer * (frac + g.band_jitter[static_cast<std::size_t>(k - 1)]);
                if (rho < radius) {
                    label = k;
                }
            }
            labels[y * size + x] = label;
        }
    }
    return labels;
}

bool all_classes_present(const std::vector<int>& labels, int num_classes) {
    std::vector<bool> seen(static_cast<std::size_t>(num_classes), false);
    for (int l : labels) {
        seen[static_cast<std::size_t>(l)] = true;
    }
    return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

}  // namespace

void PhantomConfig::validate() const {
    if (size < 16 || (size & (size - 1)) != 0) {
        throw ConfigError("phantom size must be a power of two >= 16");
    }
    if (num_classes < 2) {
        throw ConfigError("phantom num_classes must be at least 2");
    }
    if (!(boundary_blur_sigma >= 0.0) || !(noise_sigma >= 0.0)) {
        throw ConfigError("phantom blur and noise sigmas must be non-negative");
    }
}

const std::vector<std::string>& class_names() {
    static const std::vector<std::string> names{"BG", "CSF", "GM", "WM"};
    return names;
}

double class_mean(int k, int num_classes) {
    return 0.05 + 0.85 * static_cast<double>(k) / static_cast<double>(num_classes - 1);
}

std::vector<double> gaussian_blur(const std::vector<double>& image, std::size_t height, std::size_t width,
                                  double sigma) {
    if (sigma <= 0.0) {
        return image;
    }
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const double w = std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));
        kernel[static_cast<std::size_t>(k + radius)] = w;
        total += w;
    }
    for (double& w : kernel) {
        w /= total;
    }
    const auto h = static_cast<std::ptrdiff_t>(height);
    const auto wd = static_cast<std::ptrdiff_t>(width);
    std::vector<double> tmp(image.size()), out(image.size());
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < wd; ++x) {
            double acc = 0.0;
            for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
                const std::ptrdiff_t xx = std::clamp<std::ptrdiff_t>(x + k, 0, wd - 1);
                acc += kernel[static_cast<std::size_t>(k + radius)] * image[static_cast<std::size_t>(y * wd + xx)];
            }
            tmp[static_cast<std::size_t>(y * wd + x)] = acc;
        }
    }
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < wd; ++x) {
            double acc = 0.0;
            for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
                const std::ptrdiff_t yy = std::clamp<std::ptrdiff_t>(y + k, 0, h - 1);
                acc += kernel[static_cast<std::size_t>(k + radius)] * tmp[static_cast<std::size_t>(yy * wd + x)];
            }
            out[static_cast<std::size_t>(y * wd + x)] = acc;
        }
    }
    return out;
}

LabeledImage generate_phantom(const PhantomConfig& cfg, std::size_t index) {
    cfg.validate();
    LabeledImage img;
    img.index = index;
    img.seed = derive_seed(cfg.seed, index);
    img.blur = cfg.boundary_blur_sigma;
    img.noise = cfg.noise_sigma;
    img.height = img.width = cfg.size;

    // Geometry and noise use separate streams so labels do not depend on blur/noise.
    Rng geometry_rng(derive_seed(img.seed, 0));
    Rng noise_rng(derive_seed(img.seed, 1));
    for (int attempt = 0;; ++attempt) {
        const RingGeometry g = draw_geometry(geometry_rng, cfg.size, cfg.num_classes);
        img.labels = rasterize(g, cfg.size, cfg.num_classes);
        if (all_classes_present(img.labels, cfg.num_classes)) {
            break;
        }
        if (attempt == kMaxRegenerations) {
            throw ConfigError("phantom: could not place all classes at size " + std::to_string(cfg.size));
        }
    }

    std::vector<double> clean(img.labels.size());
    for (std::size_t k = 0; k < clean.size(); ++k) {
        clean[k] = class_mean(img.labels[k], cfg.num_classes);
    }
    img.intensities = gaussian_blur(clean, img.height, img.width, cfg.boundary_blur_sigma);
    for (double& v : img.intensities) {
        const double noise = noise_rng.normal();
        v = std::clamp(v + cfg.noise_sigma * noise, 0.0, 1.0);
    }
    return img;
}

std::vector<LabeledImage> generate_phantoms(const PhantomConfig& cfg) {
    cfg.validate();
    std::vector<LabeledImage> images(cfg.count);
    parallel_for(cfg.count, [&](std::size_t i) { images[i] = generate_phantom(cfg, i); });
    return images;
}

void cache_memberships(std::vector<LabeledImage>& images, const fcm::FcmConfig& fcm_cfg) {
    fcm_cfg.validate();
    parallel_for(images.size(), [&](std::size_t i) {
        fcm::FcmConfig cfg = fcm_cfg;
        cfg.seed = derive_seed(fcm_cfg.seed, images[i].index);
        try {
            images[i].memberships = fcm::run(images[i].intensities, cfg).memberships;
        } catch (const DegenerateCluster& e) {
            throw DegenerateCluster("image " + std::to_string(images[i].index) + ": " + e.what());
        }
    });
}

DatasetSplit split_dataset(std::vector<LabeledImage> images, double split_fraction, std::uint64_t seed) {
    if (!(split_fraction >= 0.0 && split_fraction <= 1.0)) {
        throw ConfigError("split_fraction must lie in [0, 1]");
    }
    Rng rng(seed);
    for (std::size_t i = images.size(); i > 1; --i) {
        std::swap(images[i - 1], images[rng.below(i)]);
    }
    const auto n_train = static_cast<std::size_t>(std::llround(split_fraction * static_cast<double>(images.size())));
    DatasetSplit split;
    split.split_fraction = split_fraction;
    for (std::size_t i = 0; i < images.size(); ++i) {
        (i < n_train ? split.train : split.val).push_back(std::move(images[i]));
    }
    return split;
}

DatasetSplit prepare_dataset(std::vector<LabeledImage> images, const fcm::FcmConfig& fcm_cfg,
                             double split_fraction, std::uint64_t seed) {
    if (images.empty()) {
        throw InvalidInput("prepare_dataset: no images");
    }
    cache_memberships(images, fcm_cfg);
    return split_dataset(std::move(images), split_fraction, seed);
}

std::string indexed_name(const char* prefix, std::size_t index, const char* extension) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%04zu.%s", prefix, index, extension);
    return buf;
}

void save_dataset(const std::filesystem::path& root, const std::vector<LabeledImage>& images) {
    std::filesystem::create_directories(root);
    std::ofstream manifest(root / "manifest.txt");
    for (const auto& img : images) {
        io::save_pgm(img.intensities, img.height, img.width, root / indexed_name("img", img.index, "pgm"), 65535);
        io::save_labels_pgm(img.labels, img.height, img.width, root / indexed_name("lbl", img.index, "pgm"));
        if (img.memberships) {
            const std::size_t shape[] = {img.memberships->classes(), img.height, img.width};
            io::save_tensor(root / indexed_name("mem", img.index, "bin"), shape, img.memberships->values());
        }
        manifest << img.index << ' ' << img.seed << ' ' << img.blur << ' ' << img.noise << '\n';
    }
    if (!manifest) {
        throw InvalidInput("save_dataset: failed writing manifest in " + root.string());
    }
}

std::vector<LabeledImage> load_dataset(const std::filesystem::path& root) {
    std::ifstream manifest(root / "manifest.txt");
    if (!manifest) {
        throw ConfigError("dataset: no manifest.txt in " + root.string());
    }
    std::vector<LabeledImage> images;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(manifest, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') {
            continue;
        }
        std::istringstream fields(line);
        LabeledImage img;
        if (!(fields >> img.index >> img.seed >> img.blur >> img.noise)) {
            throw ConfigError("dataset: malformed manifest line " + std::to_string(line_no));
        }
        const io::GrayImage gray = io::load_pgm(root / indexed_name("img", img.index, "pgm"));
        img.height = gray.height;
        img.width = gray.width;
        img.intensities = gray.values;
        std::size_t lh = 0, lw = 0;
        img.labels = io::load_labels_pgm(root / indexed_name("lbl", img.index, "pgm"), &lh, &lw);
        if (lh != img.height || lw != img.width) {
            throw ConfigError("dataset: label map size differs from image " + std::to_string(img.index));
        }
        const auto mem_path = root / indexed_name("mem", img.index, "bin");
        if (std::filesystem::exists(mem_path)) {
            io::StoredTensor t = io::load_tensor(mem_path);
            if (t.shape.size() != 3 || t.shape[1] != img.height || t.shape[2] != img.width) {
                throw ConfigError("dataset: membership tensor shape mismatch for image " + std::to_string(img.index));
            }
            ClassMatrix u(t.shape[0], img.pixels());
            u.values() = std::move(t.values);
            img.memberships = std::move(u);
        }
        images.push_back(std::move(img));
    }
    if (images.empty()) {
        throw ConfigError("dataset: manifest in " + root.string() + " lists no images");
    }
    return images;
}

}  // namespace fcce::data
