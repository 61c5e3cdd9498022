#include "focusnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "focusnet/errors.hpp"
#include "focusnet/pnm.hpp"

namespace fs = std::filesystem;

namespace focusnet {

namespace {

constexpr double kStdFloor = 1e-6;

// Reflect index into [0, n) (mirror without repeating the border pixel,
// falling back to clamping for tiny images).
int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    int m = i % period;
    if (m < 0) m += period;
    return (m < n) ? m : period - m;
}

float bilinear_reflect(const TensorF& img, int c, double y, double x) {
    const int h = img.dim(1), w = img.dim(2);
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const double fy = y - y0;
    const double fx = x - x0;
    const int ya = reflect_index(y0, h), yb = reflect_index(y0 + 1, h);
    const int xa = reflect_index(x0, w), xb = reflect_index(x0 + 1, w);
    const double v00 = img.at3(c, ya, xa), v01 = img.at3(c, ya, xb);
    const double v10 = img.at3(c, yb, xa), v11 = img.at3(c, yb, xb);
    return static_cast<float>((1 - fy) * ((1 - fx) * v00 + fx * v01) +
                              fy * ((1 - fx) * v10 + fx * v11));
}

float nearest_reflect(const TensorF& img, int c, double y, double x) {
    const int iy = reflect_index(static_cast<int>(std::lround(y)), img.dim(1));
    const int ix = reflect_index(static_cast<int>(std::lround(x)), img.dim(2));
    return img.at3(c, iy, ix);
}

void check_sample(const SegmentationSample& s) {
    if (s.image.rank() != 3 || s.mask.rank() != 3 || s.mask.dim(0) != 1 ||
        s.image.dim(1) != s.mask.dim(1) || s.image.dim(2) != s.mask.dim(2)) {
        throw ShapeError("sample " + s.id + ": image " + shape_str(s.image.shape) +
                         " and mask " + shape_str(s.mask.shape) + " are inconsistent");
    }
}

std::string stem_of(const fs::path& p) { return p.stem().string(); }

}  // namespace

void AugmentationConfig::validate() const {
    if (hflip_prob < 0 || hflip_prob > 1 || vflip_prob < 0 || vflip_prob > 1) {
        throw ParamError("flip probabilities must be in [0,1]");
    }
    if (zoom_lo <= 0 || zoom_hi < zoom_lo || zoom_lo > 1.0 || zoom_hi < 1.0) {
        throw ParamError("zoom range must be positive and contain 1.0");
    }
    if (channel_shift < 0 || shift_fraction < 0 || shift_fraction > 1) {
        throw ParamError("channel shift settings out of range");
    }
}

DatasetManifest load_dataset(const std::string& root) {
    const fs::path images_dir = fs::path(root) / "images";
    const fs::path masks_dir = fs::path(root) / "masks";
    if (!fs::is_directory(images_dir)) throw DataError("missing images directory: " + images_dir.string());
    if (!fs::is_directory(masks_dir)) throw DataError("missing masks directory: " + masks_dir.string());

    std::map<std::string, fs::path> images;
    for (const auto& entry : fs::directory_iterator(images_dir)) {
        if (entry.is_regular_file()) images.emplace(stem_of(entry.path()), entry.path());
    }
    std::map<std::string, fs::path> masks;
    for (const auto& entry : fs::directory_iterator(masks_dir)) {
        if (entry.is_regular_file()) masks.emplace(stem_of(entry.path()), entry.path());
    }

    DatasetManifest manifest;
    manifest.source = root;
    int channels = -1;
    for (const auto& [stem, img_path] : images) {
        auto mit = masks.find(stem);
        if (mit == masks.end()) throw DataError("no mask found for image stem '" + stem + "'");
        const PnmImage img = read_pnm(img_path.string());
        const PnmImage msk = read_pnm(mit->second.string());
        if (msk.channels != 1) throw DataError("mask must be grayscale: " + mit->second.string());
        if (msk.width != img.width || msk.height != img.height) {
            throw DataError("image/mask dimension mismatch for stem '" + stem + "'");
        }
        if (channels == -1) {
            channels = img.channels;
        } else if (channels != img.channels) {
            throw DataError("mixed channel counts in dataset (stem '" + stem + "')");
        }

        SegmentationSample s;
        s.id = stem;
        s.image = TensorF({img.channels, img.height, img.width});
        for (int c = 0; c < img.channels; ++c)
            for (int y = 0; y < img.height; ++y)
                for (int x = 0; x < img.width; ++x)
                    s.image.at3(c, y, x) = static_cast<float>(
                        img.pixels[(static_cast<std::size_t>(y) * img.width + x) * img.channels + c] /
                        255.0);
        s.mask = TensorF({1, img.height, img.width});
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                s.mask.at3(0, y, x) =
                    msk.pixels[static_cast<std::size_t>(y) * img.width + x] >= 128 ? 1.0f : 0.0f;
        manifest.samples.push_back(std::move(s));
    }
    if (manifest.samples.empty()) throw DataError("no image/mask pairs found under " + root);
    manifest.channels = channels;
    return manifest;
}

void write_dataset(const DatasetManifest& manifest, const std::string& root) {
    const fs::path images_dir = fs::path(root) / "images";
    const fs::path masks_dir = fs::path(root) / "masks";
    fs::create_directories(images_dir);
    fs::create_directories(masks_dir);
    for (const auto& s : manifest.samples) {
        check_sample(s);
        const int c = s.image.dim(0), h = s.image.dim(1), w = s.image.dim(2);
        PnmImage img;
        img.width = w;
        img.height = h;
        img.channels = c;
        img.pixels.resize(static_cast<std::size_t>(w) * h * c);
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double v = std::clamp(static_cast<double>(s.image.at3(ch, y, x)), 0.0, 1.0);
                    img.pixels[(static_cast<std::size_t>(y) * w + x) * c + ch] =
                        static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
                }
        const std::string ext = (c == 3) ? ".ppm" : ".pgm";
        write_pnm(img, (images_dir / (s.id + ext)).string());

        PnmImage msk;
        msk.width = w;
        msk.height = h;
        msk.channels = 1;
        msk.pixels.resize(static_cast<std::size_t>(w) * h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                msk.pixels[static_cast<std::size_t>(y) * w + x] =
                    s.mask.at3(0, y, x) != 0.0f ? 255 : 0;
        write_pnm(msk, (masks_dir / (s.id + ".pgm")).string());
    }
}

SegmentationSample resize_sample(const SegmentationSample& sample, int target) {
    check_sample(sample);
    if (target < 1) throw ParamError("resize target must be >= 1");
    const int c = sample.image.dim(0), h = sample.image.dim(1), w = sample.image.dim(2);
    if (h == target && w == target) return sample;

    SegmentationSample out;
    out.id = sample.id;
    out.image = TensorF({c, target, target});
    out.mask = TensorF({1, target, target});
    const double sy = static_cast<double>(h) / target;
    const double sx = static_cast<double>(w) / target;
    for (int y = 0; y < target; ++y) {
        // Half-pixel-center convention, clamped at the borders.
        const double src_y = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
        for (int x = 0; x < target; ++x) {
            const double src_x = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
            for (int ch = 0; ch < c; ++ch) {
                out.image.at3(ch, y, x) = bilinear_reflect(sample.image, ch, src_y, src_x);
            }
            out.mask.at3(0, y, x) =
                nearest_reflect(sample.mask, 0, src_y, src_x) != 0.0f ? 1.0f : 0.0f;
        }
    }
    return out;
}

NormalizationStats compute_stats(const DatasetManifest& train) {
    if (train.samples.empty()) throw DataError("compute_stats requires a non-empty training split");
    const int channels = train.samples.front().image.dim(0);
    std::vector<double> sum(static_cast<std::size_t>(channels), 0.0);
    std::vector<double> sum_sq(static_cast<std::size_t>(channels), 0.0);
    std::vector<double> count(static_cast<std::size_t>(channels), 0.0);
    for (const auto& s : train.samples) {
        const int h = s.image.dim(1), w = s.image.dim(2);
        for (int c = 0; c < channels; ++c) {
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double v = s.image.at3(c, y, x);
                    sum[static_cast<std::size_t>(c)] += v;
                    sum_sq[static_cast<std::size_t>(c)] += v * v;
                }
            count[static_cast<std::size_t>(c)] += static_cast<double>(h) * w;
        }
    }
    NormalizationStats stats;
    for (int c = 0; c < channels; ++c) {
        const double mean = sum[static_cast<std::size_t>(c)] / count[static_cast<std::size_t>(c)];
        double var = sum_sq[static_cast<std::size_t>(c)] / count[static_cast<std::size_t>(c)] - mean * mean;
        if (var < 0) var = 0;
        double sd = std::sqrt(var);
        if (sd < kStdFloor) {
            sd = kStdFloor;
            stats.clamped = true;
        }
        stats.mean.push_back(mean);
        stats.stddev.push_back(sd);
    }
    return stats;
}

SegmentationSample normalize(const SegmentationSample& sample, const NormalizationStats& stats) {
    check_sample(sample);
    const int channels = sample.image.dim(0);
    if (static_cast<int>(stats.mean.size()) != channels) {
        throw ShapeError("normalization stats cover " + std::to_string(stats.mean.size()) +
                         " channels, sample has " + std::to_string(channels));
    }
    SegmentationSample out = sample;
    const int h = sample.image.dim(1), w = sample.image.dim(2);
    for (int c = 0; c < channels; ++c) {
        const double mean = stats.mean[static_cast<std::size_t>(c)];
        const double sd = stats.stddev[static_cast<std::size_t>(c)];
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out.image.at3(c, y, x) =
                    static_cast<float>((sample.image.at3(c, y, x) - mean) / sd);
    }
    return out;
}

void save_stats(const NormalizationStats& stats, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write stats file: " + path);
    os.precision(17);
    for (std::size_t c = 0; c < stats.mean.size(); ++c) {
        os << c << ": " << stats.mean[c] << " " << stats.stddev[c] << "\n";
    }
}

NormalizationStats load_stats(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot read stats file: " + path);
    NormalizationStats stats;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string idx;
        double mean, sd;
        if (!(ls >> idx >> mean >> sd)) throw DataError("malformed stats line: " + line);
        stats.mean.push_back(mean);
        stats.stddev.push_back(sd);
    }
    if (stats.mean.empty()) throw DataError("empty stats file: " + path);
    return stats;
}

SegmentationSample augment(const SegmentationSample& sample, const AugmentationConfig& cfg,
                           RngState& rng) {
    cfg.validate();
    check_sample(sample);
    const int c = sample.image.dim(0), h = sample.image.dim(1), w = sample.image.dim(2);

    const bool hflip = rng.uniform() < cfg.hflip_prob;
    const bool vflip = rng.uniform() < cfg.vflip_prob;
    const double zoom = rng.uniform(cfg.zoom_lo, cfg.zoom_hi);
    const bool identity_zoom = zoom == 1.0;

    SegmentationSample out;
    out.id = sample.id;
    out.image = TensorF({c, h, w});
    out.mask = TensorF({1, h, w});
    const double cy = (h - 1) / 2.0;
    const double cx = (w - 1) / 2.0;
    for (int y = 0; y < h; ++y) {
        const int yy = vflip ? (h - 1 - y) : y;
        const double src_y = identity_zoom ? yy : cy + (yy - cy) / zoom;
        for (int x = 0; x < w; ++x) {
            const int xx = hflip ? (w - 1 - x) : x;
            const double src_x = identity_zoom ? xx : cx + (xx - cx) / zoom;
            if (identity_zoom) {
                for (int ch = 0; ch < c; ++ch)
                    out.image.at3(ch, y, x) = sample.image.at3(ch, yy, xx);
                out.mask.at3(0, y, x) = sample.mask.at3(0, yy, xx);
            } else {
                for (int ch = 0; ch < c; ++ch)
                    out.image.at3(ch, y, x) = bilinear_reflect(sample.image, ch, src_y, src_x);
                out.mask.at3(0, y, x) =
                    nearest_reflect(sample.mask, 0, src_y, src_x) != 0.0f ? 1.0f : 0.0f;
            }
        }
    }

    if (c == 3 && cfg.channel_shift > 0 && rng.uniform() < cfg.shift_fraction) {
        for (int ch = 0; ch < 3; ++ch) {
            const float delta = static_cast<float>(rng.uniform(-cfg.channel_shift, cfg.channel_shift));
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    out.image.at3(ch, y, x) =
                        std::clamp(out.image.at3(ch, y, x) + delta, 0.0f, 1.0f);
        }
    }
    return out;
}

DatasetManifest expand_dataset(const DatasetManifest& manifest, const AugmentationConfig& cfg,
                               std::size_t target_size, RngState& rng) {
    if (target_size < manifest.samples.size()) {
        throw ParamError("expand_dataset target smaller than current dataset size");
    }
    DatasetManifest out = manifest;
    std::size_t serial = 0;
    while (out.samples.size() < target_size) {
        const auto pick = static_cast<std::size_t>(rng.uniform_int(manifest.samples.size()));
        SegmentationSample s = augment(manifest.samples[pick], cfg, rng);
        char suffix[16];
        std::snprintf(suffix, sizeof(suffix), "_aug%05zu", serial++);
        s.id += suffix;
        out.samples.push_back(std::move(s));
    }
    return out;
}

std::pair<DatasetManifest, DatasetManifest> split(const DatasetManifest& manifest, double fraction,
                                                  std::uint64_t seed) {
    if (fraction <= 0.0 || fraction >= 1.0) {
        throw ParamError("split fraction must be in (0,1), got " + std::to_string(fraction));
    }
    if (manifest.samples.size() < 2) throw ParamError("split requires at least 2 samples");

    std::vector<std::size_t> order(manifest.samples.size());
    std::iota(order.begin(), order.end(), 0);
    RngState rng(seed);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
        std::swap(order[i], order[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
    }
    std::size_t n_train = static_cast<std::size_t>(fraction * static_cast<double>(order.size()));
    n_train = std::clamp<std::size_t>(n_train, 1, order.size() - 1);

    DatasetManifest train, val;
    train.channels = val.channels = manifest.channels;
    train.source = manifest.source + " (train)";
    val.source = manifest.source + " (val)";
    for (std::size_t i = 0; i < order.size(); ++i) {
        auto& dst = (i < n_train) ? train : val;
        dst.samples.push_back(manifest.samples[order[i]]);
    }
    return {std::move(train), std::move(val)};
}

bool ellipse_contains(const Ellipse& e, double x, double y) {
    const double dx = x - e.cx;
    const double dy = y - e.cy;
    const double ca = std::cos(e.angle);
    const double sa = std::sin(e.angle);
    const double u = dx * ca + dy * sa;
    const double v = -dx * sa + dy * ca;
    return (u / e.rx) * (u / e.rx) + (v / e.ry) * (v / e.ry) <= 1.0;
}

std::vector<Ellipse> random_ellipses(int size, RngState& rng) {
    const int count = 1 + static_cast<int>(rng.uniform_int(3));
    std::vector<Ellipse> out;
    for (int i = 0; i < count; ++i) {
        Ellipse e;
        e.cx = rng.uniform(0.25, 0.75) * size;
        e.cy = rng.uniform(0.25, 0.75) * size;
        e.rx = rng.uniform(0.10, 0.30) * size;
        e.ry = rng.uniform(0.10, 0.30) * size;
        e.angle = rng.uniform(0.0, M_PI);
        e.intensity = rng.uniform(0.55, 0.95);
        out.push_back(e);
    }
    return out;
}

SegmentationSample render_scene(const std::vector<Ellipse>& ellipses, int size, int channels,
                                RngState& rng, const std::string& id) {
    SegmentationSample s;
    s.id = id;
    s.image = TensorF({channels, size, size});
    s.mask = TensorF({1, size, size});
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            double base = 0.2;
            bool inside = false;
            for (const auto& e : ellipses) {
                if (ellipse_contains(e, x, y)) {
                    base = e.intensity;
                    inside = true;
                    break;
                }
            }
            s.mask.at3(0, y, x) = inside ? 1.0f : 0.0f;
            for (int c = 0; c < channels; ++c) {
                const double v = base + rng.normal() * 0.05;
                s.image.at3(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return s;
}

DatasetManifest synth_generate(int n, int size, RngState& rng, int channels) {
    if (n < 1) throw ParamError("synth_generate requires n >= 1");
    if (size < 16) throw ParamError("synth_generate requires size >= 16");
    if (channels != 1 && channels != 3) throw ParamError("synth_generate supports 1 or 3 channels");
    DatasetManifest manifest;
    manifest.channels = channels;
    manifest.source = "synthetic";
    for (int i = 0; i < n; ++i) {
        char id[32];
        std::snprintf(id, sizeof(id), "synth%04d", i);
        const auto ellipses = random_ellipses(size, rng);
        manifest.samples.push_back(render_scene(ellipses, size, channels, rng, id));
    }
    return manifest;
}

}  // namespace focusnet
