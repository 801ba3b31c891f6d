#include "pcnn/dataset.hpp"

#include "pcnn/tiling.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace pcnn {
namespace {

float smoothstep(float edge0, float edge1, float x) {
    float t = std::clamp((x - edge0) / (edge1 - edge0), 0.0f, 1.0f);
    return t * t * (3.0f - 2.0f * t);
}

void add_pixel_noise(FloatImage& img, double sigma, std::mt19937_64& rng) {
    if (sigma <= 0.0) return;
    std::normal_distribution<float> noise(0.0f, static_cast<float>(sigma));
    for (auto& v : img.data)
        v = std::clamp(v + noise(rng), 0.0f, 1.0f);
}

// Single-octave value noise: uniform randoms on a coarse lattice, smoothstep-blended.
// cell is the lattice spacing in pixels; output values lie in [0, 1].
FloatImage value_noise(int height, int width, int cell, std::mt19937_64& rng) {
    const int gh = height / cell + 2;
    const int gw = width / cell + 2;
    std::vector<float> lattice(static_cast<std::size_t>(gh) * gw);
    std::uniform_real_distribution<float> uni(0.0f, 1.0f);
    for (auto& v : lattice) v = uni(rng);

    FloatImage out(height, width, 1);
    for (int y = 0; y < height; ++y) {
        const int cy = y / cell;
        const float ty = smoothstep(0.0f, 1.0f, static_cast<float>(y % cell) / cell);
        for (int x = 0; x < width; ++x) {
            const int cx = x / cell;
            const float tx = smoothstep(0.0f, 1.0f, static_cast<float>(x % cell) / cell);
            const float v00 = lattice[static_cast<std::size_t>(cy) * gw + cx];
            const float v01 = lattice[static_cast<std::size_t>(cy) * gw + cx + 1];
            const float v10 = lattice[static_cast<std::size_t>(cy + 1) * gw + cx];
            const float v11 = lattice[static_cast<std::size_t>(cy + 1) * gw + cx + 1];
            const float top = v00 + (v01 - v00) * tx;
            const float bot = v10 + (v11 - v10) * tx;
            out.at(y, x, 0) = top + (bot - top) * ty;
        }
    }
    return out;
}

} // namespace

LabeledTileSet build_dataset(const std::vector<std::filesystem::path>& class_dirs,
                             const std::vector<std::string>& class_names) {
    if (class_dirs.size() != class_names.size())
        throw std::invalid_argument("build_dataset: one name per class directory required");
    if (class_dirs.size() < 2)
        throw std::invalid_argument("build_dataset: need >= 2 classes");

    LabeledTileSet ds;
    ds.class_names = class_names;

    for (std::size_t k = 0; k < class_dirs.size(); ++k) {
        std::vector<std::filesystem::path> files;
        std::error_code ec;
        for (const auto& entry : std::filesystem::directory_iterator(class_dirs[k], ec)) {
            if (!entry.is_regular_file()) continue;
            auto ext = entry.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            if (ext == ".png") files.push_back(entry.path());
        }
        if (ec)
            throw std::runtime_error("cannot read class directory " + class_dirs[k].string() +
                                     ": " + ec.message());
        std::sort(files.begin(), files.end(),
                  [](const auto& a, const auto& b) { return a.filename() < b.filename(); });
        if (files.empty())
            throw std::runtime_error("class " + std::to_string(k) + " has no tiles (" +
                                     class_dirs[k].string() + ")");

        for (const auto& f : files) {
            FloatImage tile = to_float(load_image(f));
            if (ds.items.empty()) {
                ds.tile_h = tile.height;
                ds.tile_w = tile.width;
                ds.channels = tile.channels;
            } else if (tile.height != ds.tile_h || tile.width != ds.tile_w ||
                       tile.channels != ds.channels) {
                throw std::runtime_error(
                    "tile dimension mismatch: " + f.string() + " is " +
                    std::to_string(tile.height) + "x" + std::to_string(tile.width) + "x" +
                    std::to_string(tile.channels) + ", expected " + std::to_string(ds.tile_h) +
                    "x" + std::to_string(ds.tile_w) + "x" + std::to_string(ds.channels));
            }
            ds.items.push_back({std::move(tile), static_cast<int>(k)});
        }
    }
    return ds;
}

std::pair<LabeledTileSet, LabeledTileSet> split(const LabeledTileSet& ds, double train_fraction,
                                                std::uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw std::invalid_argument("split: train_fraction must lie in (0, 1)");

    const int k = ds.num_classes();
    std::vector<std::vector<std::size_t>> by_class(k);
    for (std::size_t i = 0; i < ds.items.size(); ++i)
        by_class.at(ds.items[i].label).push_back(i);

    for (int c = 0; c < k; ++c)
        if (by_class[c].size() < 2)
            throw std::runtime_error("split: class " + std::to_string(c) +
                                     " has fewer than 2 items");

    LabeledTileSet train, val;
    for (LabeledTileSet* part : {&train, &val}) {
        part->tile_h = ds.tile_h;
        part->tile_w = ds.tile_w;
        part->channels = ds.channels;
        part->class_names = ds.class_names;
    }

    std::mt19937_64 rng(seed);
    for (int c = 0; c < k; ++c) {
        auto& idx = by_class[c];
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto n = static_cast<long>(idx.size());
        long take = static_cast<long>(std::floor(static_cast<double>(n) * train_fraction + 1e-9));
        take = std::clamp(take, 1L, n - 1);
        for (long i = 0; i < n; ++i) {
            auto& dst = i < take ? train : val;
            dst.items.push_back(ds.items[idx[static_cast<std::size_t>(i)]]);
        }
    }
    return {std::move(train), std::move(val)};
}

std::pair<FloatImage, FloatImage> make_color_pair(const SynthSpec& spec) {
    if (spec.height < 1 || spec.width < 1 || spec.noise_sigma < 0.0)
        throw std::invalid_argument("make_color_pair: invalid spec");

    const float base_a[3] = {0.90f, 0.90f, 0.85f};
    const float base_b[3] = {0.95f, 0.80f, 0.20f};

    FloatImage a(spec.height, spec.width, 3), b(spec.height, spec.width, 3);
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x)
            for (int c = 0; c < 3; ++c) {
                a.at(y, x, c) = base_a[c];
                b.at(y, x, c) = base_b[c];
            }

    std::mt19937_64 rng(spec.seed);
    add_pixel_noise(a, spec.noise_sigma, rng);
    add_pixel_noise(b, spec.noise_sigma, rng);
    return {std::move(a), std::move(b)};
}

std::pair<FloatImage, FloatImage> make_texture_pair(const SynthSpec& spec) {
    if (spec.height < 1 || spec.width < 1 || spec.noise_sigma < 0.0)
        throw std::invalid_argument("make_texture_pair: invalid spec");

    std::mt19937_64 rng(spec.seed);

    // Porous: light ground with dark blobby pores where low-frequency noise dips.
    FloatImage field = value_noise(spec.height, spec.width, 14, rng);
    FloatImage porous(spec.height, spec.width, 1);
    for (std::size_t i = 0; i < field.data.size(); ++i)
        porous.data[i] = 0.22f + (0.82f - 0.22f) * smoothstep(0.30f, 0.40f, field.data[i]);
    add_pixel_noise(porous, spec.noise_sigma, rng);

    // Fibrous: bright stripes of period 8 px at a random orientation on dark ground.
    const float theta = std::uniform_real_distribution<float>(0.0f, std::numbers::pi_v<float>)(rng);
    const float phase =
        std::uniform_real_distribution<float>(0.0f, 2.0f * std::numbers::pi_v<float>)(rng);
    const float kx = std::cos(theta), ky = std::sin(theta);
    FloatImage fibrous(spec.height, spec.width, 1);
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            const float s = std::sin(2.0f * std::numbers::pi_v<float> *
                                         (kx * static_cast<float>(x) + ky * static_cast<float>(y)) / 8.0f +
                                     phase);
            fibrous.at(y, x, 0) = 0.15f + (0.85f - 0.15f) * smoothstep(0.15f, 0.55f, s);
        }
    add_pixel_noise(fibrous, spec.noise_sigma, rng);

    return {std::move(porous), std::move(fibrous)};
}

Mixture make_mixture(const SynthSpec& spec, const FloatImage& img_a, const FloatImage& img_b,
                     int tile) {
    if (img_a.height != img_b.height || img_a.width != img_b.width ||
        img_a.channels != img_b.channels)
        throw std::invalid_argument("make_mixture: source images must have identical shape");
    if (spec.mix_fraction < 0.0 || spec.mix_fraction > 1.0)
        throw std::invalid_argument("make_mixture: mix_fraction must lie in [0, 1]");

    const auto [rows, cols] = grid_dims(img_a.height, img_a.width, tile, tile);

    Mixture mix;
    mix.rows = rows;
    mix.cols = cols;
    mix.truth.assign(static_cast<std::size_t>(rows) * cols, 0);
    mix.image = FloatImage(rows * tile, cols * tile, img_a.channels);

    std::mt19937_64 rng(spec.seed);
    std::bernoulli_distribution pick_b(spec.mix_fraction);
    int ones = 0;
    const std::size_t row_floats = static_cast<std::size_t>(tile) * img_a.channels;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const bool from_b = pick_b(rng);
            mix.truth[static_cast<std::size_t>(r) * cols + c] = from_b ? 1 : 0;
            ones += from_b ? 1 : 0;
            const FloatImage& src = from_b ? img_b : img_a;
            for (int y = 0; y < tile; ++y)
                std::memcpy(&mix.image.data[mix.image.index(r * tile + y, c * tile, 0)],
                            &src.data[src.index(r * tile + y, c * tile, 0)],
                            row_floats * sizeof(float));
        }
    mix.realized_fraction = static_cast<double>(ones) / (static_cast<double>(rows) * cols);
    return mix;
}

void write_truth_csv(const Mixture& mix, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write truth CSV: " + path.string());
    out << "row,col,label\n";
    for (int r = 0; r < mix.rows; ++r)
        for (int c = 0; c < mix.cols; ++c)
            out << r << ',' << c << ',' << int(mix.truth_at(r, c)) << '\n';
    if (!out)
        throw std::runtime_error("write failed: " + path.string());
}

TruthMask read_truth_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read truth CSV: " + path.string());

    std::string line;
    if (!std::getline(in, line) || line.rfind("row,col,label", 0) != 0)
        throw std::runtime_error("truth CSV missing 'row,col,label' header: " + path.string());

    struct Cell {
        int r, c, label;
    };
    std::vector<Cell> cells;
    int max_r = -1, max_c = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Cell cell{};
        char comma1 = 0, comma2 = 0;
        std::istringstream ss(line);
        if (!(ss >> cell.r >> comma1 >> cell.c >> comma2 >> cell.label) || comma1 != ',' ||
            comma2 != ',' || cell.r < 0 || cell.c < 0 || (cell.label != 0 && cell.label != 1))
            throw std::runtime_error("malformed truth CSV line: " + line);
        max_r = std::max(max_r, cell.r);
        max_c = std::max(max_c, cell.c);
        cells.push_back(cell);
    }
    if (cells.empty())
        throw std::runtime_error("truth CSV has no cells: " + path.string());

    TruthMask mask;
    mask.rows = max_r + 1;
    mask.cols = max_c + 1;
    if (cells.size() != static_cast<std::size_t>(mask.rows) * mask.cols)
        throw std::runtime_error("truth CSV does not cover a full grid: " + path.string());
    mask.bits.assign(cells.size(), 0);
    for (const auto& cell : cells)
        mask.bits[static_cast<std::size_t>(cell.r) * mask.cols + cell.c] =
            static_cast<std::uint8_t>(cell.label);
    return mask;
}

} // namespace pcnn
