#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pcnn/image.hpp"

namespace pcnn {

/// Tiles paired with integer class labels; the training corpus.
/// Labels are contiguous indices into class_names.
struct LabeledTileSet {
    int tile_h = 0;
    int tile_w = 0;
    int channels = 0;

    struct Item {
        FloatImage tile;
        int label = 0;
    };
    std::vector<Item> items;
    std::vector<std::string> class_names;

    int num_classes() const { return static_cast<int>(class_names.size()); }
};

/// Read every PNG in each class directory (lexicographic file order, directories in
/// the given order). All tiles must share dimensions and channel count.
LabeledTileSet build_dataset(const std::vector<std::filesystem::path>& class_dirs,
                             const std::vector<std::string>& class_names);

/// Stratified split: each class contributes floor(n_k * train_fraction) items to train,
/// at least one item on each side, permuted by the seeded generator.
std::pair<LabeledTileSet, LabeledTileSet> split(const LabeledTileSet& ds,
                                                double train_fraction,
                                                std::uint64_t seed);

/// Parameters for the synthetic stand-ins for the source photographs.
struct SynthSpec {
    enum class Kind { color, texture };
    Kind kind = Kind::color;
    int height = 200;
    int width = 200;
    double mix_fraction = 0.5; // in [0, 1]
    double noise_sigma = 0.0;  // >= 0
    std::uint64_t seed = 0;
};

/// Two RGB images: base colors (0.9, 0.9, 0.85) and (0.95, 0.8, 0.2), each perturbed
/// by seeded Gaussian pixel noise of std noise_sigma and clamped to [0, 1].
std::pair<FloatImage, FloatImage> make_color_pair(const SynthSpec& spec);

/// Two grayscale textures: porous (dark blobby pores on light ground, from thresholded
/// low-frequency value noise) and fibrous (bright stripes of period 8 px at a random
/// orientation on dark ground). Deterministic per seed.
std::pair<FloatImage, FloatImage> make_texture_pair(const SynthSpec& spec);

/// A tile-aligned two-source composite plus its per-cell ground truth.
struct Mixture {
    FloatImage image;                // (rows*tile) x (cols*tile), cropped to the grid
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> truth; // row-major; 1 = cell taken from img_b
    double realized_fraction = 0.0;  // ones / (rows*cols)

    std::uint8_t truth_at(int r, int c) const {
        return truth[static_cast<std::size_t>(r) * cols + c];
    }
};

/// Each tile cell independently takes its content from img_b with probability
/// spec.mix_fraction (seeded), else from img_a.
Mixture make_mixture(const SynthSpec& spec, const FloatImage& img_a,
                     const FloatImage& img_b, int tile);

/// Truth-mask CSV: header "row,col,label", one line per cell in raster order.
void write_truth_csv(const Mixture& mix, const std::filesystem::path& path);

struct TruthMask {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> bits;
};
TruthMask read_truth_csv(const std::filesystem::path& path);

} // namespace pcnn
