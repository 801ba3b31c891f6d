#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pcnn/image.hpp"
#include "pcnn/net.hpp"
#include "pcnn/tiling.hpp"

namespace pcnn {

/// Per-tile class probabilities at the tiles' spatial positions.
/// probs is the raster-order score vector: entry i * K .. i * K + K - 1 holds the
/// K-vector for tile i = r * cols + c, matching the tiling flatten order.
struct PredictionMap {
    int rows = 0;
    int cols = 0;
    int tile_h = 0;
    int tile_w = 0;
    int num_classes = 0;
    std::vector<float> probs;

    const float* at(int r, int c) const {
        return probs.data() + (static_cast<std::size_t>(r) * cols + c) * num_classes;
    }
};

/// Thresholded map for one class; carries the tile geometry for overlay rendering.
struct BinaryMask {
    int rows = 0;
    int cols = 0;
    int tile_h = 0;
    int tile_w = 0;
    int target_class = 0;
    std::vector<std::uint8_t> bits;

    std::uint8_t at(int r, int c) const {
        return bits[static_cast<std::size_t>(r) * cols + c];
    }
};

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
};

/// Classify every tile of the grid with the model in infer mode.
PredictionMap predict_tiles(const Model& model, const TileGrid& grid);

/// bit(r, c) = 1 iff probs[r][c][target_class] >= tau.
BinaryMask threshold(const PredictionMap& map, int target_class, float tau);

/// ones / (rows * cols).
double class_fraction(const BinaryMask& mask);

/// One tile_h x tile_w pixel block per cell; the displayed class probability maps
/// linearly from dark blue (0,0,128) at 0 to yellow (255,255,0) at 1,
/// rounding half away from zero.
Image render_heatmap(const PredictionMap& map, int display_class);

/// Alpha-blend the marker color over every pixel of every masked tile:
/// out = round(alpha*color + (1-alpha)*src), half away from zero. Pixels outside
/// masked tiles, including any cropped remainder, are untouched. Grayscale sources
/// are promoted to RGB by channel replication.
Image overlay(const Image& src, const BinaryMask& mask, Rgb color, double alpha);

/// Scores CSV: header "row,col,p_0,...,p_{K-1},argmax", one line per tile in raster
/// order, probabilities printed with 6 decimal digits.
void write_scores_csv(const PredictionMap& map, const std::filesystem::path& path);

} // namespace pcnn
