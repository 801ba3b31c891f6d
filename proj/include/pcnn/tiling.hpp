#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "pcnn/image.hpp"

namespace pcnn {

/// Row-major grid of fixed-size tiles cut from one source image.
/// Flattened index i maps to (r, c) = (i / cols, i % cols); this raster order is
/// the contract shared with the prediction-map reshape.
struct TileGrid {
    int tile_h = 0;
    int tile_w = 0;
    int rows = 0;
    int cols = 0;
    int channels = 0;
    std::vector<FloatImage> tiles;

    std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * cols + c; }
    const FloatImage& tile(int r, int c) const { return tiles[index(r, c)]; }
};

/// rows = floor(source_h / tile_h), cols = floor(source_w / tile_w).
/// Throws if any argument is < 1 or the tile exceeds the source.
std::pair<int, int> grid_dims(int source_h, int source_w, int tile_h, int tile_w);

/// Raster-scan subdivision. Tile (r, c) is the pixel block whose top-left corner is
/// (r * tile_h, c * tile_w). Trailing partial rows/columns of pixels are dropped.
TileGrid subdivide(const FloatImage& img, int tile_h, int tile_w);

/// Stitch the tiles back into a (rows*tile_h) x (cols*tile_w) image.
/// reassemble(subdivide(img, th, tw)) equals img cropped to the covered region, bit-exact.
FloatImage reassemble(const TileGrid& grid);

/// Write every tile as PNG named r{row}_c{col}.png into dir (created if missing).
/// Returns the number of files written; a failure partway reports how many were complete.
int export_tiles(const TileGrid& grid, const std::filesystem::path& dir);

} // namespace pcnn
