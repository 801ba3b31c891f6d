#include "pcnn/tiling.hpp"

#include <cstring>
#include <stdexcept>
#include <string>

namespace pcnn {

std::pair<int, int> grid_dims(int source_h, int source_w, int tile_h, int tile_w) {
    if (source_h < 1 || source_w < 1 || tile_h < 1 || tile_w < 1)
        throw std::invalid_argument("grid_dims: all dimensions must be >= 1");
    if (tile_h > source_h || tile_w > source_w)
        throw std::invalid_argument("grid_dims: tile larger than source (" +
                                    std::to_string(tile_h) + "x" + std::to_string(tile_w) +
                                    " vs " + std::to_string(source_h) + "x" +
                                    std::to_string(source_w) + ")");
    return {source_h / tile_h, source_w / tile_w};
}

TileGrid subdivide(const FloatImage& img, int tile_h, int tile_w) {
    const auto [rows, cols] = grid_dims(img.height, img.width, tile_h, tile_w);

    TileGrid grid;
    grid.tile_h = tile_h;
    grid.tile_w = tile_w;
    grid.rows = rows;
    grid.cols = cols;
    grid.channels = img.channels;
    grid.tiles.reserve(static_cast<std::size_t>(rows) * cols);

    const std::size_t row_bytes = static_cast<std::size_t>(tile_w) * img.channels;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            FloatImage tile(tile_h, tile_w, img.channels);
            for (int y = 0; y < tile_h; ++y) {
                const float* src = &img.data[img.index(r * tile_h + y, c * tile_w, 0)];
                std::memcpy(&tile.data[tile.index(y, 0, 0)], src, row_bytes * sizeof(float));
            }
            grid.tiles.push_back(std::move(tile));
        }
    return grid;
}

FloatImage reassemble(const TileGrid& grid) {
    FloatImage out(grid.rows * grid.tile_h, grid.cols * grid.tile_w, grid.channels);
    const std::size_t row_bytes = static_cast<std::size_t>(grid.tile_w) * grid.channels;
    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c) {
            const FloatImage& tile = grid.tile(r, c);
            for (int y = 0; y < grid.tile_h; ++y) {
                float* dst = &out.data[out.index(r * grid.tile_h + y, c * grid.tile_w, 0)];
                std::memcpy(dst, &tile.data[tile.index(y, 0, 0)], row_bytes * sizeof(float));
            }
        }
    return out;
}

int export_tiles(const TileGrid& grid, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw std::runtime_error("cannot create tile directory " + dir.string() + ": " +
                                 ec.message());

    int written = 0;
    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c) {
            const auto name = "r" + std::to_string(r) + "_c" + std::to_string(c) + ".png";
            try {
                save_image(to_u8(grid.tile(r, c)), dir / name);
            } catch (const std::exception& e) {
                throw std::runtime_error("tile export failed after " + std::to_string(written) +
                                         " complete tiles: " + e.what());
            }
            ++written;
        }
    return written;
}

} // namespace pcnn
