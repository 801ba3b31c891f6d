#include "pcnn/mapping.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

namespace pcnn {

PredictionMap predict_tiles(const Model& model, const TileGrid& grid) {
    if (grid.tiles.empty())
        throw std::invalid_argument("predict_tiles: empty tile grid");
    if (grid.tile_h != model.arch.input_h || grid.tile_w != model.arch.input_w ||
        grid.channels != model.arch.input_c)
        throw std::invalid_argument(
            "predict_tiles: grid tiles are " + std::to_string(grid.tile_h) + "x" +
            std::to_string(grid.tile_w) + "x" + std::to_string(grid.channels) +
            " but the model expects " + std::to_string(model.arch.input_h) + "x" +
            std::to_string(model.arch.input_w) + "x" + std::to_string(model.arch.input_c));

    PredictionMap map;
    map.rows = grid.rows;
    map.cols = grid.cols;
    map.tile_h = grid.tile_h;
    map.tile_w = grid.tile_w;
    map.num_classes = model.arch.num_classes;
    map.probs.resize(grid.tiles.size() * static_cast<std::size_t>(map.num_classes));

    constexpr std::size_t kChunk = 64;
    for (std::size_t start = 0; start < grid.tiles.size(); start += kChunk) {
        const std::size_t stop = std::min(grid.tiles.size(), start + kChunk);
        std::vector<const FloatImage*> tiles;
        tiles.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i) tiles.push_back(&grid.tiles[i]);
        Matrix<float> probs = forward_infer(model, batch_from_tiles(tiles, model.arch));
        for (int b = 0; b < probs.rows; ++b)
            for (int k = 0; k < probs.cols; ++k)
                map.probs[(start + static_cast<std::size_t>(b)) * map.num_classes + k] =
                    probs.at(b, k);
    }
    return map;
}

BinaryMask threshold(const PredictionMap& map, int target_class, float tau) {
    if (target_class < 0 || target_class >= map.num_classes)
        throw std::invalid_argument("threshold: class index out of range");

    BinaryMask mask;
    mask.rows = map.rows;
    mask.cols = map.cols;
    mask.tile_h = map.tile_h;
    mask.tile_w = map.tile_w;
    mask.target_class = target_class;
    mask.bits.resize(static_cast<std::size_t>(map.rows) * map.cols);
    for (int r = 0; r < map.rows; ++r)
        for (int c = 0; c < map.cols; ++c)
            mask.bits[static_cast<std::size_t>(r) * map.cols + c] =
                map.at(r, c)[target_class] >= tau ? 1 : 0;
    return mask;
}

double class_fraction(const BinaryMask& mask) {
    if (mask.bits.empty())
        throw std::invalid_argument("class_fraction: empty mask");
    std::size_t ones = 0;
    for (std::uint8_t b : mask.bits) ones += b;
    return static_cast<double>(ones) / static_cast<double>(mask.bits.size());
}

namespace {

std::uint8_t blend(double alpha, int color, int src) {
    const double v = alpha * color + (1.0 - alpha) * src;
    return static_cast<std::uint8_t>(std::lround(v));
}

} // namespace

Image render_heatmap(const PredictionMap& map, int display_class) {
    if (display_class < 0 || display_class >= map.num_classes)
        throw std::invalid_argument("render_heatmap: class index out of range");

    Image out(map.rows * map.tile_h, map.cols * map.tile_w, 3);
    for (int r = 0; r < map.rows; ++r)
        for (int c = 0; c < map.cols; ++c) {
            const double v = map.at(r, c)[display_class];
            const std::uint8_t ry = static_cast<std::uint8_t>(std::lround(255.0 * v));
            const std::uint8_t bl = static_cast<std::uint8_t>(std::lround(128.0 * (1.0 - v)));
            for (int y = 0; y < map.tile_h; ++y)
                for (int x = 0; x < map.tile_w; ++x) {
                    const int py = r * map.tile_h + y;
                    const int px = c * map.tile_w + x;
                    out.at(py, px, 0) = ry;
                    out.at(py, px, 1) = ry;
                    out.at(py, px, 2) = bl;
                }
        }
    return out;
}

Image overlay(const Image& src, const BinaryMask& mask, Rgb color, double alpha) {
    if (!src.valid())
        throw std::invalid_argument("overlay: invalid source image");
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::invalid_argument("overlay: alpha must be in (0, 1]");
    if (src.height < mask.rows * mask.tile_h || src.width < mask.cols * mask.tile_w)
        throw std::invalid_argument(
            "overlay: source " + std::to_string(src.height) + "x" + std::to_string(src.width) +
            " is smaller than the mask grid " + std::to_string(mask.rows * mask.tile_h) + "x" +
            std::to_string(mask.cols * mask.tile_w));

    Image out(src.height, src.width, 3);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            for (int c = 0; c < 3; ++c)
                out.at(y, x, c) = src.channels == 1 ? src.at(y, x, 0) : src.at(y, x, c);

    const int col[3] = {color.r, color.g, color.b};
    for (int r = 0; r < mask.rows; ++r)
        for (int c = 0; c < mask.cols; ++c) {
            if (!mask.at(r, c)) continue;
            for (int y = r * mask.tile_h; y < (r + 1) * mask.tile_h; ++y)
                for (int x = c * mask.tile_w; x < (c + 1) * mask.tile_w; ++x)
                    for (int ch = 0; ch < 3; ++ch)
                        out.at(y, x, ch) = blend(alpha, col[ch], out.at(y, x, ch));
        }
    return out;
}

void write_scores_csv(const PredictionMap& map, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot open " + path.string() + " for writing");

    out << "row,col";
    for (int k = 0; k < map.num_classes; ++k) out << ",p_" << k;
    out << ",argmax\n";

    char buf[32];
    for (int r = 0; r < map.rows; ++r)
        for (int c = 0; c < map.cols; ++c) {
            const float* p = map.at(r, c);
            int best = 0;
            for (int k = 1; k < map.num_classes; ++k)
                if (p[k] > p[best]) best = k;
            out << r << ',' << c;
            for (int k = 0; k < map.num_classes; ++k) {
                std::snprintf(buf, sizeof(buf), "%.6f", static_cast<double>(p[k]));
                out << ',' << buf;
            }
            out << ',' << best << '\n';
        }
    if (!out)
        throw std::runtime_error("write to " + path.string() + " failed");
}

} // namespace pcnn
