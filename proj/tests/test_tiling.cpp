#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <random>

#include "pcnn/image.hpp"
#include "pcnn/tiling.hpp"
#include "test_util.hpp"

using pcnn::FloatImage;
using pcnn::TileGrid;
using testutil::TempDir;

namespace {

FloatImage numbered(int h, int w, int channels) {
    FloatImage img(h, w, channels);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = static_cast<float>(i) * 0.001f;
    return img;
}

} // namespace

TEST_CASE("grid_dims floors partial tiles away") {
    CHECK(pcnn::grid_dims(100, 60, 20, 20) == std::pair<int, int>{5, 3});
    CHECK(pcnn::grid_dims(107, 63, 20, 20) == std::pair<int, int>{5, 3});
    CHECK(pcnn::grid_dims(21, 40, 20, 20) == std::pair<int, int>{1, 2});
    CHECK(pcnn::grid_dims(20, 20, 20, 20) == std::pair<int, int>{1, 1});
    CHECK(pcnn::grid_dims(41, 13, 7, 5) == std::pair<int, int>{5, 2});
}

TEST_CASE("grid_dims validates its arguments") {
    CHECK_THROWS_AS(pcnn::grid_dims(10, 10, 0, 5), std::invalid_argument);
    CHECK_THROWS_AS(pcnn::grid_dims(10, 10, 5, -1), std::invalid_argument);
    CHECK_THROWS_AS(pcnn::grid_dims(0, 10, 5, 5), std::invalid_argument);
    CHECK_THROWS_WITH_AS(pcnn::grid_dims(10, 10, 11, 5), doctest::Contains("larger than source"),
                         std::invalid_argument);
}

TEST_CASE("subdivide cuts raster-order blocks with their exact content") {
    const FloatImage img = numbered(6, 4, 3);
    const TileGrid grid = pcnn::subdivide(img, 2, 2);
    CHECK(grid.rows == 3);
    CHECK(grid.cols == 2);
    CHECK(grid.channels == 3);
    CHECK(grid.tiles.size() == 6);

    // Tile (1, 0) must be the block whose top-left pixel is (2, 0).
    const FloatImage& t = grid.tile(1, 0);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(t.at(y, x, c) == img.at(2 + y, x, c));
}

TEST_CASE("flattened tile order is row-major") {
    const FloatImage img = numbered(9, 12, 1);
    const TileGrid grid = pcnn::subdivide(img, 3, 3);
    CHECK(grid.cols == 4);
    // index(r, c) = r * cols + c; spot-check against content identity.
    CHECK(grid.index(2, 1) == 9);
    CHECK(grid.tiles[9].at(0, 0, 0) == img.at(6, 3, 0));
    CHECK(&grid.tile(2, 1) == &grid.tiles[9]);
}

TEST_CASE("reassemble restores the cropped source bit-exactly") {
    const FloatImage img = numbered(11, 9, 3);
    const TileGrid grid = pcnn::subdivide(img, 3, 4);
    CHECK(grid.rows == 3);
    CHECK(grid.cols == 2);

    const FloatImage back = pcnn::reassemble(grid);
    CHECK(back.height == 9);
    CHECK(back.width == 8);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 8; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(std::memcmp(&back.data[back.index(y, x, c)],
                                  &img.data[img.index(y, x, c)], sizeof(float)) == 0);
}

TEST_CASE("random triples: count formula and bit-exact reassembly") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> dim(1, 64), tside(1, 16);
    std::uniform_real_distribution<float> val(0.0f, 1.0f);

    for (int trial = 0; trial < 25; ++trial) {
        const int th = tside(rng), tw = tside(rng);
        const int h = th + dim(rng), w = tw + dim(rng);
        FloatImage img(h, w, trial % 2 == 0 ? 1 : 3);
        for (auto& v : img.data) v = val(rng);

        const TileGrid grid = pcnn::subdivide(img, th, tw);
        CHECK(static_cast<int>(grid.tiles.size()) == (h / th) * (w / tw));

        const FloatImage back = pcnn::reassemble(grid);
        REQUIRE(back.height == grid.rows * th);
        REQUIRE(back.width == grid.cols * tw);
        bool exact = true;
        for (int y = 0; y < back.height && exact; ++y)
            exact = std::memcmp(&back.data[back.index(y, 0, 0)], &img.data[img.index(y, 0, 0)],
                                static_cast<std::size_t>(back.width) * back.channels *
                                    sizeof(float)) == 0;
        CHECK(exact);
    }
}

TEST_CASE("export_tiles writes r{row}_c{col}.png files that load back") {
    TempDir tmp;
    // u8-derived values survive the float/byte round trip exactly
    pcnn::Image src(8, 12, 3);
    for (std::size_t i = 0; i < src.data.size(); ++i)
        src.data[i] = static_cast<std::uint8_t>((i * 31) % 256);
    const TileGrid grid = pcnn::subdivide(pcnn::to_float(src), 4, 4);

    const auto out = tmp / "tiles";
    CHECK(pcnn::export_tiles(grid, out) == 6);

    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c) {
            const auto name = "r" + std::to_string(r) + "_c" + std::to_string(c) + ".png";
            const pcnn::Image tile = pcnn::load_image(out / name);
            REQUIRE(tile.height == 4);
            REQUIRE(tile.width == 4);
            for (int y = 0; y < 4; ++y)
                for (int x = 0; x < 4; ++x)
                    CHECK(tile.at(y, x, 1) == src.at(r * 4 + y, c * 4 + x, 1));
        }
}

TEST_CASE("export_tiles fails cleanly when the directory cannot be made") {
    TempDir tmp;
    testutil::write_file_bytes(tmp / "blocker", {1});
    const FloatImage img = numbered(4, 4, 1);
    const TileGrid grid = pcnn::subdivide(img, 2, 2);
    CHECK_THROWS_AS(pcnn::export_tiles(grid, tmp.path() / "blocker" / "tiles"),
                    std::runtime_error);
}
