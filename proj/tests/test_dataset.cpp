#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "pcnn/dataset.hpp"
#include "pcnn/image.hpp"
#include "pcnn/tiling.hpp"
#include "test_util.hpp"

using pcnn::FloatImage;
using pcnn::LabeledTileSet;
using pcnn::SynthSpec;
using testutil::TempDir;

namespace {

void write_tile(const std::filesystem::path& path, int side, std::uint8_t value) {
    pcnn::Image img(side, side, 1);
    std::fill(img.data.begin(), img.data.end(), value);
    pcnn::save_image(img, path);
}

LabeledTileSet tagged_set(const std::vector<int>& per_class) {
    LabeledTileSet ds;
    ds.tile_h = 4;
    ds.tile_w = 4;
    ds.channels = 1;
    int tag = 0;
    for (std::size_t k = 0; k < per_class.size(); ++k) {
        ds.class_names.push_back("c" + std::to_string(k));
        for (int i = 0; i < per_class[k]; ++i) {
            FloatImage tile(4, 4, 1);
            std::fill(tile.data.begin(), tile.data.end(), static_cast<float>(tag++));
            ds.items.push_back({std::move(tile), static_cast<int>(k)});
        }
    }
    return ds;
}

int tag_of(const pcnn::LabeledTileSet::Item& item) {
    return static_cast<int>(item.tile.data[0]);
}

double mean_of(const FloatImage& img) {
    double s = 0.0;
    for (float v : img.data) s += v;
    return s / static_cast<double>(img.data.size());
}

} // namespace

TEST_CASE("build_dataset labels tiles per directory in lexicographic file order") {
    TempDir tmp;
    const auto dir_a = tmp / "alpha", dir_b = tmp / "beta";
    std::filesystem::create_directories(dir_a);
    std::filesystem::create_directories(dir_b);
    // written out of order; "t10.png" sorts before "t2.png" lexicographically
    write_tile(dir_a / "t2.png", 6, 20);
    write_tile(dir_a / "t10.png", 6, 10);
    write_tile(dir_a / "t3.png", 6, 30);
    write_tile(dir_b / "only.png", 6, 99);
    testutil::write_file_bytes(dir_b / "notes.txt", {'x'}); // ignored

    const LabeledTileSet ds = pcnn::build_dataset({dir_a, dir_b}, {"alpha", "beta"});
    CHECK(ds.num_classes() == 2);
    CHECK(ds.class_names == std::vector<std::string>{"alpha", "beta"});
    CHECK(ds.items.size() == 4);
    CHECK(ds.tile_h == 6);
    CHECK(ds.channels == 1);

    CHECK(ds.items[0].label == 0);
    CHECK(ds.items[0].tile.data[0] == doctest::Approx(10.0 / 255.0));
    CHECK(ds.items[1].tile.data[0] == doctest::Approx(20.0 / 255.0));
    CHECK(ds.items[2].tile.data[0] == doctest::Approx(30.0 / 255.0));
    CHECK(ds.items[3].label == 1);
}

TEST_CASE("build_dataset rejects bad corpora") {
    TempDir tmp;
    const auto dir_a = tmp / "a", dir_b = tmp / "b";
    std::filesystem::create_directories(dir_a);
    std::filesystem::create_directories(dir_b);
    write_tile(dir_a / "t.png", 4, 1);

    CHECK_THROWS_AS(pcnn::build_dataset({dir_a}, {"a"}), std::invalid_argument);
    CHECK_THROWS_WITH_AS(pcnn::build_dataset({dir_a, dir_b}, {"a", "b"}),
                         doctest::Contains("no tiles"), std::runtime_error);

    write_tile(dir_b / "wrong.png", 5, 1); // 5x5 vs 4x4
    CHECK_THROWS_WITH_AS(pcnn::build_dataset({dir_a, dir_b}, {"a", "b"}),
                         doctest::Contains("dimension mismatch"), std::runtime_error);
}

TEST_CASE("split is stratified with floor counts and at least one item per side") {
    const LabeledTileSet ds = tagged_set({10, 6});
    const auto [train, val] = pcnn::split(ds, 0.8, 3);

    int train0 = 0, train1 = 0, val0 = 0, val1 = 0;
    for (const auto& it : train.items) (it.label == 0 ? train0 : train1)++;
    for (const auto& it : val.items) (it.label == 0 ? val0 : val1)++;
    CHECK(train0 == 8); // floor(10 * 0.8)
    CHECK(train1 == 4); // floor(6 * 0.8)
    CHECK(val0 == 2);
    CHECK(val1 == 2);

    // the two sides partition the corpus
    std::set<int> seen;
    for (const auto& it : train.items) seen.insert(tag_of(it));
    for (const auto& it : val.items) seen.insert(tag_of(it));
    CHECK(seen.size() == 16);
}

TEST_CASE("split keeps one item per side even at extreme fractions") {
    const LabeledTileSet ds = tagged_set({2, 2});
    const auto [hi_train, hi_val] = pcnn::split(ds, 0.99, 0);
    CHECK(hi_train.items.size() == 2);
    CHECK(hi_val.items.size() == 2);
    const auto [lo_train, lo_val] = pcnn::split(ds, 0.01, 0);
    CHECK(lo_train.items.size() == 2);
    CHECK(lo_val.items.size() == 2);
}

TEST_CASE("split is deterministic per seed") {
    const LabeledTileSet ds = tagged_set({12, 12});
    const auto [a_train, a_val] = pcnn::split(ds, 0.75, 42);
    const auto [b_train, b_val] = pcnn::split(ds, 0.75, 42);
    const auto [c_train, c_val] = pcnn::split(ds, 0.75, 43);

    auto tags = [](const LabeledTileSet& s) {
        std::vector<int> t;
        for (const auto& it : s.items) t.push_back(tag_of(it));
        return t;
    };
    CHECK(tags(a_train) == tags(b_train));
    CHECK(tags(a_val) == tags(b_val));
    CHECK(tags(a_train) != tags(c_train));
}

TEST_CASE("split validates its inputs") {
    const LabeledTileSet ds = tagged_set({5, 1});
    CHECK_THROWS_AS(pcnn::split(ds, 0.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(pcnn::split(ds, 1.0, 0), std::invalid_argument);
    CHECK_THROWS_WITH_AS(pcnn::split(ds, 0.5, 0), doctest::Contains("fewer than 2"),
                         std::runtime_error);
}

TEST_CASE("color pair without noise is exactly the two base colors") {
    SynthSpec spec;
    spec.height = 8;
    spec.width = 8;
    spec.noise_sigma = 0.0;
    const auto [a, b] = pcnn::make_color_pair(spec);

    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            CHECK(a.at(y, x, 0) == 0.90f);
            CHECK(a.at(y, x, 1) == 0.90f);
            CHECK(a.at(y, x, 2) == 0.85f);
            CHECK(b.at(y, x, 0) == 0.95f);
            CHECK(b.at(y, x, 1) == 0.80f);
            CHECK(b.at(y, x, 2) == 0.20f);
        }
}

TEST_CASE("color pair noise has the requested spread per channel") {
    SynthSpec spec;
    spec.height = 200;
    spec.width = 200;
    spec.noise_sigma = 0.05;
    spec.seed = 11;
    const auto [a, b] = pcnn::make_color_pair(spec);

    const float bases[2][3] = {{0.90f, 0.90f, 0.85f}, {0.95f, 0.80f, 0.20f}};
    const FloatImage* imgs[2] = {&a, &b};
    for (int i = 0; i < 2; ++i)
        for (int c = 0; c < 3; ++c) {
            double sum = 0.0, sq = 0.0;
            const int n = 200 * 200;
            for (int y = 0; y < 200; ++y)
                for (int x = 0; x < 200; ++x) sum += imgs[i]->at(y, x, c);
            const double mean = sum / n;
            for (int y = 0; y < 200; ++y)
                for (int x = 0; x < 200; ++x) {
                    const double d = imgs[i]->at(y, x, c) - mean;
                    sq += d * d;
                }
            const double sd = std::sqrt(sq / (n - 1));
            // clamping at 1.0 shaves a little off the spread near bright bases
            CHECK(mean == doctest::Approx(bases[i][c]).epsilon(0.02));
            CHECK(sd > 0.03);
            CHECK(sd < 0.07);
        }
}

TEST_CASE("color pair is deterministic per seed") {
    SynthSpec spec;
    spec.height = 32;
    spec.width = 32;
    spec.noise_sigma = 0.05;
    spec.seed = 5;
    const auto [a1, b1] = pcnn::make_color_pair(spec);
    const auto [a2, b2] = pcnn::make_color_pair(spec);
    CHECK(a1.data == a2.data);
    CHECK(b1.data == b2.data);

    spec.seed = 6;
    const auto [a3, b3] = pcnn::make_color_pair(spec);
    CHECK(a1.data != a3.data);
}

TEST_CASE("texture pair: grayscale, bounded, both phases present") {
    SynthSpec spec;
    spec.kind = SynthSpec::Kind::texture;
    spec.height = 100;
    spec.width = 100;
    spec.seed = 2;
    const auto [porous, fibrous] = pcnn::make_texture_pair(spec);

    CHECK(porous.channels == 1);
    CHECK(fibrous.channels == 1);

    for (const FloatImage* img : {&porous, &fibrous}) {
        int dark = 0, light = 0;
        for (float v : img->data) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
            if (v < 0.3f) ++dark;
            if (v > 0.7f) ++light;
        }
        const auto n = static_cast<double>(img->data.size());
        CHECK(dark / n > 0.05);  // ground or pores
        CHECK(light / n > 0.05); // bright structure
    }
}

TEST_CASE("tile brightness alone cannot separate the texture classes") {
    SynthSpec spec;
    spec.kind = SynthSpec::Kind::texture;
    spec.height = 100;
    spec.width = 100;
    spec.seed = 9;
    const auto [porous, fibrous] = pcnn::make_texture_pair(spec);

    std::vector<double> porous_means, fibrous_means;
    for (const auto& t : pcnn::subdivide(porous, 10, 10).tiles) porous_means.push_back(mean_of(t));
    for (const auto& t : pcnn::subdivide(fibrous, 10, 10).tiles)
        fibrous_means.push_back(mean_of(t));

    // best single-threshold accuracy over the 200 tile means
    std::vector<double> all = porous_means;
    all.insert(all.end(), fibrous_means.begin(), fibrous_means.end());
    std::sort(all.begin(), all.end());
    double best = 0.0;
    for (std::size_t i = 0; i + 1 <= all.size(); ++i) {
        const double thr = i == 0 ? all[0] - 1e-9 : (all[i - 1] + all[i]) / 2.0;
        for (int side = 0; side < 2; ++side) {
            int correct = 0;
            for (double m : porous_means) correct += (side == 0 ? m < thr : m >= thr) ? 1 : 0;
            for (double m : fibrous_means) correct += (side == 0 ? m >= thr : m < thr) ? 1 : 0;
            best = std::max(best, correct / 200.0);
        }
    }
    CHECK(best < 1.0); // the classes need texture, not just mean intensity
}

TEST_CASE("mixture draws cells from the right sources") {
    SynthSpec spec;
    spec.height = 40;
    spec.width = 40;
    spec.mix_fraction = 0.5;
    spec.seed = 21;
    const auto [a, b] = pcnn::make_color_pair(spec); // sigma 0: constant colors
    const pcnn::Mixture mix = pcnn::make_mixture(spec, a, b, 10);

    CHECK(mix.rows == 4);
    CHECK(mix.cols == 4);
    CHECK(mix.image.height == 40);

    int ones = 0;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            const float got = mix.image.at(r * 10 + 3, c * 10 + 7, 2); // blue separates
            if (mix.truth_at(r, c)) {
                CHECK(got == 0.20f);
                ++ones;
            } else {
                CHECK(got == 0.85f);
            }
        }
    CHECK(mix.realized_fraction == doctest::Approx(ones / 16.0));
}

TEST_CASE("mixture endpoints and determinism") {
    SynthSpec spec;
    spec.height = 60;
    spec.width = 60;
    spec.seed = 4;
    const auto [a, b] = pcnn::make_color_pair(spec);

    spec.mix_fraction = 0.0;
    CHECK(pcnn::make_mixture(spec, a, b, 20).realized_fraction == 0.0);
    spec.mix_fraction = 1.0;
    CHECK(pcnn::make_mixture(spec, a, b, 20).realized_fraction == 1.0);

    spec.mix_fraction = 0.5;
    const auto m1 = pcnn::make_mixture(spec, a, b, 10);
    const auto m2 = pcnn::make_mixture(spec, a, b, 10);
    CHECK(m1.truth == m2.truth);
    CHECK(m1.image.data == m2.image.data);
}

TEST_CASE("mixture fraction concentrates near the requested value") {
    SynthSpec spec;
    spec.height = 200;
    spec.width = 200;
    spec.mix_fraction = 0.5;
    spec.seed = 31;
    const auto [a, b] = pcnn::make_color_pair(spec);
    const pcnn::Mixture mix = pcnn::make_mixture(spec, a, b, 20); // 100 cells
    CHECK(mix.realized_fraction > 0.35);
    CHECK(mix.realized_fraction < 0.65);
}

TEST_CASE("mixture validates shapes and fraction") {
    SynthSpec spec;
    spec.height = 40;
    spec.width = 40;
    const auto [a, b] = pcnn::make_color_pair(spec);
    FloatImage small(20, 20, 3);
    CHECK_THROWS_AS(pcnn::make_mixture(spec, a, small, 10), std::invalid_argument);
    spec.mix_fraction = 1.5;
    CHECK_THROWS_AS(pcnn::make_mixture(spec, a, b, 10), std::invalid_argument);
}

TEST_CASE("truth csv round-trips the mask") {
    TempDir tmp;
    SynthSpec spec;
    spec.height = 50;
    spec.width = 30;
    spec.mix_fraction = 0.4;
    spec.seed = 8;
    const auto [a, b] = pcnn::make_color_pair(spec);
    const pcnn::Mixture mix = pcnn::make_mixture(spec, a, b, 10);

    const auto csv = tmp / "truth.csv";
    pcnn::write_truth_csv(mix, csv);

    const std::string text = testutil::read_file_text(csv);
    CHECK(text.rfind("row,col,label\n", 0) == 0);

    const pcnn::TruthMask mask = pcnn::read_truth_csv(csv);
    CHECK(mask.rows == 5);
    CHECK(mask.cols == 3);
    CHECK(mask.bits == mix.truth);
}

TEST_CASE("read_truth_csv rejects malformed files") {
    TempDir tmp;
    const auto p = tmp / "bad.csv";

    std::ofstream(p) << "r,c,l\n0,0,1\n";
    CHECK_THROWS_WITH_AS(pcnn::read_truth_csv(p), doctest::Contains("header"),
                         std::runtime_error);

    std::ofstream(p, std::ios::trunc) << "row,col,label\n0,0,2\n";
    CHECK_THROWS_AS(pcnn::read_truth_csv(p), std::runtime_error);

    std::ofstream(p, std::ios::trunc) << "row,col,label\n0,0,1\n1,1,0\n";
    CHECK_THROWS_WITH_AS(pcnn::read_truth_csv(p), doctest::Contains("full grid"),
                         std::runtime_error);

    CHECK_THROWS_AS(pcnn::read_truth_csv(tmp / "missing.csv"), std::runtime_error);
}
