#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "pcnn/dataset.hpp"
#include "pcnn/image.hpp"
#include "pcnn/mapping.hpp"
#include "pcnn/net.hpp"
#include "pcnn/persistence.hpp"
#include "pcnn/tiling.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// A bad --config file is a usage problem, not a runtime one.
struct ConfigUsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Config files are flat JSON objects keyed by long option name, e.g.
// {"tile": 20, "classes": ["tiles/a", "tiles/b"]}. The file's values are spliced
// into the argument list before parsing, so they pass through the same option
// checks as explicit flags, and explicit flags win simply by being present.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::string file;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size())
            file = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0)
            file = args[i].substr(9);
    }
    if (file.empty()) return args;

    std::ifstream in(file);
    if (!in)
        throw ConfigUsageError("cannot open config file " + file);
    json j;
    try {
        j = json::parse(in);
    } catch (const std::exception& e) {
        throw ConfigUsageError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw ConfigUsageError("config file must be a JSON object of flag values");

    const auto given = [&args](const std::string& flag) {
        for (const auto& a : args)
            if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
        return false;
    };
    const auto as_string = [](const json& v) {
        return v.is_string() ? v.get<std::string>() : v.dump();
    };
    for (const auto& [key, value] : j.items()) {
        const std::string flag = "--" + key;
        if (key == "config" || given(flag)) continue;
        args.push_back(flag);
        if (value.is_array())
            for (const json& e : value) args.push_back(as_string(e));
        else
            args.push_back(as_string(value));
    }
    return args;
}

std::string fmt(double v, int digits = 4) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string class_dir_name(const fs::path& p) {
    fs::path q = p;
    if (q.filename().empty()) q = q.parent_path(); // trailing slash
    std::string name = q.filename().string();
    return name.empty() ? p.string() : name;
}

pcnn::FloatImage adapt_channels(const pcnn::FloatImage& img, int want) {
    if (img.channels == want) return img;
    if (want == 1) {
        std::cout << "note: RGB input converted to grayscale for the 1-channel model\n";
        return pcnn::to_grayscale(img);
    }
    std::cout << "note: grayscale input promoted to RGB by channel replication\n";
    pcnn::FloatImage out(img.height, img.width, 3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, x, 0);
    return out;
}

// ------------------------------------------------------------------ subdivide

struct SubdivideArgs {
    std::string input;
    int tile = 20;
    std::string out;
    std::string config;
};

void run_subdivide(const SubdivideArgs& a) {
    pcnn::Image img = pcnn::load_image(a.input);
    pcnn::TileGrid grid = pcnn::subdivide(pcnn::to_float(img), a.tile, a.tile);
    const int n = pcnn::export_tiles(grid, a.out);
    std::cout << grid.rows << " x " << grid.cols << " = " << n << " tiles written\n";
}

// ---------------------------------------------------------------------- synth

struct SynthArgs {
    std::string kind = "color";
    int height = 200;
    int width = 200;
    double fraction = 0.5;
    double noise = 0.0;
    std::uint64_t seed = 0;
    int tile = 20;
    std::string out_dir = ".";
    std::string config;
};

void run_synth(const SynthArgs& a) {
    pcnn::SynthSpec spec;
    spec.kind = a.kind == "texture" ? pcnn::SynthSpec::Kind::texture
                                    : pcnn::SynthSpec::Kind::color;
    spec.height = a.height;
    spec.width = a.width;
    spec.mix_fraction = a.fraction;
    spec.noise_sigma = a.noise;
    spec.seed = a.seed;

    const fs::path dir(a.out_dir);
    fs::create_directories(dir);

    auto write = [&dir](const pcnn::FloatImage& img, const char* name) {
        const fs::path p = dir / name;
        pcnn::save_image(pcnn::to_u8(img), p);
        std::cout << "wrote " << p.string() << "\n";
    };

    if (a.kind == "color") {
        const auto [img_a, img_b] = pcnn::make_color_pair(spec);
        write(img_a, "class_a.png");
        write(img_b, "class_b.png");
    } else if (a.kind == "texture") {
        const auto [porous, fibrous] = pcnn::make_texture_pair(spec);
        write(porous, "porous.png");
        write(fibrous, "fibrous.png");
    } else { // mixture of the color pair
        const auto [img_a, img_b] = pcnn::make_color_pair(spec);
        const pcnn::Mixture mix = pcnn::make_mixture(spec, img_a, img_b, a.tile);
        write(mix.image, "mix.png");
        const fs::path csv = dir / "truth.csv";
        pcnn::write_truth_csv(mix, csv);
        std::cout << "wrote " << csv.string() << "\n";
        std::cout << "realized fraction " << fmt(mix.realized_fraction) << " over " << mix.rows
                  << " x " << mix.cols << " tiles\n";
    }
}

// ---------------------------------------------------------------------- train

struct TrainArgs {
    std::vector<std::string> classes;
    int tile = 0; // 0 = take from the dataset
    int epochs = 30;
    int batch = 32;
    double lr = 0.01;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    double split = 0.8;
    std::string out = "model.pcnn";
    std::string config;
};

void run_train(const TrainArgs& a) {
    if (a.classes.size() < 2)
        throw CLI::ValidationError("--classes needs at least 2 class directories");

    std::vector<fs::path> dirs(a.classes.begin(), a.classes.end());
    std::vector<std::string> names;
    names.reserve(dirs.size());
    for (const auto& d : dirs) names.push_back(class_dir_name(d));

    const pcnn::LabeledTileSet ds = pcnn::build_dataset(dirs, names);
    if (a.tile > 0 && (ds.tile_h != a.tile || ds.tile_w != a.tile))
        throw std::runtime_error("dataset tiles are " + std::to_string(ds.tile_h) + "x" +
                                 std::to_string(ds.tile_w) + " but --tile asked for " +
                                 std::to_string(a.tile));

    const auto [train_set, val_set] = pcnn::split(ds, a.split, a.seed);
    std::cout << ds.items.size() << " tiles in " << names.size() << " classes; "
              << train_set.items.size() << " train / " << val_set.items.size() << " val\n";

    const pcnn::ArchSpec arch =
        pcnn::ArchSpec::make_default(ds.tile_h, ds.tile_w, ds.channels, ds.num_classes());
    pcnn::Model model = pcnn::init_model(arch, a.seed);

    pcnn::TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch;
    cfg.learning_rate = static_cast<float>(a.lr);
    cfg.momentum = static_cast<float>(a.momentum);
    cfg.seed = a.seed;

    const pcnn::TrainReport report =
        pcnn::train(model, train_set, val_set, cfg, [&a](int epoch, float loss, float acc) {
            std::cout << "epoch " << epoch << "/" << a.epochs << " loss " << fmt(loss)
                      << " accuracy " << fmt(acc) << "\n";
        });

    pcnn::save_model(model, a.out);
    std::cout << "model written to " << a.out << "\n";

    fs::path report_path(a.out);
    report_path.replace_extension(".report.json");
    json j{{"classes", names},
           {"tile_height", ds.tile_h},
           {"tile_width", ds.tile_w},
           {"channels", ds.channels},
           {"train_items", train_set.items.size()},
           {"val_items", val_set.items.size()},
           {"epochs", a.epochs},
           {"batch_size", a.batch},
           {"learning_rate", a.lr},
           {"momentum", a.momentum},
           {"seed", a.seed},
           {"train_fraction", a.split},
           {"epoch_loss", report.epoch_loss},
           {"epoch_accuracy", report.epoch_accuracy},
           {"validation_accuracy", report.val_accuracy},
           {"seconds", report.seconds},
           {"model_file", a.out}};
    std::ofstream out(report_path, std::ios::trunc);
    if (!out || !(out << j.dump(2) << "\n"))
        throw std::runtime_error("cannot write " + report_path.string());
    std::cout << "report written to " << report_path.string() << "\n";
    std::cout << "validation accuracy " << fmt(report.val_accuracy) << "\n";
}

// -------------------------------------------------------------------- predict

struct PredictArgs {
    std::string model;
    std::string input;
    double tau = 0.5;
    int cls = 1;
    std::string scores;
    std::string map;
    std::string overlay;
    std::vector<int> color = {255, 0, 0};
    double alpha = 0.5;
    std::string config;
};

void run_predict(const PredictArgs& a) {
    const pcnn::Model model = pcnn::load_model(a.model);
    const pcnn::Image src = pcnn::load_image(a.input);
    const pcnn::FloatImage input = adapt_channels(pcnn::to_float(src), model.arch.input_c);
    const pcnn::TileGrid grid =
        pcnn::subdivide(input, model.arch.input_h, model.arch.input_w);
    const pcnn::PredictionMap map = pcnn::predict_tiles(model, grid);
    std::cout << "predicted " << map.rows << " x " << map.cols << " tiles of "
              << map.tile_h << "x" << map.tile_w << "\n";

    if (!a.scores.empty()) {
        pcnn::write_scores_csv(map, a.scores);
        std::cout << "wrote " << a.scores << "\n";
    }
    if (!a.map.empty()) {
        pcnn::save_image(pcnn::render_heatmap(map, a.cls), a.map);
        std::cout << "wrote " << a.map << "\n";
    }
    if (!a.overlay.empty()) {
        const pcnn::BinaryMask mask =
            pcnn::threshold(map, a.cls, static_cast<float>(a.tau));
        const pcnn::Rgb color{static_cast<std::uint8_t>(a.color.at(0)),
                              static_cast<std::uint8_t>(a.color.at(1)),
                              static_cast<std::uint8_t>(a.color.at(2))};
        pcnn::save_image(pcnn::overlay(src, mask, color, a.alpha), a.overlay);
        std::cout << "wrote " << a.overlay << "\n";
    }

    for (int k = 0; k < map.num_classes; ++k) {
        const double frac =
            pcnn::class_fraction(pcnn::threshold(map, k, static_cast<float>(a.tau)));
        std::cout << "class " << k << " fraction at tau " << fmt(a.tau, 2) << ": " << fmt(frac)
                  << "\n";
    }
}

// ----------------------------------------------------------------------- eval

struct EvalArgs {
    std::string model;
    std::vector<std::string> classes;
    std::string truth;
    std::string input;
    double tau = 0.5;
    int cls = 1;
    std::string sweep;
    std::vector<std::string> images;
    int tile = 20;
    int epochs = 30;
    int batch = 32;
    double lr = 0.01;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    double split = 0.8;
    std::string config;
};

void eval_accuracy(const EvalArgs& a) {
    if (a.model.empty())
        throw CLI::ValidationError("--classes mode needs --model");
    const pcnn::Model model = pcnn::load_model(a.model);

    std::vector<fs::path> dirs(a.classes.begin(), a.classes.end());
    std::vector<std::string> names;
    names.reserve(dirs.size());
    for (const auto& d : dirs) names.push_back(class_dir_name(d));

    const pcnn::LabeledTileSet ds = pcnn::build_dataset(dirs, names);
    const double acc = pcnn::evaluate(model, ds);
    std::cout << "accuracy " << fmt(acc) << " over " << ds.items.size() << " tiles\n";
}

void eval_truth(const EvalArgs& a) {
    if (a.model.empty() || a.input.empty())
        throw CLI::ValidationError("--truth mode needs --model and --input");
    const pcnn::Model model = pcnn::load_model(a.model);
    const pcnn::TruthMask truth = pcnn::read_truth_csv(a.truth);

    const pcnn::Image src = pcnn::load_image(a.input);
    const pcnn::FloatImage input = adapt_channels(pcnn::to_float(src), model.arch.input_c);
    const pcnn::TileGrid grid =
        pcnn::subdivide(input, model.arch.input_h, model.arch.input_w);
    if (grid.rows != truth.rows || grid.cols != truth.cols)
        throw std::runtime_error("prediction grid " + std::to_string(grid.rows) + "x" +
                                 std::to_string(grid.cols) + " does not match the truth mask " +
                                 std::to_string(truth.rows) + "x" + std::to_string(truth.cols));

    const pcnn::PredictionMap map = pcnn::predict_tiles(model, grid);
    const pcnn::BinaryMask mask = pcnn::threshold(map, a.cls, static_cast<float>(a.tau));

    std::size_t disagree = 0, ones = 0;
    for (std::size_t i = 0; i < mask.bits.size(); ++i) {
        if (mask.bits[i] != truth.bits[i]) ++disagree;
        ones += truth.bits[i];
    }
    const double n = static_cast<double>(mask.bits.size());
    const double f_pred = pcnn::class_fraction(mask);
    const double f_true = static_cast<double>(ones) / n;

    std::cout << "tile disagreement " << fmt(static_cast<double>(disagree) / n) << " ("
              << disagree << " of " << mask.bits.size() << " tiles)\n";
    std::cout << "predicted fraction " << fmt(f_pred) << ", truth fraction " << fmt(f_true)
              << ", abs error " << fmt(std::abs(f_pred - f_true)) << "\n";
}

std::pair<std::string, std::vector<int>> parse_sweep(const std::string& sweep) {
    const auto eq = sweep.find('=');
    const std::string key = sweep.substr(0, eq == std::string::npos ? sweep.size() : eq);
    if (eq == std::string::npos || (key != "tile" && key != "blocks"))
        throw CLI::ValidationError("--sweep must look like tile=10,20,40 or blocks=1,2,3");
    std::vector<int> values;
    std::string rest = sweep.substr(eq + 1);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
        const auto comma = std::min(rest.find(',', pos), rest.size());
        int v = 0;
        try {
            std::size_t used = 0;
            v = std::stoi(rest.substr(pos, comma - pos), &used);
            if (used != comma - pos) v = 0;
        } catch (const std::exception&) {
            v = 0;
        }
        if (v < 1)
            throw CLI::ValidationError("--sweep values must be positive integers");
        values.push_back(v);
        pos = comma + 1;
    }
    if (values.empty())
        throw CLI::ValidationError("--sweep lists no values");
    return {key, values};
}

pcnn::ArchSpec arch_with_blocks(int tile, int channels, int num_classes, int n_blocks) {
    pcnn::ArchSpec arch;
    arch.input_h = tile;
    arch.input_w = tile;
    arch.input_c = channels;
    arch.num_classes = num_classes;
    for (int i = 0; i < n_blocks; ++i)
        arch.blocks.push_back({8 << i, i + 1 < n_blocks});
    arch.validate();
    return arch;
}

void eval_sweep(const EvalArgs& a) {
    if (a.images.size() < 2)
        throw CLI::ValidationError("--sweep mode needs --images with one source per class");
    const auto [key, values] = parse_sweep(a.sweep);

    std::vector<pcnn::FloatImage> sources;
    std::vector<std::string> names;
    for (const auto& path : a.images) {
        sources.push_back(pcnn::to_float(pcnn::load_image(path)));
        names.push_back(fs::path(path).stem().string());
        if (sources.back().channels != sources.front().channels)
            throw std::runtime_error("source images must share a channel count");
    }

    std::cout << "setting      tiles  val_accuracy  seconds\n";
    for (int v : values) {
        const int tile = key == "tile" ? v : a.tile;

        pcnn::LabeledTileSet ds;
        ds.tile_h = tile;
        ds.tile_w = tile;
        ds.channels = sources.front().channels;
        ds.class_names = names;
        for (std::size_t i = 0; i < sources.size(); ++i) {
            const pcnn::TileGrid grid = pcnn::subdivide(sources[i], tile, tile);
            for (const auto& t : grid.tiles)
                ds.items.push_back({t, static_cast<int>(i)});
        }

        const auto [train_set, val_set] = pcnn::split(ds, a.split, a.seed);
        const pcnn::ArchSpec arch =
            key == "blocks"
                ? arch_with_blocks(tile, ds.channels, ds.num_classes(), v)
                : pcnn::ArchSpec::make_default(tile, tile, ds.channels, ds.num_classes());
        pcnn::Model model = pcnn::init_model(arch, a.seed);

        pcnn::TrainConfig cfg;
        cfg.epochs = a.epochs;
        cfg.batch_size = a.batch;
        cfg.learning_rate = static_cast<float>(a.lr);
        cfg.momentum = static_cast<float>(a.momentum);
        cfg.seed = a.seed;
        const pcnn::TrainReport report = pcnn::train(model, train_set, val_set, cfg);

        char row[96];
        std::snprintf(row, sizeof(row), "%-9s %8zu %13.4f %8.2f\n",
                      (key + "=" + std::to_string(v)).c_str(), ds.items.size(),
                      static_cast<double>(report.val_accuracy), report.seconds);
        std::cout << row;
    }
}

void run_eval(const EvalArgs& a) {
    const int modes = (!a.classes.empty() ? 1 : 0) + (!a.truth.empty() ? 1 : 0) +
                      (!a.sweep.empty() ? 1 : 0);
    if (modes != 1)
        throw CLI::ValidationError(
            "eval needs exactly one of --classes (accuracy), --truth (mask error), or --sweep");
    if (!a.classes.empty())
        eval_accuracy(a);
    else if (!a.truth.empty())
        eval_truth(a);
    else
        eval_sweep(a);
}

void add_train_flags(CLI::App* cmd, int& epochs, int& batch, double& lr, double& momentum,
                     std::uint64_t& seed, double& split) {
    cmd->add_option("--epochs", epochs, "training epochs")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--batch", batch, "minibatch size")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--lr", lr, "learning rate")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--momentum", momentum, "SGD momentum")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--seed", seed, "seed for split, init, and shuffling")
        ->capture_default_str();
    cmd->add_option("--split", split, "train fraction of the stratified split")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tile-based image classification: subdivide, synthesize fixtures, train, "
                 "predict, evaluate",
                 "pcnn"};
    app.require_subcommand(1);

    SubdivideArgs sd;
    CLI::App* subdivide = app.add_subcommand("subdivide", "cut an image into fixed-size tiles");
    subdivide->add_option("--input", sd.input, "source image (PNG)")->required();
    subdivide->add_option("--tile", sd.tile, "tile side length in pixels")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    subdivide->add_option("--out", sd.out, "directory for the r{row}_c{col}.png tiles")
        ->required();
    subdivide->add_option("--config", sd.config, "JSON config file; explicit flags win");
    subdivide->callback([&sd] { run_subdivide(sd); });

    SynthArgs sy;
    CLI::App* synth = app.add_subcommand("synth", "generate synthetic fixture images");
    synth->add_option("--kind", sy.kind, "color | texture | mixture")
        ->capture_default_str()
        ->check(CLI::IsMember({"color", "texture", "mixture"}));
    synth->add_option("--height", sy.height, "image height")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    synth->add_option("--width", sy.width, "image width")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    synth->add_option("--fraction", sy.fraction, "mixture fraction drawn from class b")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    synth->add_option("--noise", sy.noise, "Gaussian pixel noise std")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    synth->add_option("--seed", sy.seed, "generator seed")->capture_default_str();
    synth->add_option("--tile", sy.tile, "mixture cell size in pixels")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    synth->add_option("--out-dir", sy.out_dir, "output directory")->capture_default_str();
    synth->add_option("--config", sy.config, "JSON config file; explicit flags win");
    synth->callback([&sy] { run_synth(sy); });

    TrainArgs tr;
    CLI::App* train = app.add_subcommand("train", "train a tile classifier from class directories");
    train->add_option("--classes", tr.classes, "one tile directory per class (2 or more)")
        ->required()
        ->expected(2, std::numeric_limits<int>::max());
    train->add_option("--tile", tr.tile, "expected tile side; checked against the dataset")
        ->check(CLI::PositiveNumber);
    add_train_flags(train, tr.epochs, tr.batch, tr.lr, tr.momentum, tr.seed, tr.split);
    train->add_option("--out", tr.out, "model file to write")->capture_default_str();
    train->add_option("--config", tr.config, "JSON config file; explicit flags win");
    train->callback([&tr] { run_train(tr); });

    PredictArgs pr;
    CLI::App* predict = app.add_subcommand("predict", "classify the tiles of an image");
    predict->add_option("--model", pr.model, "trained model file")->required();
    predict->add_option("--input", pr.input, "image to classify")->required();
    predict->add_option("--tau", pr.tau, "mask threshold")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    predict->add_option("--class", pr.cls, "class rendered in the map / mask / overlay")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    predict->add_option("--scores", pr.scores, "write per-tile probabilities CSV here");
    predict->add_option("--map", pr.map, "write probability heatmap PNG here");
    predict->add_option("--overlay", pr.overlay, "write masked-overlay PNG here");
    predict->add_option("--color", pr.color, "overlay marker color r,g,b")
        ->delimiter(',')
        ->expected(3)
        ->check(CLI::Range(0, 255));
    predict->add_option("--alpha", pr.alpha, "overlay blend weight, 0 < alpha <= 1")
        ->capture_default_str()
        ->check(CLI::Validator(
            [](std::string& s) -> std::string {
                double v = 0.0;
                try {
                    std::size_t used = 0;
                    v = std::stod(s, &used);
                    if (used != s.size()) throw std::invalid_argument(s);
                } catch (const std::exception&) {
                    return "'" + s + "' is not a number";
                }
                if (!(v > 0.0) || v > 1.0) return "alpha must be in (0, 1], got " + s;
                return {};
            },
            "FLOAT in (0, 1]"));
    predict->add_option("--config", pr.config, "JSON config file; explicit flags win");
    predict->callback([&pr] { run_predict(pr); });

    EvalArgs ev;
    CLI::App* eval = app.add_subcommand("eval", "measure a model, or sweep settings");
    eval->add_option("--model", ev.model, "trained model file");
    eval->add_option("--classes", ev.classes, "labeled tile directories (accuracy mode)");
    eval->add_option("--truth", ev.truth, "truth-mask CSV (mask-error mode)");
    eval->add_option("--input", ev.input, "mixture image that --truth describes");
    eval->add_option("--tau", ev.tau, "mask threshold")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    eval->add_option("--class", ev.cls, "mask / truth class index")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    eval->add_option("--sweep", ev.sweep, "tile=10,20,40 or blocks=1,2,3 (trains per setting)");
    eval->add_option("--images", ev.images, "one source image per class (sweep mode)");
    eval->add_option("--tile", ev.tile, "tile side for blocks sweeps")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    add_train_flags(eval, ev.epochs, ev.batch, ev.lr, ev.momentum, ev.seed, ev.split);
    eval->add_option("--config", ev.config, "JSON config file; explicit flags win");
    eval->callback([&ev] { run_eval(ev); });

    std::vector<std::string> args;
    try {
        args = expand_config({argv + 1, argv + argc});
    } catch (const ConfigUsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::reverse(args.begin(), args.end()); // the vector overload parses back to front

    try {
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
