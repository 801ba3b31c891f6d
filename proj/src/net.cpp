#include "pcnn/net.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace pcnn {

bool operator==(const ArchSpec::Block& a, const ArchSpec::Block& b) {
    return a.filters == b.filters && a.pool == b.pool;
}

ArchSpec ArchSpec::make_default(int input_h, int input_w, int input_c, int num_classes) {
    ArchSpec arch;
    arch.input_h = input_h;
    arch.input_w = input_w;
    arch.input_c = input_c;
    arch.blocks = {{8, true}, {16, true}, {32, false}};
    arch.num_classes = num_classes;
    arch.validate();
    return arch;
}

std::pair<int, int> ArchSpec::spatial_after(int upto) const {
    int h = input_h, w = input_w;
    for (int i = 0; i < upto && i < static_cast<int>(blocks.size()); ++i)
        if (blocks[i].pool) {
            h /= 2;
            w /= 2;
        }
    return {h, w};
}

int ArchSpec::flattened_size() const {
    const auto [h, w] = spatial_after(static_cast<int>(blocks.size()));
    return blocks.back().filters * h * w;
}

void ArchSpec::validate() const {
    if (input_h < 1 || input_w < 1)
        throw std::invalid_argument("arch: input dimensions must be >= 1");
    if (input_c != 1 && input_c != 3)
        throw std::invalid_argument("arch: input channels must be 1 or 3");
    if (num_classes < 2)
        throw std::invalid_argument("arch: need at least 2 classes");
    if (blocks.empty())
        throw std::invalid_argument("arch: need at least one conv block");
    int h = input_h, w = input_w;
    for (const auto& blk : blocks) {
        if (blk.filters < 1)
            throw std::invalid_argument("arch: block filter count must be >= 1");
        if (blk.pool) {
            if (h < 2 || w < 2)
                throw std::invalid_argument("arch: pooled spatial size reaches 0 (input " +
                                            std::to_string(input_h) + "x" +
                                            std::to_string(input_w) + " is too small)");
            h /= 2;
            w /= 2;
        }
    }
}

Model init_model(const ArchSpec& arch, std::uint64_t seed) {
    arch.validate();

    Model m;
    m.arch = arch;
    m.mode = Model::Mode::infer;

    std::mt19937_64 rng(seed);
    auto he_fill = [&rng](std::vector<float>& w, int fan_in) {
        std::normal_distribution<float> dist(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
        for (auto& v : w) v = dist(rng);
    };

    int in_c = arch.input_c;
    for (const auto& blk : arch.blocks) {
        Model::ConvBlock cb;
        cb.conv_w.resize(static_cast<std::size_t>(blk.filters) * in_c * 9);
        he_fill(cb.conv_w, in_c * 9);
        cb.conv_b.assign(blk.filters, 0.0f);
        cb.bn_gamma.assign(blk.filters, 1.0f);
        cb.bn_beta.assign(blk.filters, 0.0f);
        cb.bn_mean.assign(blk.filters, 0.0f);
        cb.bn_var.assign(blk.filters, 1.0f);
        m.blocks.push_back(std::move(cb));
        in_c = blk.filters;
    }

    const int flat = arch.flattened_size();
    m.fc_w.resize(static_cast<std::size_t>(arch.num_classes) * flat);
    he_fill(m.fc_w, flat);
    m.fc_b.assign(arch.num_classes, 0.0f);
    return m;
}

Tensor4<float> batch_from_tiles(const std::vector<const FloatImage*>& tiles,
                                const ArchSpec& arch) {
    if (tiles.empty())
        throw std::invalid_argument("batch_from_tiles: empty batch");
    Tensor4<float> batch(static_cast<int>(tiles.size()), arch.input_c, arch.input_h,
                         arch.input_w);
    for (std::size_t b = 0; b < tiles.size(); ++b) {
        const FloatImage& t = *tiles[b];
        if (t.height != arch.input_h || t.width != arch.input_w || t.channels != arch.input_c)
            throw std::invalid_argument(
                "tile dimensions " + std::to_string(t.height) + "x" + std::to_string(t.width) +
                "x" + std::to_string(t.channels) + " do not match the architecture input " +
                std::to_string(arch.input_h) + "x" + std::to_string(arch.input_w) + "x" +
                std::to_string(arch.input_c));
        for (int c = 0; c < t.channels; ++c)
            for (int y = 0; y < t.height; ++y)
                for (int x = 0; x < t.width; ++x)
                    batch.at(static_cast<int>(b), c, y, x) = t.at(y, x, c);
    }
    return batch;
}

namespace {

Matrix<float> softmax_rows(const Matrix<float>& logits) {
    Matrix<float> probs(logits.rows, logits.cols);
    for (int b = 0; b < logits.rows; ++b) {
        float mx = logits.at(b, 0);
        for (int k = 1; k < logits.cols; ++k) mx = std::max(mx, logits.at(b, k));
        float denom = 0.0f;
        for (int k = 0; k < logits.cols; ++k) {
            const float e = std::exp(logits.at(b, k) - mx);
            probs.at(b, k) = e;
            denom += e;
        }
        for (int k = 0; k < logits.cols; ++k) probs.at(b, k) /= denom;
    }
    return probs;
}

int argmax_row(const Matrix<float>& m, int row) {
    const float* r = m.row(row);
    return static_cast<int>(std::max_element(r, r + m.cols) - r); // first max wins ties
}

} // namespace

Matrix<float> forward_infer(const Model& model, const Tensor4<float>& batch) {
    Tensor4<float> x = batch;
    for (std::size_t i = 0; i < model.blocks.size(); ++i) {
        const auto& blk = model.blocks[i];
        x = conv2d_forward(x, blk.conv_w, blk.conv_b, model.arch.blocks[i].filters);
        x = batchnorm_infer(x, blk.bn_gamma, blk.bn_beta, blk.bn_mean, blk.bn_var, kBatchNormEps);
        x = relu_forward(x);
        if (model.arch.blocks[i].pool) x = maxpool2_forward<float>(x, nullptr);
    }
    Matrix<float> logits = dense_forward(flatten(x), model.fc_w, model.fc_b,
                                         model.arch.num_classes);
    return softmax_rows(logits);
}

Matrix<float> forward_train(Model& model, const Tensor4<float>& batch, ForwardCache& cache) {
    cache.blocks.clear();
    cache.blocks.resize(model.blocks.size());

    Tensor4<float> x = batch;
    for (std::size_t i = 0; i < model.blocks.size(); ++i) {
        auto& blk = model.blocks[i];
        auto& c = cache.blocks[i];
        c.conv_in = x;
        x = conv2d_forward(x, blk.conv_w, blk.conv_b, model.arch.blocks[i].filters);
        x = batchnorm_train(x, blk.bn_gamma, blk.bn_beta, kBatchNormEps, &blk.bn_mean,
                            &blk.bn_var, kBatchNormStatMomentum, &c.bn);
        c.pre_relu = x;
        x = relu_forward(x);
        if (model.arch.blocks[i].pool) x = maxpool2_forward(x, &c.pool);
    }
    cache.fc_in = flatten(x);
    return dense_forward(cache.fc_in, model.fc_w, model.fc_b, model.arch.num_classes);
}

std::vector<std::vector<float>> backward(const Model& model, const ForwardCache& cache,
                                         const Matrix<float>& grad_logits) {
    const int n_blocks = static_cast<int>(model.blocks.size());
    std::vector<std::vector<float>> grads(4 * static_cast<std::size_t>(n_blocks) + 2);

    DenseGrads<float> dg =
        dense_backward(cache.fc_in, model.fc_w, model.arch.num_classes, grad_logits);
    grads[4 * static_cast<std::size_t>(n_blocks)] = std::move(dg.weights);
    grads[4 * static_cast<std::size_t>(n_blocks) + 1] = std::move(dg.bias);

    const auto [fh, fw] = model.arch.spatial_after(n_blocks);
    Tensor4<float> g = unflatten(dg.x, model.arch.blocks.back().filters, fh, fw);

    for (int i = n_blocks - 1; i >= 0; --i) {
        const auto& blk = model.blocks[i];
        const auto& c = cache.blocks[i];
        if (model.arch.blocks[i].pool) g = maxpool2_backward(c.pool, g);
        g = relu_backward(c.pre_relu, g);
        BatchNormGrads<float> bg = batchnorm_backward(c.bn, blk.bn_gamma, g);
        Conv2dGrads<float> cg =
            conv2d_backward(c.conv_in, blk.conv_w, model.arch.blocks[i].filters, bg.x);
        grads[4 * static_cast<std::size_t>(i) + 0] = std::move(cg.weights);
        grads[4 * static_cast<std::size_t>(i) + 1] = std::move(cg.bias);
        grads[4 * static_cast<std::size_t>(i) + 2] = std::move(bg.gamma);
        grads[4 * static_cast<std::size_t>(i) + 3] = std::move(bg.beta);
        g = std::move(cg.x);
    }
    return grads;
}

std::vector<std::vector<float>*> trainable_param_refs(Model& model) {
    std::vector<std::vector<float>*> refs;
    for (auto& blk : model.blocks) {
        refs.push_back(&blk.conv_w);
        refs.push_back(&blk.conv_b);
        refs.push_back(&blk.bn_gamma);
        refs.push_back(&blk.bn_beta);
    }
    refs.push_back(&model.fc_w);
    refs.push_back(&model.fc_b);
    return refs;
}

TrainReport train(Model& model, const LabeledTileSet& train_set, const LabeledTileSet& val_set,
                  const TrainConfig& cfg, const std::function<void(int, float, float)>& progress) {
    if (train_set.items.empty() || val_set.items.empty())
        throw std::runtime_error("train: empty dataset");
    if (cfg.epochs < 1 || cfg.batch_size < 1)
        throw std::invalid_argument("train: epochs and batch_size must be >= 1");
    for (const auto& item : train_set.items)
        if (item.label < 0 || item.label >= model.arch.num_classes)
            throw std::invalid_argument("train: label out of range for the architecture");

    const auto t0 = std::chrono::steady_clock::now();

    auto params = trainable_param_refs(model);
    std::vector<std::vector<float>> velocity(params.size());
    for (std::size_t i = 0; i < params.size(); ++i)
        velocity[i].assign(params[i]->size(), 0.0f);

    std::vector<std::size_t> order(train_set.items.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed);

    TrainReport report;
    const std::size_t n = train_set.items.size();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle_each_epoch) std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            std::vector<const FloatImage*> tiles;
            std::vector<int> labels;
            tiles.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                tiles.push_back(&train_set.items[order[i]].tile);
                labels.push_back(train_set.items[order[i]].label);
            }

            model.mode = Model::Mode::train;
            ForwardCache cache;
            Matrix<float> logits = forward_train(model, batch_from_tiles(tiles, model.arch), cache);
            SoftmaxXentResult<float> sx = softmax_xent(logits, labels);
            if (!std::isfinite(sx.loss))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch + 1) + "; training diverged");

            auto grads = backward(model, cache, sx.grad_logits);
            for (std::size_t p = 0; p < params.size(); ++p) {
                auto& param = *params[p];
                auto& vel = velocity[p];
                const auto& g = grads[p];
                for (std::size_t j = 0; j < param.size(); ++j) {
                    vel[j] = cfg.momentum * vel[j] - cfg.learning_rate * g[j];
                    param[j] += vel[j];
                }
            }

            loss_sum += static_cast<double>(sx.loss) * static_cast<double>(stop - start);
            for (int b = 0; b < sx.probs.rows; ++b)
                if (argmax_row(sx.probs, b) == labels[static_cast<std::size_t>(b)]) ++correct;
        }

        report.epoch_loss.push_back(static_cast<float>(loss_sum / static_cast<double>(n)));
        report.epoch_accuracy.push_back(static_cast<float>(correct) / static_cast<float>(n));
        if (progress)
            progress(epoch + 1, report.epoch_loss.back(), report.epoch_accuracy.back());
    }

    model.mode = Model::Mode::infer;
    report.val_accuracy = static_cast<float>(evaluate(model, val_set));
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

double evaluate(const Model& model, const LabeledTileSet& ds) {
    if (ds.items.empty())
        throw std::runtime_error("evaluate: empty dataset");

    constexpr std::size_t kChunk = 64;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < ds.items.size(); start += kChunk) {
        const std::size_t stop = std::min(ds.items.size(), start + kChunk);
        std::vector<const FloatImage*> tiles;
        tiles.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i) tiles.push_back(&ds.items[i].tile);
        Matrix<float> probs = forward_infer(model, batch_from_tiles(tiles, model.arch));
        for (int b = 0; b < probs.rows; ++b)
            if (argmax_row(probs, b) == ds.items[start + static_cast<std::size_t>(b)].label)
                ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.items.size());
}

} // namespace pcnn
