#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pcnn/dataset.hpp"
#include "pcnn/layers.hpp"
#include "pcnn/tensor.hpp"

namespace pcnn {

/// Network architecture: a stack of conv(3x3, same) -> batchnorm -> relu blocks,
/// each optionally followed by 2x2 max pooling, then a fully-connected layer to
/// num_classes and softmax.
struct ArchSpec {
    int input_h = 0;
    int input_w = 0;
    int input_c = 0;

    struct Block {
        int filters = 0;
        bool pool = false;
    };
    std::vector<Block> blocks;
    int num_classes = 2;

    /// 8/16/32 filters with pools after the first two blocks.
    static ArchSpec make_default(int input_h, int input_w, int input_c, int num_classes);

    /// Spatial size after the pools of the first `upto` blocks.
    std::pair<int, int> spatial_after(int upto) const;

    /// Input size of the fully-connected layer.
    int flattened_size() const;

    /// Throws if any pooled dimension reaches 0, K < 2, or a block is empty.
    void validate() const;

    bool operator==(const ArchSpec&) const = default;
};
bool operator==(const ArchSpec::Block& a, const ArchSpec::Block& b);

/// Layer stack with parameters and batch-norm running statistics.
struct Model {
    enum class Mode { train, infer };

    ArchSpec arch;

    struct ConvBlock {
        std::vector<float> conv_w; // [filters][in_c][3][3]
        std::vector<float> conv_b; // [filters]
        std::vector<float> bn_gamma, bn_beta;
        std::vector<float> bn_mean, bn_var; // running statistics
    };
    std::vector<ConvBlock> blocks;
    std::vector<float> fc_w; // [K][flattened]
    std::vector<float> fc_b; // [K]
    Mode mode = Mode::infer;
};

struct TrainConfig {
    int epochs = 30;
    int batch_size = 32;
    float learning_rate = 0.01f;
    float momentum = 0.9f;
    std::uint64_t seed = 0;
    bool shuffle_each_epoch = true;
};

struct TrainReport {
    std::vector<float> epoch_loss;     // mean training loss per epoch
    std::vector<float> epoch_accuracy; // training accuracy per epoch
    float val_accuracy = 0.0f;
    double seconds = 0.0;
};

inline constexpr float kBatchNormEps = 1e-5f;
inline constexpr float kBatchNormStatMomentum = 0.1f;

/// He-normal weights (std sqrt(2/fan_in)), zero biases, identity batch-norm
/// (gamma 1, beta 0, running mean 0, running var 1). Same seed, same model.
Model init_model(const ArchSpec& arch, std::uint64_t seed);

/// Pack tiles into an NCHW batch. Tile dims must match the arch.
Tensor4<float> batch_from_tiles(const std::vector<const FloatImage*>& tiles, const ArchSpec& arch);

/// Intermediates retained by the training forward pass for backward.
struct ForwardCache {
    struct BlockCache {
        Tensor4<float> conv_in;  // activation entering the block's conv
        BatchNormCache<float> bn;
        Tensor4<float> pre_relu; // batch-norm output
        MaxPoolCache<float> pool;
    };
    std::vector<BlockCache> blocks;
    Matrix<float> fc_in;
};

/// Inference forward pass: running statistics, no state mutated.
/// Returns per-sample class probabilities, row-major (n x K).
Matrix<float> forward_infer(const Model& model, const Tensor4<float>& batch);

/// Training forward pass: batch statistics, running stats updated. Returns logits.
Matrix<float> forward_train(Model& model, const Tensor4<float>& batch, ForwardCache& cache);

/// Gradients for every trainable parameter, ordered as trainable_param_refs.
std::vector<std::vector<float>> backward(const Model& model, const ForwardCache& cache,
                                         const Matrix<float>& grad_logits);

/// Trainable parameters in declared order: per block conv_w, conv_b, bn_gamma,
/// bn_beta; then fc_w, fc_b. Running statistics are not trainable.
std::vector<std::vector<float>*> trainable_param_refs(Model& model);

/// SGD with momentum over minibatches: v <- momentum*v - lr*g; p <- p + v.
/// Mutates the model in place and leaves it in infer mode; deterministic per seed.
/// progress, when set, is called once per epoch with (epoch, loss, accuracy).
TrainReport train(Model& model, const LabeledTileSet& train_set, const LabeledTileSet& val_set,
                  const TrainConfig& cfg,
                  const std::function<void(int, float, float)>& progress = nullptr);

/// Fraction of tiles whose argmax probability equals the label.
/// Argmax ties break toward the lower class index.
double evaluate(const Model& model, const LabeledTileSet& ds);

} // namespace pcnn
