#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crg/autodiff.hpp"
#include "crg/grid.hpp"

namespace crg::model {

struct ConvLayer {
    ad::Tensor weight;  // [K, K, Cin, Cout]
    ad::Tensor bias;    // [Cout]

    bool operator==(const ConvLayer&) const = default;
};

// Shared stride-1 3x3 conv/ReLU backbone feeding two 1x1 heads: the base
// classifier (trained on the sparse points) and the expanded classifier
// (trained on the region-grown labels).
struct ModelParams {
    std::vector<ConvLayer> backbone;
    ConvLayer head_b;
    ConvLayer head_e;

    int classes() const { return static_cast<int>(head_b.bias.size()); }
    int in_channels() const;
    int width() const;

    // Canonical tensor order shared by forward(), gradients and checkpoints.
    std::vector<ad::Tensor*> tensors();
    std::vector<const ad::Tensor*> tensors() const;
    std::vector<std::string> tensor_names() const;
    // Biases are exempt from weight decay.
    std::vector<bool> is_weight() const;

    bool operator==(const ModelParams&) const = default;
};

using Gradients = std::vector<ad::Tensor>;

ModelParams init_params(std::uint64_t seed, int k, int width, int depth, int in_channels = 3);

// Rebuilds the layer structure from tensors given in canonical order.
ModelParams from_tensors(std::vector<ad::Tensor> tensors);

struct Logits {
    ad::Var base;      // [H, W, k]
    ad::Var expanded;  // [H, W, k]
};

// Registers every parameter on `tape` in canonical order, so that
// tape.backward(loss) yields Gradients aligned with params.tensors().
Logits forward(const ModelParams& params, const grid::Raster& patch, ad::Tape& tape);

// Averaged two-head probabilities (softmax(f_b) + softmax(f_e)) / 2 for a
// single window, no tiling.
grid::Raster predict_window(const ModelParams& params, const grid::Raster& window);

// Sliding-window prediction over a whole image; tiles are fused by
// grid::stitch. A patch larger than the image is clamped to its short side.
grid::Raster predict(const ModelParams& params, const grid::Raster& image, int patch, int stride);

ad::Tensor to_tensor(const grid::Raster& raster);
grid::Raster to_raster(const ad::Tensor& tensor);

}  // namespace crg::model
