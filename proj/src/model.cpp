#include "crg/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "crg/errors.hpp"

namespace crg::model {

int ModelParams::in_channels() const {
    return backbone.empty() ? 0 : static_cast<int>(backbone.front().weight.shape[2]);
}

int ModelParams::width() const { return static_cast<int>(head_b.weight.shape[2]); }

std::vector<ad::Tensor*> ModelParams::tensors() {
    std::vector<ad::Tensor*> out;
    for (auto& layer : backbone) {
        out.push_back(&layer.weight);
        out.push_back(&layer.bias);
    }
    for (auto* head : {&head_b, &head_e}) {
        out.push_back(&head->weight);
        out.push_back(&head->bias);
    }
    return out;
}

std::vector<const ad::Tensor*> ModelParams::tensors() const {
    auto mut = const_cast<ModelParams*>(this)->tensors();
    return {mut.begin(), mut.end()};
}

std::vector<std::string> ModelParams::tensor_names() const {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < backbone.size(); ++i) {
        names.push_back("backbone." + std::to_string(i) + ".weight");
        names.push_back("backbone." + std::to_string(i) + ".bias");
    }
    for (const char* head : {"head_b", "head_e"}) {
        names.push_back(std::string(head) + ".weight");
        names.push_back(std::string(head) + ".bias");
    }
    return names;
}

std::vector<bool> ModelParams::is_weight() const {
    std::vector<bool> out;
    for (std::size_t i = 0; i < backbone.size() + 2; ++i) {
        out.push_back(true);
        out.push_back(false);
    }
    return out;
}

namespace {

ConvLayer gaussian_layer(std::mt19937_64& rng, std::size_t ks, std::size_t cin, std::size_t cout) {
    ConvLayer layer{ad::Tensor({ks, ks, cin, cout}), ad::Tensor({cout})};
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(ks * ks * cin)));
    for (double& v : layer.weight.values) {
        v = normal(rng);
    }
    return layer;
}

}  // namespace

ModelParams init_params(std::uint64_t seed, int k, int width, int depth, int in_channels) {
    if (k < 2 || depth < 1 || width < 1 || in_channels < 1) {
        throw ConfigError("init_params needs k >= 2, depth >= 1, width >= 1");
    }
    std::mt19937_64 rng(seed);
    ModelParams params;
    auto cin = static_cast<std::size_t>(in_channels);
    for (int i = 0; i < depth; ++i) {
        params.backbone.push_back(gaussian_layer(rng, 3, cin, static_cast<std::size_t>(width)));
        cin = static_cast<std::size_t>(width);
    }
    params.head_b = gaussian_layer(rng, 1, cin, static_cast<std::size_t>(k));
    params.head_e = gaussian_layer(rng, 1, cin, static_cast<std::size_t>(k));
    return params;
}

ModelParams from_tensors(std::vector<ad::Tensor> tensors) {
    if (tensors.size() < 6 || tensors.size() % 2 != 0) {
        throw FormatError("parameter list has " + std::to_string(tensors.size()) + " tensors");
    }
    ModelParams params;
    const std::size_t layers = tensors.size() / 2 - 2;
    for (std::size_t i = 0; i < layers; ++i) {
        params.backbone.push_back({std::move(tensors[2 * i]), std::move(tensors[2 * i + 1])});
    }
    params.head_b = {std::move(tensors[2 * layers]), std::move(tensors[2 * layers + 1])};
    params.head_e = {std::move(tensors[2 * layers + 2]), std::move(tensors[2 * layers + 3])};

    std::size_t cin = params.backbone.front().weight.shape.size() == 4 ? params.backbone.front().weight.shape[2] : 0;
    auto check = [&cin](const ConvLayer& layer, std::size_t ks) {
        const auto& s = layer.weight.shape;
        if (s.size() != 4 || s[0] != ks || s[1] != ks || s[2] != cin || layer.bias.shape.size() != 1 ||
            layer.bias.shape[0] != s[3]) {
            throw FormatError("inconsistent layer shapes " + ad::shape_string(s));
        }
    };
    for (const auto& layer : params.backbone) {
        check(layer, 3);
        cin = layer.weight.shape[3];
    }
    check(params.head_b, 1);
    check(params.head_e, 1);
    if (params.head_b.weight.shape != params.head_e.weight.shape) {
        throw FormatError("head shapes differ");
    }
    return params;
}

ad::Tensor to_tensor(const grid::Raster& raster) {
    return ad::Tensor({static_cast<std::size_t>(raster.height()), static_cast<std::size_t>(raster.width()),
                       static_cast<std::size_t>(raster.channels())},
                      raster.data());
}

grid::Raster to_raster(const ad::Tensor& tensor) {
    if (tensor.shape.size() != 3) {
        throw ShapeError("expected an [H, W, C] tensor, got " + ad::shape_string(tensor.shape));
    }
    return grid::Raster(static_cast<int>(tensor.shape[0]), static_cast<int>(tensor.shape[1]),
                        static_cast<int>(tensor.shape[2]), tensor.values);
}

Logits forward(const ModelParams& params, const grid::Raster& patch, ad::Tape& tape) {
    if (patch.channels() != params.in_channels()) {
        throw ShapeError("patch has " + std::to_string(patch.channels()) + " channels, model expects " +
                         std::to_string(params.in_channels()));
    }
    auto bind = [&tape](const ConvLayer& layer) {
        return std::pair{tape.parameter(layer.weight), tape.parameter(layer.bias)};
    };
    ad::Var h = tape.constant(to_tensor(patch));
    for (const auto& layer : params.backbone) {
        auto [w, b] = bind(layer);
        h = ad::relu(ad::conv2d(h, w, b));
    }
    auto [wb, bb] = bind(params.head_b);
    auto [we, be] = bind(params.head_e);
    return {ad::conv2d(h, wb, bb), ad::conv2d(h, we, be)};
}

grid::Raster predict_window(const ModelParams& params, const grid::Raster& window) {
    ad::Tape tape;
    auto logits = forward(params, window, tape);
    const auto& pb = ad::softmax(logits.base).value();
    const auto& pe = ad::softmax(logits.expanded).value();
    ad::Tensor avg(pb.shape);
    for (std::size_t i = 0; i < avg.size(); ++i) {
        avg.values[i] = 0.5 * (pb.values[i] + pe.values[i]);
    }
    return to_raster(avg);
}

grid::Raster predict(const ModelParams& params, const grid::Raster& image, int patch, int stride) {
    const int size = std::min({patch, image.height(), image.width()});
    std::vector<std::pair<grid::PatchSpec, grid::Raster>> tiles;
    for (const auto& spec : grid::tile_positions(image.height(), image.width(), size, stride)) {
        tiles.emplace_back(spec, predict_window(params, grid::crop(image, spec)));
    }
    return grid::stitch(tiles, image.height(), image.width(), params.classes());
}

}  // namespace crg::model
