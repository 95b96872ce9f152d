#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "crg/grid.hpp"
#include "crg/model.hpp"

namespace crg::trainer {

enum class ConsistencyKind { mse, kl };

struct TrainConfig {
    double tau = 0.95;
    double lambda_con = 1.0;
    double base_lr = 1e-3;
    double weight_decay = 5e-5;
    double power = 0.9;
    int max_iter = 5000;
    int finetune_iter = 5000;
    int patch = 128;
    int batch = 64;
    int stride = 40;
    int k = 4;
    std::uint64_t seed = 0;
    ConsistencyKind consistency = ConsistencyKind::mse;
    double temperature = 1.0;
    bool enable_rg = true;
    bool enable_cr = true;
    bool enable_st = true;
    // Backbone geometry.
    int width = 32;
    int depth = 4;
    // Worker threads per iteration; results do not depend on it.
    int threads = 1;

    void validate() const;
};

enum class Phase { pretrain, finetune };

struct TrainLogRecord {
    Phase phase = Phase::pretrain;
    int iter = 0;
    double lr = 0.0;
    double loss_seg = 0.0;
    double loss_exp = 0.0;
    double loss_con = 0.0;
    double loss_total = 0.0;
    std::size_t n_expanded = 0;
    std::size_t n_points = 0;

    bool operator==(const TrainLogRecord&) const = default;
};

// One training image with its sparse point annotations.
struct Sample {
    grid::Raster image;
    grid::LabelMatrix points;
};

// A cropped training patch. `pseudo` carries the pseudo-label crop during
// self-training and replaces the region-grown labels.
struct BatchElement {
    grid::Raster patch;
    grid::LabelMatrix points;
    std::optional<grid::LabelMatrix> pseudo;
};

double poly_lr(int iter, int max_iter, double base_lr, double power);
double poly_lr(int iter, const TrainConfig& cfg);

// p <- p - lr * (g + weight_decay * p); biases are not decayed.
model::ModelParams sgd_step(const model::ModelParams& params, const model::Gradients& grads, double lr,
                            double weight_decay);

// Loss terms and gradient for a single batch element.
struct ElementResult {
    model::Gradients grads;
    double loss_seg = 0.0;
    double loss_exp = 0.0;
    double loss_con = 0.0;
    double loss_total = 0.0;
    std::size_t n_expanded = 0;
    std::size_t n_points = 0;
};

ElementResult element_gradients(const model::ModelParams& params, const BatchElement& element,
                                const TrainConfig& cfg);

struct IterationResult {
    model::ModelParams params;
    TrainLogRecord record;
};

// Forward both heads, grow E, assemble the loss, and take one SGD step with
// the batch-averaged gradient.
IterationResult train_iteration(const model::ModelParams& params, std::span<const BatchElement> batch,
                                const TrainConfig& cfg, int iter, Phase phase = Phase::pretrain);

// Argmax of the averaged two-head prediction over the whole image.
grid::LabelMatrix pseudo_labels(const model::ModelParams& params, const grid::Raster& image,
                                const TrainConfig& cfg);

// Draws random square crops that contain at least one annotated point.
class PatchSampler {
public:
    static constexpr int kMaxDraws = 1000;

    PatchSampler(std::span<const Sample> dataset, int patch, std::uint64_t seed);

    BatchElement draw(std::span<const grid::LabelMatrix> pseudo = {});

private:
    std::span<const Sample> dataset_;
    int patch_;
    std::mt19937_64 rng_;
};

using LogSink = std::function<void(const TrainLogRecord&)>;

// Self-training: pseudo labels are computed once per image, then
// finetune_iter iterations run with a fresh poly schedule. Region growing is
// off; the seg loss still uses the original points.
model::ModelParams finetune(model::ModelParams params, std::span<const Sample> dataset, const TrainConfig& cfg,
                            std::vector<TrainLogRecord>* log = nullptr, const LogSink& sink = {});

struct TrainResult {
    model::ModelParams params;
    std::vector<TrainLogRecord> log;
};

TrainResult train(const TrainConfig& cfg, std::span<const Sample> dataset, const LogSink& sink = {});

std::string to_string(Phase phase);
std::string to_string(ConsistencyKind kind);

}  // namespace crg::trainer
