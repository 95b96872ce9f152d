#include "crg/trainer.hpp"

#include <cmath>
#include <future>
#include <string>

#include "crg/errors.hpp"
#include "crg/losses.hpp"
#include "crg/regiongrow.hpp"

namespace crg::trainer {

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (!(tau > 0.0 && tau <= 1.0)) fail("tau must lie in (0, 1]");
    if (!(lambda_con >= 0.0)) fail("lambda_con must be >= 0");
    if (!(base_lr >= 0.0)) fail("base_lr must be >= 0");
    if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
    if (!(power > 0.0)) fail("power must be > 0");
    if (max_iter < 0 || finetune_iter < 0) fail("iteration counts must be >= 0");
    if (patch < 8) fail("patch must be >= 8");
    if (batch < 1) fail("batch must be >= 1");
    if (stride < 1) fail("stride must be >= 1");
    if (k < 2 || k > 255) fail("k must lie in [2, 255]");
    if (!(temperature > 0.0)) fail("temperature must be > 0");
    if (width < 1 || depth < 1) fail("width and depth must be >= 1");
    if (threads < 1) fail("threads must be >= 1");
}

double poly_lr(int iter, int max_iter, double base_lr, double power) {
    if (iter < 0 || iter > max_iter) {
        throw ScheduleError("iteration " + std::to_string(iter) + " outside [0, " + std::to_string(max_iter) + "]");
    }
    if (iter == max_iter) {
        return 0.0;
    }
    return base_lr * std::pow(1.0 - static_cast<double>(iter) / max_iter, power);
}

double poly_lr(int iter, const TrainConfig& cfg) { return poly_lr(iter, cfg.max_iter, cfg.base_lr, cfg.power); }

model::ModelParams sgd_step(const model::ModelParams& params, const model::Gradients& grads, double lr,
                            double weight_decay) {
    model::ModelParams next = params;
    auto tensors = next.tensors();
    const auto decayed = next.is_weight();
    if (grads.size() != tensors.size()) {
        throw ShapeError("gradient list does not match the parameter list");
    }
    for (std::size_t t = 0; t < tensors.size(); ++t) {
        auto& p = tensors[t]->values;
        const auto& g = grads[t].values;
        if (g.size() != p.size()) {
            throw ShapeError("gradient " + std::to_string(t) + " has the wrong size");
        }
        const double wd = decayed[t] ? weight_decay : 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (!std::isfinite(g[i])) {
                throw DivergenceError("non-finite gradient in tensor " + std::to_string(t));
            }
            p[i] -= lr * (g[i] + wd * p[i]);
            if (!std::isfinite(p[i])) {
                throw DivergenceError("non-finite parameter after update in tensor " + std::to_string(t));
            }
        }
    }
    return next;
}

ElementResult element_gradients(const model::ModelParams& params, const BatchElement& element,
                                const TrainConfig& cfg) {
    ad::Tape tape;
    const auto logits = model::forward(params, element.patch, tape);
    const auto base = ad::softmax(logits.base);

    ElementResult out;
    out.n_points = element.points.labeled_count();
    const auto seg = losses::seg_loss(base, element.points);

    grid::LabelMatrix expanded;
    if (element.pseudo) {
        expanded = *element.pseudo;
    } else if (cfg.enable_rg) {
        expanded = regiongrow::grow(regiongrow::init_expanded(element.points), model::to_raster(base.value()),
                                    {cfg.tau});
    } else {
        expanded = element.points;
    }

    ad::Var total = seg;
    if (cfg.enable_cr) {
        const auto exp_probs = ad::softmax(logits.expanded);
        const auto exp = losses::lovasz_softmax(exp_probs, expanded);
        const auto con = cfg.consistency == ConsistencyKind::kl
                             ? losses::kl_consistency_loss(base, exp_probs, cfg.temperature)
                             : losses::consistency_loss(base, exp_probs);
        total = losses::full_loss(seg, exp, con, {cfg.lambda_con});
        out.loss_exp = exp.value().item();
        out.loss_con = con.value().item();
        out.n_expanded = expanded.labeled_count();
    } else if (cfg.enable_rg || element.pseudo) {
        // Without the expanded head the expansion loss supervises f_b directly.
        const auto exp = losses::lovasz_softmax(base, expanded);
        total = ad::add(seg, exp);
        out.loss_exp = exp.value().item();
        out.n_expanded = expanded.labeled_count();
    } else {
        out.n_expanded = out.n_points;
    }
    out.loss_seg = seg.value().item();
    out.loss_total = total.value().item();
    out.grads = tape.backward(total);
    return out;
}

IterationResult train_iteration(const model::ModelParams& params, std::span<const BatchElement> batch,
                                const TrainConfig& cfg, int iter, Phase phase) {
    if (batch.empty()) {
        throw ContractError("empty batch");
    }
    for (const auto& element : batch) {
        if (element.points.labeled_count() == 0) {
            throw DatasetError("batch element without annotated points");
        }
    }
    const int horizon = phase == Phase::pretrain ? cfg.max_iter : cfg.finetune_iter;
    const double lr = poly_lr(iter, horizon, cfg.base_lr, cfg.power);

    std::vector<ElementResult> results(batch.size());
    if (cfg.threads > 1 && batch.size() > 1) {
        std::vector<std::future<ElementResult>> pending;
        for (const auto& element : batch) {
            pending.push_back(std::async(std::launch::async,
                                         [&params, &element, &cfg] { return element_gradients(params, element, cfg); }));
        }
        for (std::size_t i = 0; i < pending.size(); ++i) {
            results[i] = pending[i].get();
        }
    } else {
        for (std::size_t i = 0; i < batch.size(); ++i) {
            results[i] = element_gradients(params, batch[i], cfg);
        }
    }

    // Fixed-order merge keeps the update bitwise reproducible.
    const double inv = 1.0 / static_cast<double>(batch.size());
    model::Gradients grads = std::move(results.front().grads);
    for (std::size_t i = 1; i < results.size(); ++i) {
        for (std::size_t t = 0; t < grads.size(); ++t) {
            auto& dst = grads[t].values;
            const auto& src = results[i].grads[t].values;
            for (std::size_t j = 0; j < dst.size(); ++j) {
                dst[j] += src[j];
            }
        }
    }
    for (auto& g : grads) {
        for (double& v : g.values) {
            v *= inv;
        }
    }

    TrainLogRecord record;
    record.phase = phase;
    record.iter = iter;
    record.lr = lr;
    for (const auto& r : results) {
        record.loss_seg += r.loss_seg * inv;
        record.loss_exp += r.loss_exp * inv;
        record.loss_con += r.loss_con * inv;
        record.loss_total += r.loss_total * inv;
        record.n_expanded += r.n_expanded;
        record.n_points += r.n_points;
    }
    if (!std::isfinite(record.loss_total)) {
        throw DivergenceError("non-finite loss at iteration " + std::to_string(iter));
    }
    return {sgd_step(params, grads, lr, cfg.weight_decay), record};
}

grid::LabelMatrix pseudo_labels(const model::ModelParams& params, const grid::Raster& image,
                                const TrainConfig& cfg) {
    return grid::argmax_labels(model::predict(params, image, cfg.patch, cfg.stride));
}

PatchSampler::PatchSampler(std::span<const Sample> dataset, int patch, std::uint64_t seed)
    : dataset_(dataset), patch_(patch), rng_(seed) {
    if (dataset_.empty()) {
        throw DatasetError("empty dataset");
    }
    for (const auto& s : dataset_) {
        if (s.image.height() < patch || s.image.width() < patch) {
            throw DatasetError("image smaller than the training patch");
        }
        if (!s.points.same_geometry(s.image)) {
            throw ShapeError("point annotations do not match their image");
        }
    }
}

BatchElement PatchSampler::draw(std::span<const grid::LabelMatrix> pseudo) {
    std::uniform_int_distribution<std::size_t> pick(0, dataset_.size() - 1);
    for (int attempt = 0; attempt < kMaxDraws; ++attempt) {
        const std::size_t idx = pick(rng_);
        const auto& sample = dataset_[idx];
        std::uniform_int_distribution<int> row(0, sample.image.height() - patch_);
        std::uniform_int_distribution<int> col(0, sample.image.width() - patch_);
        const grid::PatchSpec spec{row(rng_), col(rng_), patch_};
        auto points = grid::crop(sample.points, spec);
        if (points.labeled_count() == 0) {
            continue;
        }
        BatchElement element{grid::crop(sample.image, spec), std::move(points), std::nullopt};
        if (!pseudo.empty()) {
            element.pseudo = grid::crop(pseudo[idx], spec);
        }
        return element;
    }
    throw DatasetError("no patch with annotated points found in " + std::to_string(kMaxDraws) + " draws");
}

namespace {

// Seeds for the two sampling streams, derived from cfg.seed.
constexpr std::uint64_t kPretrainStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kFinetuneStream = 0xc2b2ae3d27d4eb4fULL;

// Without the expanded classifier only f_b is trained; copying it into f_e
// makes the averaged two-head prediction equal to p_b.
void tie_unused_head(model::ModelParams& params, const TrainConfig& cfg) {
    if (!cfg.enable_cr) {
        params.head_e = params.head_b;
    }
}

void emit(const TrainLogRecord& record, std::vector<TrainLogRecord>* log, const LogSink& sink) {
    if (log) {
        log->push_back(record);
    }
    if (sink) {
        sink(record);
    }
}

void validate_dataset(std::span<const Sample> dataset, const TrainConfig& cfg) {
    if (dataset.empty()) {
        throw DatasetError("empty dataset");
    }
    for (const auto& s : dataset) {
        if (s.image.channels() != dataset.front().image.channels()) {
            throw DatasetError("images have differing channel counts");
        }
        if (s.points.max_label() > cfg.k) {
            throw DatasetError("point label exceeds k = " + std::to_string(cfg.k));
        }
    }
}

}  // namespace

model::ModelParams finetune(model::ModelParams params, std::span<const Sample> dataset, const TrainConfig& cfg,
                            std::vector<TrainLogRecord>* log, const LogSink& sink) {
    cfg.validate();
    if (cfg.finetune_iter == 0) {
        return params;
    }
    validate_dataset(dataset, cfg);
    std::vector<grid::LabelMatrix> pseudo;
    pseudo.reserve(dataset.size());
    for (const auto& s : dataset) {
        pseudo.push_back(pseudo_labels(params, s.image, cfg));
    }
    PatchSampler sampler(dataset, cfg.patch, cfg.seed ^ kFinetuneStream);
    std::vector<BatchElement> batch(static_cast<std::size_t>(cfg.batch));
    for (int iter = 0; iter < cfg.finetune_iter; ++iter) {
        for (auto& element : batch) {
            element = sampler.draw(pseudo);
        }
        auto result = train_iteration(params, batch, cfg, iter, Phase::finetune);
        params = std::move(result.params);
        emit(result.record, log, sink);
    }
    tie_unused_head(params, cfg);
    return params;
}

TrainResult train(const TrainConfig& cfg, std::span<const Sample> dataset, const LogSink& sink) {
    cfg.validate();
    validate_dataset(dataset, cfg);
    TrainResult result{model::init_params(cfg.seed, cfg.k, cfg.width, cfg.depth, dataset.front().image.channels()),
                       {}};
    if (cfg.max_iter > 0) {
        PatchSampler sampler(dataset, cfg.patch, cfg.seed ^ kPretrainStream);
        std::vector<BatchElement> batch(static_cast<std::size_t>(cfg.batch));
        for (int iter = 0; iter < cfg.max_iter; ++iter) {
            for (auto& element : batch) {
                element = sampler.draw();
            }
            auto step = train_iteration(result.params, batch, cfg, iter, Phase::pretrain);
            result.params = std::move(step.params);
            emit(step.record, &result.log, sink);
        }
        tie_unused_head(result.params, cfg);
    }
    if (cfg.enable_st) {
        result.params = finetune(std::move(result.params), dataset, cfg, &result.log, sink);
    }
    return result;
}

std::string to_string(Phase phase) { return phase == Phase::pretrain ? "pretrain" : "finetune"; }

std::string to_string(ConsistencyKind kind) { return kind == ConsistencyKind::kl ? "kl" : "mse"; }

}  // namespace crg::trainer
