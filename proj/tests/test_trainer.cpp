#include <doctest.h>

#include <cmath>
#include <limits>

#include "crg/errors.hpp"
#include "crg/losses.hpp"
#include "crg/regiongrow.hpp"
#include "crg/synthdata.hpp"
#include "crg/trainer.hpp"

using namespace crg;
using namespace crg::trainer;

namespace {

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.base_lr = 0.05;
    cfg.max_iter = 6;
    cfg.finetune_iter = 4;
    cfg.patch = 16;
    cfg.batch = 2;
    cfg.stride = 8;
    cfg.width = 6;
    cfg.depth = 2;
    cfg.seed = 3;
    return cfg;
}

std::vector<Sample> small_dataset(int n = 2, int size = 24) {
    std::vector<Sample> data;
    for (int i = 0; i < n; ++i) {
        synthdata::SceneSpec spec{size, size, 4, 8, 0.2, static_cast<std::uint64_t>(i + 1), false};
        const auto scene = synthdata::gen_scene(spec);
        data.push_back({scene.image, synthdata::sample_points(scene.gt, 5, 100 + i)});
    }
    return data;
}

// The unused head sees no gradient, only weight decay.
void check_decay_only(const model::ConvLayer& after, const model::ConvLayer& before, const TrainConfig& cfg) {
    CHECK(after.bias == before.bias);
    for (std::size_t i = 0; i < before.weight.size(); ++i) {
        CHECK(after.weight.values[i] == doctest::Approx(before.weight.values[i] * (1.0 - cfg.base_lr * cfg.weight_decay)));
    }
}

std::vector<BatchElement> sample_batch(const std::vector<Sample>& data, int n, int patch, std::uint64_t seed) {
    PatchSampler sampler(data, patch, seed);
    std::vector<BatchElement> batch;
    for (int i = 0; i < n; ++i) batch.push_back(sampler.draw());
    return batch;
}

model::Gradients zero_grads(const model::ModelParams& p) {
    model::Gradients g;
    for (const auto* t : p.tensors()) g.emplace_back(t->shape);
    return g;
}

}  // namespace

TEST_CASE("poly_lr") {
    CHECK(poly_lr(0, 100, 1e-3, 0.9) == 1e-3);
    CHECK(poly_lr(100, 100, 1e-3, 0.9) == 0.0);
    CHECK(std::abs(poly_lr(50, 100, 1e-3, 0.9) - 1e-3 * std::pow(0.5, 0.9)) <= 1e-12);
    CHECK(std::abs(poly_lr(50, 100, 1e-3, 0.9) - 5.359e-4) <= 1e-7);
    double prev = poly_lr(0, 100, 1e-3, 0.9);
    for (int i = 1; i <= 100; ++i) {
        const double cur = poly_lr(i, 100, 1e-3, 0.9);
        CHECK(cur < prev);
        prev = cur;
    }
    CHECK_THROWS_AS(poly_lr(101, 100, 1e-3, 0.9), ScheduleError);
    CHECK_THROWS_AS(poly_lr(-1, 100, 1e-3, 0.9), ScheduleError);
    TrainConfig cfg;
    CHECK(poly_lr(0, cfg) == 1e-3);
    CHECK(poly_lr(cfg.max_iter, cfg) == 0.0);
}

TEST_CASE("sgd_step") {
    auto p = model::init_params(1, 2, 2, 1);
    p.backbone[0].bias.values = {0.3, -0.2};
    SUBCASE("lr 0 and zero gradients leave params alone") {
        auto g = zero_grads(p);
        for (auto& t : g) std::fill(t.values.begin(), t.values.end(), 1.0);
        CHECK(sgd_step(p, g, 0.0, 0.1) == p);
        CHECK(sgd_step(p, zero_grads(p), 0.5, 0.0) == p);
    }
    SUBCASE("scalar arithmetic") {
        p.backbone[0].weight.values[0] = 1.0;
        auto g = zero_grads(p);
        g[0].values[0] = 0.5;
        CHECK(sgd_step(p, g, 0.1, 0.0).backbone[0].weight.values[0] == doctest::Approx(0.95));
    }
    SUBCASE("decay skips biases") {
        const auto next = sgd_step(p, zero_grads(p), 1.0, 0.1);
        CHECK(next.backbone[0].bias == p.backbone[0].bias);
        CHECK(next.backbone[0].weight.values[1] == doctest::Approx(0.9 * p.backbone[0].weight.values[1]));
    }
    SUBCASE("non-finite gradients diverge") {
        auto g = zero_grads(p);
        g[2].values[0] = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(sgd_step(p, g, 0.1, 0.0), DivergenceError);
        g[2].values[0] = std::numeric_limits<double>::infinity();
        CHECK_THROWS_AS(sgd_step(p, g, 0.1, 0.0), DivergenceError);
    }
    SUBCASE("mismatched gradients") {
        auto g = zero_grads(p);
        g.pop_back();
        CHECK_THROWS_AS(sgd_step(p, g, 0.1, 0.0), ShapeError);
    }
}

TEST_CASE("config validation") {
    auto bad = [](auto mutate) {
        TrainConfig cfg;
        mutate(cfg);
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    };
    TrainConfig().validate();
    bad([](TrainConfig& c) { c.tau = 0.0; });
    bad([](TrainConfig& c) { c.tau = 1.01; });
    bad([](TrainConfig& c) { c.lambda_con = -1; });
    bad([](TrainConfig& c) { c.base_lr = -1; });
    bad([](TrainConfig& c) { c.power = 0; });
    bad([](TrainConfig& c) { c.patch = 7; });
    bad([](TrainConfig& c) { c.batch = 0; });
    bad([](TrainConfig& c) { c.temperature = 0; });
}

TEST_CASE("train_iteration ablations") {
    const auto data = small_dataset();
    const auto batch = sample_batch(data, 2, 16, 11);
    const auto params = model::init_params(5, 4, 6, 2);
    auto cfg = small_config();

    SUBCASE("baseline is the seg loss alone") {
        cfg.enable_rg = cfg.enable_cr = false;
        const auto r = train_iteration(params, batch, cfg, 0);
        CHECK(r.record.loss_total == r.record.loss_seg);
        CHECK(r.record.loss_exp == 0.0);
        CHECK(r.record.loss_con == 0.0);
        check_decay_only(r.params.head_e, params.head_e, cfg);
        CHECK_FALSE(r.params.head_b == params.head_b);
    }
    SUBCASE("region growing without consistency trains f_b only") {
        cfg.enable_cr = false;
        const auto r = train_iteration(params, batch, cfg, 0);
        CHECK(r.record.loss_exp > 0.0);
        CHECK(r.record.loss_con == 0.0);
        check_decay_only(r.params.head_e, params.head_e, cfg);
        CHECK(r.record.loss_total == doctest::Approx(r.record.loss_seg + r.record.loss_exp));
    }
    SUBCASE("full loss") {
        const auto r = train_iteration(params, batch, cfg, 0);
        CHECK(r.record.loss_total ==
              doctest::Approx(r.record.loss_seg + r.record.loss_exp + r.record.loss_con).epsilon(1e-12));
        CHECK(r.record.n_expanded >= r.record.n_points);
        CHECK(r.record.lr == cfg.base_lr);
    }
    SUBCASE("tau 1 leaves E at the points") {
        cfg.tau = 1.0;
        const auto r = train_iteration(params, batch, cfg, 0);
        CHECK(r.record.n_expanded == r.record.n_points);
    }
    SUBCASE("zero lambda equals dropping the consistency term") {
        cfg.lambda_con = 0.0;
        const auto r = train_iteration(params, batch, cfg, 0);
        model::Gradients sum;
        for (const auto& element : batch) {
            ad::Tape tape;
            const auto logits = model::forward(params, element.patch, tape);
            const auto pb = ad::softmax(logits.base);
            const auto pe = ad::softmax(logits.expanded);
            const auto e = regiongrow::grow(element.points, model::to_raster(pb.value()), {cfg.tau});
            auto g = tape.backward(ad::add(losses::seg_loss(pb, element.points), losses::lovasz_softmax(pe, e)));
            if (sum.empty()) {
                sum = std::move(g);
            } else {
                for (std::size_t t = 0; t < g.size(); ++t) {
                    for (std::size_t i = 0; i < g[t].size(); ++i) sum[t].values[i] += g[t].values[i];
                }
            }
        }
        for (auto& t : sum) {
            for (double& v : t.values) v *= 0.5;
        }
        CHECK(r.params == sgd_step(params, sum, cfg.base_lr, cfg.weight_decay));
    }
    SUBCASE("kl consistency") {
        cfg.consistency = ConsistencyKind::kl;
        cfg.temperature = 0.5;
        const auto r = train_iteration(params, batch, cfg, 0);
        CHECK(r.record.loss_con >= 0.0);
        CHECK(std::isfinite(r.record.loss_total));
    }
    SUBCASE("thread count does not change the result") {
        auto threaded = cfg;
        threaded.threads = 3;
        const auto a = train_iteration(params, batch, cfg, 2);
        const auto b = train_iteration(params, batch, threaded, 2);
        CHECK(a.params == b.params);
        CHECK(a.record == b.record);
    }
    SUBCASE("unlabeled patches are rejected") {
        auto broken = batch;
        broken[1].points = grid::LabelMatrix(16, 16);
        CHECK_THROWS_AS(train_iteration(params, broken, cfg, 0), DatasetError);
    }
}

TEST_CASE("pseudo_labels") {
    auto p = model::init_params(2, 2, 3, 1);
    for (auto* head : {&p.head_b, &p.head_e}) {
        std::fill(head->weight.values.begin(), head->weight.values.end(), 0.0);
    }
    const grid::Raster image(5, 5, 3);
    auto cfg = small_config();
    cfg.k = 2;
    cfg.patch = 8;
    CHECK(pseudo_labels(p, image, cfg) == grid::LabelMatrix(5, 5, std::vector<int>(25, 1)));
    p.head_b.bias.values = {std::log(0.9), std::log(0.1)};
    p.head_e.bias.values = {std::log(0.2), std::log(0.8)};
    CHECK(pseudo_labels(p, image, cfg) == grid::LabelMatrix(5, 5, std::vector<int>(25, 1)));
    p.head_b.bias.values = {-50.0, 50.0};
    p.head_e.bias.values = {-50.0, 50.0};
    CHECK(pseudo_labels(p, image, cfg) == grid::LabelMatrix(5, 5, std::vector<int>(25, 2)));
}

TEST_CASE("patch sampler") {
    const auto data = small_dataset();
    PatchSampler a(data, 16, 4), b(data, 16, 4);
    for (int i = 0; i < 20; ++i) {
        const auto x = a.draw();
        const auto y = b.draw();
        CHECK(x.patch == y.patch);
        CHECK(x.points == y.points);
        CHECK(x.points.labeled_count() > 0);
        CHECK(x.patch.height() == 16);
    }
    std::vector<Sample> empty{{data[0].image, grid::LabelMatrix(24, 24)}};
    PatchSampler c(empty, 16, 1);
    CHECK_THROWS_AS(c.draw(), DatasetError);
    CHECK_THROWS_AS(PatchSampler(data, 32, 1), DatasetError);
}

TEST_CASE("train and finetune") {
    const auto data = small_dataset();
    auto cfg = small_config();
    SUBCASE("deterministic with full logs") {
        const auto a = train(cfg, data);
        const auto b = train(cfg, data);
        CHECK(a.params == b.params);
        CHECK(a.log == b.log);
        REQUIRE(a.log.size() == 10);
        CHECK(a.log[5].phase == Phase::pretrain);
        CHECK(a.log[6].phase == Phase::finetune);
        CHECK(a.log[6].iter == 0);
        CHECK(a.log[6].lr == cfg.base_lr);
        for (const auto& r : a.log) CHECK(r.n_expanded >= r.n_points);
        // Pseudo labels are dense.
        CHECK(a.log[7].n_expanded == static_cast<std::size_t>(cfg.batch * cfg.patch * cfg.patch));
        cfg.seed = 4;
        CHECK_FALSE(train(cfg, data).params == a.params);
    }
    SUBCASE("no iterations returns the initial params") {
        cfg.max_iter = 0;
        cfg.enable_st = false;
        const auto r = train(cfg, data);
        CHECK(r.params == model::init_params(cfg.seed, cfg.k, cfg.width, cfg.depth));
        CHECK(r.log.empty());
    }
    SUBCASE("self-training off skips finetuning") {
        cfg.enable_st = false;
        const auto r = train(cfg, data);
        CHECK(r.log.size() == 6);
    }
    SUBCASE("finetune with zero iterations is a no-op") {
        cfg.finetune_iter = 0;
        const auto p = model::init_params(1, 4, 6, 2);
        CHECK(finetune(p, data, cfg) == p);
    }
    SUBCASE("without the expanded head the prediction is f_b") {
        cfg.enable_cr = false;
        const auto r = train(cfg, data);
        CHECK(r.params.head_e == r.params.head_b);
    }
    SUBCASE("sink sees every record") {
        std::vector<TrainLogRecord> seen;
        const auto r = train(cfg, data, [&](const TrainLogRecord& rec) { seen.push_back(rec); });
        CHECK(seen == r.log);
    }
    SUBCASE("dataset errors") {
        CHECK_THROWS_AS(train(cfg, std::vector<Sample>{}), DatasetError);
        auto bad = data;
        bad[0].points.at(0, 0) = 7;
        CHECK_THROWS_AS(train(cfg, bad), DatasetError);
    }
}

TEST_CASE("losses stay finite for 200 iterations across seeds") {
    std::vector<Sample> data;
    for (int i = 0; i < 4; ++i) {
        synthdata::SceneSpec spec;
        spec.seed = 50 + i;
        const auto scene = synthdata::gen_scene(spec);
        data.push_back({scene.image, synthdata::sample_points(scene.gt, 5, 60 + i)});
    }
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto cfg = small_config();
        cfg.seed = seed;
        cfg.max_iter = 200;
        cfg.patch = 32;
        cfg.enable_st = false;
        const auto r = train(cfg, data);
        for (const auto& rec : r.log) {
            REQUIRE(std::isfinite(rec.loss_total));
            REQUIRE(std::isfinite(rec.loss_seg));
            REQUIRE(std::isfinite(rec.loss_exp));
            REQUIRE(std::isfinite(rec.loss_con));
        }
    }
}
