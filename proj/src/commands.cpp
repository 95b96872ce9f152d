#include "crg/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "crg/errors.hpp"
#include "crg/io.hpp"
#include "crg/model.hpp"
#include "crg/regiongrow.hpp"

namespace crg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
    if (!obj.is_object()) {
        throw ConfigError(where + ": expected a JSON object");
    }
    for (const auto& [key, value] : obj.items()) {
        if (!known.contains(key)) {
            throw ConfigError(where + ": unknown key '" + key + "'");
        }
    }
}

template <typename T>
void read_field(const json& obj, const char* key, T& dst, const std::string& where) {
    if (!obj.contains(key)) {
        return;
    }
    try {
        dst = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

}  // namespace

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

GenConfig parse_gen_config(const json& j) {
    reject_unknown(j, {"scene", "count", "points_per_class"}, "gen config");
    GenConfig cfg;
    read_field(j, "count", cfg.count, "gen config");
    read_field(j, "points_per_class", cfg.points_per_class, "gen config");
    if (j.contains("scene")) {
        const auto& s = j.at("scene");
        reject_unknown(s, {"height", "width", "k", "n_regions", "noise_sigma", "seed", "background_ignore"}, "scene");
        read_field(s, "height", cfg.scene.height, "scene");
        read_field(s, "width", cfg.scene.width, "scene");
        read_field(s, "k", cfg.scene.k, "scene");
        read_field(s, "n_regions", cfg.scene.n_regions, "scene");
        read_field(s, "noise_sigma", cfg.scene.noise_sigma, "scene");
        read_field(s, "seed", cfg.scene.seed, "scene");
        read_field(s, "background_ignore", cfg.scene.background_ignore, "scene");
    }
    if (cfg.count < 1) {
        throw ConfigError("gen config.count must be >= 1");
    }
    if (cfg.points_per_class < 1) {
        throw ConfigError("gen config.points_per_class must be >= 1");
    }
    cfg.scene.validate();
    return cfg;
}

trainer::TrainConfig parse_train_config(const json& j) {
    const std::string where = "train config";
    reject_unknown(j,
                   {"tau", "lambda_con", "base_lr", "weight_decay", "power", "max_iter", "finetune_iter", "patch",
                    "batch", "stride", "k", "seed", "consistency", "temperature", "enable_rg", "enable_cr",
                    "enable_st", "width", "depth", "threads"},
                   where);
    trainer::TrainConfig cfg;
    read_field(j, "tau", cfg.tau, where);
    read_field(j, "lambda_con", cfg.lambda_con, where);
    read_field(j, "base_lr", cfg.base_lr, where);
    read_field(j, "weight_decay", cfg.weight_decay, where);
    read_field(j, "power", cfg.power, where);
    read_field(j, "max_iter", cfg.max_iter, where);
    read_field(j, "finetune_iter", cfg.finetune_iter, where);
    read_field(j, "patch", cfg.patch, where);
    read_field(j, "batch", cfg.batch, where);
    read_field(j, "stride", cfg.stride, where);
    read_field(j, "k", cfg.k, where);
    read_field(j, "seed", cfg.seed, where);
    read_field(j, "temperature", cfg.temperature, where);
    read_field(j, "enable_rg", cfg.enable_rg, where);
    read_field(j, "enable_cr", cfg.enable_cr, where);
    read_field(j, "enable_st", cfg.enable_st, where);
    read_field(j, "width", cfg.width, where);
    read_field(j, "depth", cfg.depth, where);
    read_field(j, "threads", cfg.threads, where);
    if (j.contains("consistency")) {
        std::string kind;
        read_field(j, "consistency", kind, where);
        if (kind == "mse") {
            cfg.consistency = trainer::ConsistencyKind::mse;
        } else if (kind == "kl") {
            cfg.consistency = trainer::ConsistencyKind::kl;
        } else {
            throw ConfigError(where + ".consistency: expected 'mse' or 'kl', got '" + kind + "'");
        }
    }
    cfg.validate();
    return cfg;
}

json to_json(const trainer::TrainConfig& cfg) {
    return {{"tau", cfg.tau},
            {"lambda_con", cfg.lambda_con},
            {"base_lr", cfg.base_lr},
            {"weight_decay", cfg.weight_decay},
            {"power", cfg.power},
            {"max_iter", cfg.max_iter},
            {"finetune_iter", cfg.finetune_iter},
            {"patch", cfg.patch},
            {"batch", cfg.batch},
            {"stride", cfg.stride},
            {"k", cfg.k},
            {"seed", cfg.seed},
            {"consistency", trainer::to_string(cfg.consistency)},
            {"temperature", cfg.temperature},
            {"enable_rg", cfg.enable_rg},
            {"enable_cr", cfg.enable_cr},
            {"enable_st", cfg.enable_st},
            {"width", cfg.width},
            {"depth", cfg.depth},
            {"threads", cfg.threads}};
}

json to_json(const trainer::TrainLogRecord& r) {
    return {{"phase", trainer::to_string(r.phase)},
            {"iter", r.iter},
            {"lr", r.lr},
            {"loss_seg", r.loss_seg},
            {"loss_exp", r.loss_exp},
            {"loss_con", r.loss_con},
            {"loss_total", r.loss_total},
            {"n_expanded", r.n_expanded},
            {"n_points", r.n_points}};
}

void TrainOverrides::apply(trainer::TrainConfig& cfg) const {
    if (seed) cfg.seed = *seed;
    if (tau) cfg.tau = *tau;
    if (lambda_con) cfg.lambda_con = *lambda_con;
    if (temperature) cfg.temperature = *temperature;
    if (consistency) {
        if (*consistency == "mse") {
            cfg.consistency = trainer::ConsistencyKind::mse;
        } else if (*consistency == "kl") {
            cfg.consistency = trainer::ConsistencyKind::kl;
        } else {
            throw ConfigError("--consistency must be mse or kl");
        }
    }
    if (no_rg) cfg.enable_rg = false;
    if (no_cr) cfg.enable_cr = false;
    if (no_st) cfg.enable_st = false;
    cfg.validate();
}

std::string scene_stem(int index) {
    std::ostringstream s;
    s << "scene_" << std::setw(4) << std::setfill('0') << index;
    return s.str();
}

std::vector<fs::path> cmd_gen(const fs::path& config, const fs::path& out_dir, std::optional<std::uint64_t> seed,
                              std::ostream& manifest) {
    auto cfg = parse_gen_config(read_json_file(config));
    if (seed) {
        cfg.scene.seed = *seed;
    }
    fs::create_directories(out_dir);
    std::vector<fs::path> written;
    for (int i = 0; i < cfg.count; ++i) {
        auto spec = cfg.scene;
        spec.seed = cfg.scene.seed + static_cast<std::uint64_t>(i);
        const auto scene = synthdata::gen_scene(spec);
        const auto points = synthdata::sample_points(scene.gt, cfg.points_per_class, spec.seed);
        const auto stem = scene_stem(i);
        const fs::path image = out_dir / (stem + "_image.crg");
        const fs::path gt = out_dir / (stem + "_gt.crg");
        const fs::path pts = out_dir / (stem + "_points.crg");
        io::save_raster(image, scene.image, io::DType::f32);
        io::save_labels(gt, scene.gt);
        io::save_labels(pts, points);
        written.insert(written.end(), {image, gt, pts});
        manifest << json{{"scene", i},
                         {"seed", spec.seed},
                         {"image", image.string()},
                         {"gt", gt.string()},
                         {"points", pts.string()},
                         {"n_points", points.labeled_count()}}
                        .dump()
                 << '\n';
    }
    return written;
}

std::vector<trainer::Sample> load_dataset(const fs::path& data_dir) {
    if (!fs::is_directory(data_dir)) {
        throw DatasetError("data directory " + data_dir.string() + " does not exist");
    }
    std::vector<fs::path> images;
    const std::string suffix = "_image.crg";
    for (const auto& entry : fs::directory_iterator(data_dir)) {
        const auto name = entry.path().filename().string();
        if (name.size() > suffix.size() && name.ends_with(suffix)) {
            images.push_back(entry.path());
        }
    }
    std::sort(images.begin(), images.end());
    if (images.empty()) {
        throw DatasetError("no *_image.crg files in " + data_dir.string());
    }
    std::vector<trainer::Sample> samples;
    for (const auto& image : images) {
        const auto name = image.filename().string();
        const auto stem = name.substr(0, name.size() - suffix.size());
        trainer::Sample s{io::load_image(image), io::load_labels(data_dir / (stem + "_points.crg"))};
        if (!s.points.same_geometry(s.image)) {
            throw ShapeError(stem + ": points do not match image geometry");
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

trainer::TrainResult cmd_train(const fs::path& config, const fs::path& data_dir, const fs::path& out_dir,
                               const TrainOverrides& overrides, std::ostream& status) {
    auto cfg = config.empty() ? trainer::TrainConfig{} : parse_train_config(read_json_file(config));
    overrides.apply(cfg);
    const auto dataset = load_dataset(data_dir);
    fs::create_directories(out_dir);
    {
        std::ofstream out(out_dir / "config.json");
        out << to_json(cfg).dump(2) << '\n';
    }
    std::ofstream log(out_dir / "train_log.jsonl", std::ios::trunc);
    if (!log) {
        throw DataError("cannot write " + (out_dir / "train_log.jsonl").string());
    }
    auto result = trainer::train(cfg, dataset, [&log](const trainer::TrainLogRecord& r) { log << to_json(r).dump() << '\n'; });
    io::save_checkpoint(out_dir / "checkpoint.crgc", result.params);
    status << "trained " << result.log.size() << " iterations on " << dataset.size() << " images; checkpoint "
           << (out_dir / "checkpoint.crgc").string() << '\n';
    return result;
}

void cmd_grow(const fs::path& probs, const fs::path& points, double tau, const fs::path& out) {
    const auto p = io::load_raster(probs).raster;
    if (!grid::is_probability_map(p)) {
        throw DataError(probs.string() + " is not a valid probability map");
    }
    const auto y = io::load_labels(points);
    io::save_labels(out, regiongrow::grow(regiongrow::init_expanded(y), p, {tau}));
}

void cmd_predict(const fs::path& checkpoint, const fs::path& image, int patch, int stride, const fs::path& out_dir) {
    const auto params = io::load_checkpoint(checkpoint);
    const auto img = io::load_image(image);
    const auto probs = model::predict(params, img, patch, stride);
    fs::create_directories(out_dir);
    io::save_raster(out_dir / "probs.crg", probs, io::DType::f64);
    io::save_labels(out_dir / "labels.crg", grid::argmax_labels(probs));
}

metrics::Scores cmd_eval(const fs::path& pred, const fs::path& gt, int k, const fs::path& out_dir,
                         std::ostream& out) {
    const auto cm = metrics::confusion(io::load_labels(pred), io::load_labels(gt), k);
    const auto s = metrics::scores(cm);
    fs::create_directories(out_dir);
    std::ofstream csv(out_dir / "metrics.csv", std::ios::trunc);
    csv << std::setprecision(17) << "name,f1,iou,oa\n";
    json per_class = json::array();
    json excluded = json::array();
    for (int c = 1; c <= k; ++c) {
        if (!s.present[c - 1]) {
            excluded.push_back(c);
            continue;
        }
        csv << "class_" << c << ',' << s.f1[c - 1] << ',' << s.iou[c - 1] << ",\n";
        per_class.push_back({{"class", c}, {"f1", s.f1[c - 1]}, {"iou", s.iou[c - 1]}});
    }
    csv << "summary," << s.mean_f1 << ',' << s.mean_iou << ',' << s.overall_accuracy << '\n';
    const json summary{{"mF1", s.mean_f1},
                       {"mIoU", s.mean_iou},
                       {"OA", s.overall_accuracy},
                       {"per_class", per_class},
                       {"excluded_classes", excluded}};
    std::ofstream(out_dir / "summary.json", std::ios::trunc) << summary.dump(2) << '\n';
    out << summary.dump() << '\n';
    return s;
}

int run(int argc, const char* const* argv) {
    CLI::App app{"Point-supervised segmentation with consistency-regularized region growing"};
    app.require_subcommand(1);

    fs::path gen_config, gen_out;
    std::optional<std::uint64_t> gen_seed;
    auto* gen = app.add_subcommand("gen", "Generate synthetic scenes");
    gen->add_option("--config", gen_config, "Scene JSON config")->required();
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--seed", gen_seed, "Override scene seed");

    fs::path train_config, train_data, train_out;
    TrainOverrides overrides;
    auto* train = app.add_subcommand("train", "Train a model");
    train->add_option("--config", train_config, "Training JSON config");
    train->add_option("--data", train_data, "Directory of scene files")->required();
    train->add_option("--out", train_out, "Output directory")->required();
    train->add_option("--seed", overrides.seed, "Random seed");
    train->add_option("--tau", overrides.tau, "Region-growing threshold");
    train->add_option("--lambda-con", overrides.lambda_con, "Consistency weight");
    train->add_option("--consistency", overrides.consistency, "Consistency loss")
        ->check(CLI::IsMember({"mse", "kl"}));
    train->add_option("--temperature", overrides.temperature, "KL temperature");
    train->add_flag("--no-rg", overrides.no_rg, "Disable region growing");
    train->add_flag("--no-cr", overrides.no_cr, "Disable consistency regularization");
    train->add_flag("--no-st", overrides.no_st, "Disable self-training");

    fs::path grow_probs, grow_points, grow_out;
    double grow_tau = 0.95;
    auto* grow = app.add_subcommand("grow", "Region-grow point labels over a probability map");
    grow->add_option("--prob", grow_probs, "Probability raster")->required();
    grow->add_option("--points", grow_points, "Point label raster")->required();
    grow->add_option("--tau", grow_tau, "Confidence threshold");
    grow->add_option("--out", grow_out, "Output label raster")->required();

    fs::path pred_ckpt, pred_image, pred_out;
    int pred_patch = 128;
    int pred_stride = 40;
    auto* predict = app.add_subcommand("predict", "Predict labels and probabilities");
    predict->add_option("--checkpoint", pred_ckpt, "Checkpoint file")->required();
    predict->add_option("--image", pred_image, "Image raster")->required();
    predict->add_option("--patch", pred_patch, "Tile size");
    predict->add_option("--stride", pred_stride, "Tile stride");
    predict->add_option("--out", pred_out, "Output directory")->required();

    fs::path eval_pred, eval_gt, eval_out;
    int eval_k = 0;
    auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
    eval->add_option("--pred", eval_pred, "Predicted label raster")->required();
    eval->add_option("--gt", eval_gt, "Ground-truth label raster")->required();
    eval->add_option("--k", eval_k, "Number of classes")->required();
    eval->add_option("--out", eval_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*gen) {
            cmd_gen(gen_config, gen_out, gen_seed, std::cout);
        } else if (*train) {
            cmd_train(train_config, train_data, train_out, overrides, std::cout);
        } else if (*grow) {
            cmd_grow(grow_probs, grow_points, grow_tau, grow_out);
        } else if (*predict) {
            cmd_predict(pred_ckpt, pred_image, pred_patch, pred_stride, pred_out);
        } else if (*eval) {
            cmd_eval(eval_pred, eval_gt, eval_k, eval_out, std::cout);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"crgnet"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace crg::cli
