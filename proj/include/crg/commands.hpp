#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crg/metrics.hpp"
#include "crg/synthdata.hpp"
#include "crg/trainer.hpp"

namespace crg::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitRuntime = 4;

struct GenConfig {
    synthdata::SceneSpec scene;
    int count = 1;
    int points_per_class = 5;
};

// Both parsers reject unknown keys and report the offending field.
GenConfig parse_gen_config(const nlohmann::json& json);
trainer::TrainConfig parse_train_config(const nlohmann::json& json);
nlohmann::json to_json(const trainer::TrainConfig& cfg);
nlohmann::json to_json(const trainer::TrainLogRecord& record);

nlohmann::json read_json_file(const std::filesystem::path& path);

struct TrainOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<double> tau;
    std::optional<double> lambda_con;
    std::optional<std::string> consistency;
    std::optional<double> temperature;
    bool no_rg = false;
    bool no_cr = false;
    bool no_st = false;

    void apply(trainer::TrainConfig& cfg) const;
};

std::string scene_stem(int index);

// Writes <stem>_image.crg, <stem>_gt.crg, <stem>_points.crg per scene and
// prints one JSON manifest line per scene. Returns the written paths.
std::vector<std::filesystem::path> cmd_gen(const std::filesystem::path& config, const std::filesystem::path& out_dir,
                                           std::optional<std::uint64_t> seed, std::ostream& manifest);

// Loads every <stem>_image.crg / <stem>_points.crg pair in a directory,
// sorted by file name.
std::vector<trainer::Sample> load_dataset(const std::filesystem::path& data_dir);

// Writes checkpoint.crgc, train_log.jsonl and config.json into out_dir.
trainer::TrainResult cmd_train(const std::filesystem::path& config, const std::filesystem::path& data_dir,
                               const std::filesystem::path& out_dir, const TrainOverrides& overrides,
                               std::ostream& status);

void cmd_grow(const std::filesystem::path& probs, const std::filesystem::path& points, double tau,
              const std::filesystem::path& out);

// Writes labels.crg (u8) and probs.crg (f64) into out_dir.
void cmd_predict(const std::filesystem::path& checkpoint, const std::filesystem::path& image, int patch, int stride,
                 const std::filesystem::path& out_dir);

// Writes metrics.csv and summary.json into out_dir and prints the summary.
metrics::Scores cmd_eval(const std::filesystem::path& pred, const std::filesystem::path& gt, int k,
                         const std::filesystem::path& out_dir, std::ostream& out);

int run(int argc, const char* const* argv);
// Arguments without the program name.
int run(const std::vector<std::string>& args);

}  // namespace crg::cli
