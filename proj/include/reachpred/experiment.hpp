#pragma once

#include "reachpred/eval.hpp"
#include "reachpred/io.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace reachpred {

// Demos generated by the planner under a hand-set weight vector.
struct SynthesisSpec {
    // Weights on features divided by reference scales (see reference_weights).
    std::map<std::string, double> w_true;
    std::vector<Configuration> starts;  // cycled; default the scene rest posture
    std::vector<Eigen::Vector3d> goals;  // cycled
    int count = 7;
    std::uint64_t seed = 100;
    int iterations = 0;  // planner iterations for synthesis, 0 = planner default
    int reference_samples = 20;
};

enum class PredictMode { single_shot, replan };

struct ExperimentSpec {
    std::filesystem::path base_dir;  // relative paths resolve here
    std::filesystem::path model;
    std::filesystem::path scene;
    std::filesystem::path output_dir;
    std::vector<std::filesystem::path> demo_paths;
    std::optional<SynthesisSpec> synthesize;
    IocConfig ioc;
    PlannerConfig planner;
    PredictMode mode = PredictMode::single_shot;
    int repeat = 1;
    double tick = 0.1;
    bool cross_validate = false;
    int folds = 3;
    std::vector<double> grid = default_regularizer_grid();
    int threads = 0;
};

ExperimentSpec experiment_from_json(const json& doc, const std::filesystem::path& base_dir);
ExperimentSpec load_experiment(const std::filesystem::path& path);

struct Experiment {
    ExperimentSpec spec;
    KinematicModel model;
    Scene scene;

    std::filesystem::path demos_dir() const { return spec.output_dir / "demos"; }
    std::filesystem::path predictions_dir() const { return spec.output_dir / "predictions"; }
};

Experiment open_experiment(const ExperimentSpec& spec);

// Weights whose ranges are [0, reference scale] per feature; the scale is the largest
// value seen over straight-line seeds towards the synthesis goals and samples around them.
WeightVector reference_weights(const Experiment& exp, const std::map<std::string, double>& w_true);

std::string mode_name(PredictMode mode);
PredictMode parse_mode(const std::string& name);

// Writes demos/demo_<i>.csv and w_true.json under the output dir.
std::vector<std::filesystem::path> cmd_synth_demos(const Experiment& exp, std::ostream& log);

// Explicit demo paths, or the synthesized demos.
std::vector<std::filesystem::path> demo_files(const Experiment& exp);

// Dataset over every demo, cached under output_dir/cache by content hash.
IocDataset load_or_build_dataset(const Experiment& exp, std::ostream& log, bool* cache_hit = nullptr);

struct LearnOutput {
    std::filesystem::path path;
    LearnResult result;
    double l1 = 0.0;
    FeatureRanges ranges;
};

// Learns on every demo except `leave_out`; writes weights.json or weights_loo<i>.json.
LearnOutput cmd_learn(const Experiment& exp, std::optional<int> leave_out, bool cross_validate, std::ostream& log);

struct PredictOutput {
    std::vector<std::filesystem::path> files;
    std::vector<std::string> failures;
};

// For each selected demo: start, buffer and goal from the demo, plan with `weights`,
// write predictions/<demo>__<tag>_<mode>_r<k>.csv.
PredictOutput cmd_predict(const Experiment& exp, const WeightVector& weights, PredictMode mode, int repeat,
                          const std::vector<int>& cases, const std::string& tag, std::ostream& log);

Trajectory predict_case(const Experiment& exp, const Trajectory& demo, const WeightVector& weights,
                        PredictMode mode, std::uint64_t seed, bool* failed = nullptr);

// Pairs <pair>.csv predictions with observations named by the text before "__".
// Throws IoError naming unpaired predictions.
std::vector<ScoreRecord> cmd_eval(const std::filesystem::path& pred_dir, const std::filesystem::path& obs_dir,
                                  const KinematicModel& model, const std::filesystem::path& report, std::ostream& log);

// Task-space pose per waypoint: t,x,y,z,qw,qx,qy,qz.
std::string cmd_replay(const Trajectory& traj, const KinematicModel& model, const std::string& frame);

// synth (if requested) -> leave-one-out learn -> predict learned and baseline1 -> eval.
void cmd_run(const Experiment& exp, std::ostream& log);

}  // namespace reachpred
