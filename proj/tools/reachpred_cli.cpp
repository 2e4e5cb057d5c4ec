#include "reachpred/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace reachpred;

namespace {

enum Exit { ok = 0, usage = 1, numerical = 2, io = 3 };

// key=value with a JSON value; bare words are taken as strings.
json parse_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw std::invalid_argument("override '" + kv + "' is not key=value");
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    json v = json::parse(value, nullptr, false);
    if (v.is_discarded()) v = value;
    json out = json::object();
    out[key] = v;
    return out;
}

struct Common {
    std::string spec;
    int threads = -1;
    std::vector<std::string> planner_overrides;
    std::vector<std::string> ioc_overrides;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("spec", c.spec, "experiment spec JSON")->required()->check(CLI::ExistingFile);
    app->add_option("--threads", c.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    app->add_option("--planner", c.planner_overrides, "planner override key=value (repeatable)");
    app->add_option("--ioc", c.ioc_overrides, "IOC override key=value (repeatable)");
}

Experiment open(const Common& c) {
    ExperimentSpec spec = load_experiment(c.spec);
    if (c.threads >= 0) spec.threads = c.threads;
    spec.ioc.threads = spec.threads;
    // A bad override is a command line mistake, not a file problem.
    try {
        for (const auto& kv : c.planner_overrides) apply_json(spec.planner, parse_override(kv));
        for (const auto& kv : c.ioc_overrides) apply_json(spec.ioc, parse_override(kv));
    } catch (const IoError& e) {
        throw std::invalid_argument(e.what());
    }
    spec.ioc.features = spec.planner.features;
    return open_experiment(spec);
}

std::vector<int> parse_cases(const std::string& s) {
    std::vector<int> out;
    std::stringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ','))
        if (!tok.empty()) out.push_back(std::stoi(tok));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reaching-motion prediction: synthesize demos, learn weights, predict, evaluate"};
    app.require_subcommand(1);

    Common synth_c, learn_c, predict_c, run_c;
    auto* synth = app.add_subcommand("synth-demos", "plan demonstrations under the spec's w_true");
    add_common(synth, synth_c);

    auto* learn = app.add_subcommand("learn", "build the sample dataset and learn a weight vector");
    add_common(learn, learn_c);
    std::optional<int> leave_out;
    bool cv = false;
    learn->add_option("--leave-out", leave_out, "exclude demo i from training");
    learn->add_flag("--cv", cv, "pick the L1 strength by cross validation");

    auto* predict = app.add_subcommand("predict", "predict the demos' motions with a weight file");
    add_common(predict, predict_c);
    std::string weights_path, mode_text, cases_text, tag = "pred";
    std::optional<int> repeat;
    std::optional<std::string> baseline;
    predict->add_option("--weights", weights_path, "weight file")->check(CLI::ExistingFile);
    predict->add_option("--baseline", baseline, "use baseline0 or baseline1 weights instead of a file")
        ->check(CLI::IsMember({"baseline0", "baseline1"}));
    predict->add_option("--mode", mode_text, "single_shot or replan (default from spec)")
        ->check(CLI::IsMember({"single_shot", "replan"}));
    predict->add_option("--repeat", repeat, "predictions per case with distinct seeds")->check(CLI::PositiveNumber);
    predict->add_option("--cases", cases_text, "comma-separated demo indices (default all)");
    predict->add_option("--tag", tag, "label placed in output file names");

    auto* eval = app.add_subcommand("eval", "score prediction files against observations");
    std::string pred_dir, obs_dir, model_path, report_path;
    eval->add_option("--pred", pred_dir, "prediction directory")->required();
    eval->add_option("--obs", obs_dir, "observation directory")->required();
    eval->add_option("--model", model_path, "kinematic model JSON")->required()->check(CLI::ExistingFile);
    eval->add_option("--report", report_path, "output CSV")->required();

    auto* replay = app.add_subcommand("replay", "print the task-space pose of every waypoint as CSV");
    std::string traj_path, replay_model, frame = "hand", out_path;
    replay->add_option("trajectory", traj_path, "trajectory CSV")->required()->check(CLI::ExistingFile);
    replay->add_option("--model", replay_model, "kinematic model JSON")->required()->check(CLI::ExistingFile);
    replay->add_option("--frame", frame, "frame to report");
    replay->add_option("-o,--output", out_path, "write to file instead of stdout");

    auto* run = app.add_subcommand("run", "synth, leave-one-out learn, predict learned and baseline1, eval");
    add_common(run, run_c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? ok : usage;
    }

    try {
        if (*synth) {
            cmd_synth_demos(open(synth_c), std::cout);
        } else if (*learn) {
            const Experiment exp = open(learn_c);
            cmd_learn(exp, leave_out, cv || exp.spec.cross_validate, std::cout);
        } else if (*predict) {
            const Experiment exp = open(predict_c);
            if (weights_path.empty() == !baseline) {
                std::cerr << "predict: give exactly one of --weights or --baseline\n";
                return usage;
            }
            WeightVector w;
            if (baseline) {
                const IocDataset ds = load_or_build_dataset(exp, std::cout);
                w = baseline_weights(*baseline == "baseline0" ? BaselineKind::baseline0 : BaselineKind::baseline1,
                                     exp.spec.planner.features, exp.model, ds.ranges);
            } else {
                w = load_weights(weights_path);
            }
            const PredictMode mode = mode_text.empty() ? exp.spec.mode : parse_mode(mode_text);
            const PredictOutput out =
                cmd_predict(exp, w, mode, repeat.value_or(exp.spec.repeat), parse_cases(cases_text), tag, std::cout);
            if (!out.failures.empty()) return numerical;
        } else if (*eval) {
            cmd_eval(pred_dir, obs_dir, load_model(model_path), report_path, std::cout);
        } else if (*replay) {
            const std::string csv = cmd_replay(read_trajectory_csv(traj_path), load_model(replay_model), frame);
            if (out_path.empty())
                std::cout << csv;
            else
                write_text_atomic(out_path, csv);
        } else if (*run) {
            cmd_run(open(run_c), std::cout);
        }
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return io;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return numerical;
    } catch (const FingerprintMismatch& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage;
    } catch (const ModelError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return io;
    } catch (const TrajectoryError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return io;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return numerical;
    }
    return ok;
}
