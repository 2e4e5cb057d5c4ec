#pragma once

#include "reachpred/ioc.hpp"
#include "reachpred/kinematics.hpp"
#include "reachpred/planner.hpp"
#include "reachpred/scene.hpp"
#include "reachpred/weights.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace reachpred {

using json = nlohmann::ordered_json;

std::string read_text(const std::filesystem::path& path);
// Writes through a temporary file and a rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& doc);

std::uint64_t fnv1a(const std::string& data, std::uint64_t h = 1469598103934665603ull);
std::string hex64(std::uint64_t v);

// Rejects any unit other than meters, radians and seconds.
void check_units(const json& doc);

KinematicModel model_from_json(const json& doc);
json model_to_json(const KinematicModel& model);
KinematicModel load_model(const std::filesystem::path& path);

// Relative file references resolve against `base_dir`.
Scene scene_from_json(const json& doc, const std::filesystem::path& base_dir, const KinematicModel& active);
Scene load_scene(const std::filesystem::path& path, const KinematicModel& active);

json weights_to_json(const WeightVector& w);
WeightVector weights_from_json(const json& doc);
void save_weights(const std::filesystem::path& path, const WeightVector& w);
WeightVector load_weights(const std::filesystem::path& path);

json dataset_to_json(const IocDataset& ds);
IocDataset dataset_from_json(const json& doc);

// Field-by-field overrides; unknown keys are errors.
void apply_json(IocConfig& cfg, const json& doc);
void apply_json(PlannerConfig& cfg, const json& doc);
void apply_json(FeatureSetConfig& cfg, const json& doc);
json to_json(const IocConfig& cfg);
json to_json(const PlannerConfig& cfg);
json to_json(const FeatureSetConfig& cfg);

}  // namespace reachpred
