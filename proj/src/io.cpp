#include "reachpred/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace reachpred {

namespace fs = std::filesystem;

std::string read_text(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw IoError("cannot write " + tmp.string());
        f << text;
        if (!f) throw IoError("failed writing " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

json read_json(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const json& doc) { write_text_atomic(path, doc.dump(2) + "\n"); }

std::uint64_t fnv1a(const std::string& data, std::uint64_t h) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void check_units(const json& doc) {
    if (!doc.contains("units")) return;
    const json& u = doc.at("units");
    const std::pair<const char*, const char*> expected[] = {{"length", "m"}, {"angle", "rad"}, {"time", "s"}};
    for (auto it = u.begin(); it != u.end(); ++it) {
        bool known = false;
        for (const auto& [k, v] : expected) {
            if (it.key() != k) continue;
            known = true;
            if (it.value() != v)
                throw IoError("unsupported unit for " + it.key() + ": expected " + v);
        }
        if (!known) throw IoError("unknown unit key '" + it.key() + "'");
    }
}

namespace {

Eigen::Vector3d vec3(const json& j) {
    if (!j.is_array() || j.size() != 3) throw IoError("expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Eigen::VectorXd vecx(const json& j) {
    if (!j.is_array()) throw IoError("expected an array of numbers");
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

json to_array(const Eigen::VectorXd& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

// {"translation": [..], "rpy": [roll, pitch, yaw]} or {"rotation": 9 row-major entries}.
Eigen::Isometry3d transform_from_json(const json& j) {
    Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
    if (j.contains("translation")) t.translation() = vec3(j.at("translation"));
    if (j.contains("rpy") && j.contains("rotation")) throw IoError("give either rpy or rotation, not both");
    if (j.contains("rpy")) {
        const Eigen::Vector3d r = vec3(j.at("rpy"));
        t.linear() = (Eigen::AngleAxisd(r[2], Eigen::Vector3d::UnitZ()) *
                      Eigen::AngleAxisd(r[1], Eigen::Vector3d::UnitY()) *
                      Eigen::AngleAxisd(r[0], Eigen::Vector3d::UnitX()))
                         .toRotationMatrix();
    }
    if (j.contains("rotation")) {
        const json& r = j.at("rotation");
        if (!r.is_array() || r.size() != 9) throw IoError("rotation needs 9 entries");
        Eigen::Matrix3d m;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) m(a, b) = r[3 * a + b].get<double>();
        if (!(m.transpose() * m).isApprox(Eigen::Matrix3d::Identity(), 1e-9) || m.determinant() < 0.0)
            throw IoError("rotation is not orthonormal");
        t.linear() = m;
    }
    return t;
}

json transform_to_json(const Eigen::Isometry3d& t) {
    json j = json::object();
    j["translation"] = to_array(t.translation());
    if (!t.linear().isIdentity(0.0)) {
        json r = json::array();
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) r.push_back(t.linear()(a, b));
        j["rotation"] = r;
    }
    return j;
}

template <class T>
void set_if(const json& doc, const char* key, T& field) {
    if (doc.contains(key)) field = doc.at(key).get<T>();
}

void reject_unknown(const json& doc, std::initializer_list<const char*> keys, const char* what) {
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        bool ok = false;
        for (const char* k : keys) ok |= it.key() == k;
        if (!ok) throw IoError(std::string("unknown ") + what + " key '" + it.key() + "'");
    }
}

}  // namespace

KinematicModel model_from_json(const json& doc) {
    check_units(doc);
    std::vector<JointSpec> joints;
    for (const json& jj : doc.at("joints")) {
        JointSpec j;
        j.name = jj.at("name").get<std::string>();
        const std::string kind = jj.at("kind").get<std::string>();
        if (kind == "hinge")
            j.kind = JointKind::hinge;
        else if (kind == "prismatic")
            j.kind = JointKind::prismatic;
        else
            throw IoError("joint '" + j.name + "': unknown kind '" + kind + "'");
        j.axis = vec3(jj.at("axis"));
        if (jj.contains("origin")) j.origin = transform_from_json(jj.at("origin"));
        const json& lim = jj.at("limits");
        if (!lim.is_array() || lim.size() != 2) throw IoError("joint '" + j.name + "': limits need [lo, hi]");
        j.lower = lim[0].get<double>();
        j.upper = lim[1].get<double>();
        set_if(jj, "noise_scale", j.noise_scale);
        if (jj.contains("spheres"))
            for (const json& s : jj.at("spheres")) j.spheres.push_back({vec3(s.at("center")), s.at("radius").get<double>()});
        joints.push_back(std::move(j));
    }
    std::vector<FrameSpec> frames;
    for (const json& fj : doc.at("frames")) {
        FrameSpec f;
        f.name = fj.at("name").get<std::string>();
        const std::string joint = fj.value("joint", std::string());
        f.joint = -1;
        if (!joint.empty()) {
            for (std::size_t i = 0; i < joints.size(); ++i)
                if (joints[i].name == joint) f.joint = static_cast<int>(i);
            if (f.joint < 0) throw IoError("frame '" + f.name + "' references unknown joint '" + joint + "'");
        }
        if (fj.contains("offset")) f.offset = vec3(fj.at("offset"));
        frames.push_back(std::move(f));
    }
    Eigen::Isometry3d base = Eigen::Isometry3d::Identity();
    if (doc.contains("base")) base = transform_from_json(doc.at("base"));
    return KinematicModel(std::move(joints), std::move(frames), base);
}

json model_to_json(const KinematicModel& model) {
    json doc = json::object();
    doc["units"] = {{"length", "m"}, {"angle", "rad"}};
    doc["base"] = transform_to_json(model.base());
    json joints = json::array();
    for (const auto& j : model.joints()) {
        json jj = json::object();
        jj["name"] = j.name;
        jj["kind"] = j.kind == JointKind::hinge ? "hinge" : "prismatic";
        jj["axis"] = to_array(j.axis);
        jj["origin"] = transform_to_json(j.origin);
        jj["limits"] = {j.lower, j.upper};
        jj["noise_scale"] = j.noise_scale;
        json spheres = json::array();
        for (const auto& s : j.spheres) spheres.push_back({{"center", to_array(s.center)}, {"radius", s.radius}});
        jj["spheres"] = spheres;
        joints.push_back(jj);
    }
    doc["joints"] = joints;
    json frames = json::array();
    for (const auto& f : model.frames()) {
        json fj = json::object();
        fj["name"] = f.name;
        fj["joint"] = f.joint < 0 ? std::string() : model.joints()[f.joint].name;
        fj["offset"] = to_array(f.offset);
        frames.push_back(fj);
    }
    doc["frames"] = frames;
    return doc;
}

KinematicModel load_model(const fs::path& path) {
    try {
        return model_from_json(read_json(path));
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

Scene scene_from_json(const json& doc, const fs::path& base_dir, const KinematicModel& active) {
    check_units(doc);
    reject_unknown(doc, {"units", "obstacles", "edt_resolution", "edt_margin", "rest_posture", "passive", "goals", "description"},
                   "scene");
    Scene s;
    if (doc.contains("obstacles")) {
        for (const json& o : doc.at("obstacles")) {
            Obstacle ob;
            const std::string type = o.at("type").get<std::string>();
            ob.center = vec3(o.at("center"));
            if (type == "box") {
                ob.kind = ObstacleKind::box;
                ob.half_extents = vec3(o.at("half_extents"));
                if ((ob.half_extents.array() < 0.0).any()) throw IoError("box half extents must be non-negative");
            } else if (type == "sphere") {
                ob.kind = ObstacleKind::sphere;
                ob.radius = o.at("radius").get<double>();
                if (ob.radius < 0.0) throw IoError("sphere radius must be non-negative");
            } else {
                throw IoError("unknown obstacle type '" + type + "'");
            }
            s.obstacles.push_back(ob);
        }
    }
    set_if(doc, "edt_resolution", s.edt_resolution);
    set_if(doc, "edt_margin", s.edt_margin);
    if (!(s.edt_resolution > 0.0)) throw IoError("edt_resolution must be positive");
    s.rest_posture = doc.contains("rest_posture") ? vecx(doc.at("rest_posture")) : Eigen::VectorXd::Zero(active.dof());
    if (s.rest_posture.size() != active.dof()) throw IoError("rest_posture length does not match the model");

    if (doc.contains("passive")) {
        const json& p = doc.at("passive");
        reject_unknown(p, {"model", "base", "trajectory", "configuration"}, "passive agent");
        PassiveAgent agent;
        agent.model = p.contains("model") ? load_model(base_dir / p.at("model").get<std::string>()) : active;
        if (p.contains("base")) agent.model = agent.model.with_base(transform_from_json(p.at("base")));
        if (p.contains("trajectory")) {
            agent.trajectory = read_trajectory_csv(base_dir / p.at("trajectory").get<std::string>());
        } else {
            const Eigen::VectorXd q = p.contains("configuration") ? vecx(p.at("configuration")) : s.rest_posture;
            Eigen::MatrixXd w(2, q.size());
            w.row(0) = q.transpose();
            w.row(1) = q.transpose();
            agent.trajectory = Trajectory(w, 0.01);
        }
        if (agent.trajectory.dof() != agent.model.dof()) throw IoError("passive trajectory does not match its model");
        s.passive = std::move(agent);
    }
    return s;
}

Scene load_scene(const fs::path& path, const KinematicModel& active) {
    try {
        return scene_from_json(read_json(path), path.parent_path(), active);
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

json weights_to_json(const WeightVector& w) {
    json doc = json::object();
    doc["fingerprint"] = hex64(w.fingerprint());
    json entries = json::array();
    for (int f = 0; f < w.size(); ++f) {
        json e = json::object();
        e["label"] = w.labels[f];
        e["value"] = w.values[f];
        e["lo"] = w.ranges.lo[f];
        e["hi"] = w.ranges.hi[f];
        e["constant"] = static_cast<bool>(w.ranges.constant[f]);
        entries.push_back(e);
    }
    doc["weights"] = entries;
    return doc;
}

WeightVector weights_from_json(const json& doc) {
    WeightVector w;
    const json& entries = doc.at("weights");
    const int f = static_cast<int>(entries.size());
    w.values.resize(f);
    w.ranges.lo.resize(f);
    w.ranges.hi.resize(f);
    w.ranges.constant.resize(f);
    for (int k = 0; k < f; ++k) {
        const json& e = entries[k];
        w.labels.push_back(e.at("label").get<std::string>());
        w.values[k] = e.at("value").get<double>();
        w.ranges.lo[k] = e.value("lo", 0.0);
        w.ranges.hi[k] = e.value("hi", 1.0);
        w.ranges.constant[k] = e.value("constant", false);
    }
    if (!w.values.allFinite()) throw IoError("weight file contains non-finite values");
    if (doc.contains("fingerprint") && doc.at("fingerprint").get<std::string>() != hex64(w.fingerprint()))
        throw FingerprintMismatch("weight file fingerprint does not match its labels");
    return w;
}

void save_weights(const fs::path& path, const WeightVector& w) { write_json(path, weights_to_json(w)); }

WeightVector load_weights(const fs::path& path) {
    try {
        return weights_from_json(read_json(path));
    } catch (const json::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

json dataset_to_json(const IocDataset& ds) {
    json doc = json::object();
    doc["labels"] = ds.labels;
    doc["dropped"] = ds.dropped;
    json recs = json::array();
    for (const auto& r : ds.records) {
        json j = json::object();
        j["demo"] = r.demo;
        j["segment_start"] = r.segment_start;
        j["time_origin"] = r.timing.time_origin;
        j["frozen"] = r.timing.frozen;
        j["rejected"] = r.rejected;
        j["velocity"] = to_array(r.boundary.velocity);
        j["acceleration"] = to_array(r.boundary.acceleration);
        j["jerk"] = to_array(r.boundary.jerk);
        j["demo_features"] = to_array(r.demo_features);
        json samples = json::array();
        for (int s = 0; s < r.sample_features.rows(); ++s) samples.push_back(to_array(r.sample_features.row(s).transpose()));
        j["samples"] = samples;
        recs.push_back(j);
    }
    doc["records"] = recs;
    return doc;
}

IocDataset dataset_from_json(const json& doc) {
    IocDataset ds;
    ds.labels = doc.at("labels").get<std::vector<std::string>>();
    ds.dropped = doc.at("dropped").get<std::vector<std::string>>();
    for (const json& j : doc.at("records")) {
        IocRecord r;
        r.demo = j.at("demo").get<int>();
        r.segment_start = j.at("segment_start").get<int>();
        r.timing = {j.at("time_origin").get<double>(), j.at("frozen").get<bool>()};
        r.rejected = j.at("rejected").get<int>();
        r.boundary = {vecx(j.at("velocity")), vecx(j.at("acceleration")), vecx(j.at("jerk"))};
        r.demo_features = vecx(j.at("demo_features"));
        const json& samples = j.at("samples");
        r.sample_features.resize(static_cast<int>(samples.size()), r.demo_features.size());
        for (std::size_t s = 0; s < samples.size(); ++s) r.sample_features.row(s) = vecx(samples[s]).transpose();
        ds.records.push_back(std::move(r));
    }
    ds.normalize();
    return ds;
}

void apply_json(FeatureSetConfig& cfg, const json& doc) {
    reject_unknown(doc, {"link_distances", "smoothness", "posture", "distance_pairs", "kernel_range", "task_frame"},
                   "feature");
    set_if(doc, "link_distances", cfg.link_distances);
    set_if(doc, "smoothness", cfg.smoothness);
    set_if(doc, "posture", cfg.posture);
    set_if(doc, "kernel_range", cfg.kernel_range);
    set_if(doc, "task_frame", cfg.task_frame);
    if (doc.contains("distance_pairs")) {
        cfg.distance_pairs.clear();
        for (const json& p : doc.at("distance_pairs"))
            cfg.distance_pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
    }
    if (!(cfg.kernel_range > 0.0)) throw IoError("kernel_range must be positive");
}

json to_json(const FeatureSetConfig& cfg) {
    json pairs = json::array();
    for (const auto& [a, p] : cfg.distance_pairs) pairs.push_back({a, p});
    return {{"link_distances", cfg.link_distances}, {"smoothness", cfg.smoothness}, {"posture", cfg.posture},
            {"distance_pairs", pairs}, {"kernel_range", cfg.kernel_range}, {"task_frame", cfg.task_frame}};
}

void apply_json(IocConfig& cfg, const json& doc) {
    reject_unknown(doc, {"samples", "sigma", "l1_strength", "advance", "min_length", "tolerance", "max_iterations",
                         "seed", "threads", "reject_collisions", "goal_epsilon", "features", "eta",
                         "projection_iterations"},
                   "ioc");
    set_if(doc, "samples", cfg.samples);
    set_if(doc, "sigma", cfg.sigma);
    set_if(doc, "l1_strength", cfg.l1_strength);
    set_if(doc, "advance", cfg.advance);
    set_if(doc, "min_length", cfg.min_length);
    set_if(doc, "tolerance", cfg.tolerance);
    set_if(doc, "max_iterations", cfg.max_iterations);
    set_if(doc, "seed", cfg.seed);
    set_if(doc, "threads", cfg.threads);
    set_if(doc, "reject_collisions", cfg.reject_collisions);
    set_if(doc, "goal_epsilon", cfg.goal_epsilon);
    set_if(doc, "eta", cfg.projection.eta);
    set_if(doc, "projection_iterations", cfg.projection.max_iterations);
    if (doc.contains("features")) apply_json(cfg.features, doc.at("features"));
    if (cfg.samples < 1) throw IoError("ioc.samples must be at least 1");
    if (cfg.l1_strength < 0.0) throw IoError("ioc.l1_strength must be non-negative");
    if (!(cfg.sigma > 0.0)) throw IoError("ioc.sigma must be positive");
}

json to_json(const IocConfig& cfg) {
    return {{"samples", cfg.samples},
            {"sigma", cfg.sigma},
            {"l1_strength", cfg.l1_strength},
            {"advance", cfg.advance},
            {"min_length", cfg.min_length},
            {"tolerance", cfg.tolerance},
            {"max_iterations", cfg.max_iterations},
            {"seed", cfg.seed},
            {"reject_collisions", cfg.reject_collisions},
            {"goal_epsilon", cfg.goal_epsilon},
            {"eta", cfg.projection.eta},
            {"projection_iterations", cfg.projection.max_iterations},
            {"features", to_json(cfg.features)}};
}

void apply_json(PlannerConfig& cfg, const json& doc) {
    reject_unknown(doc, {"iterations", "rollouts", "reuse", "sigma", "noise_decay", "min_noise", "temperature", "w_obs",
                         "clearance", "waypoints", "dt", "goal_epsilon", "seed", "features", "eta",
                         "projection_iterations"},
                   "planner");
    set_if(doc, "iterations", cfg.iterations);
    set_if(doc, "rollouts", cfg.rollouts);
    set_if(doc, "reuse", cfg.reuse);
    set_if(doc, "sigma", cfg.sigma);
    set_if(doc, "noise_decay", cfg.noise_decay);
    set_if(doc, "min_noise", cfg.min_noise);
    set_if(doc, "temperature", cfg.temperature);
    set_if(doc, "w_obs", cfg.w_obs);
    set_if(doc, "clearance", cfg.clearance);
    set_if(doc, "waypoints", cfg.waypoints);
    set_if(doc, "dt", cfg.dt);
    set_if(doc, "goal_epsilon", cfg.goal_epsilon);
    set_if(doc, "seed", cfg.seed);
    set_if(doc, "eta", cfg.projection.eta);
    set_if(doc, "projection_iterations", cfg.projection.max_iterations);
    if (doc.contains("features")) apply_json(cfg.features, doc.at("features"));
    if (cfg.iterations < 1) throw IoError("planner.iterations must be at least 1");
    if (cfg.rollouts < 2) throw IoError("planner.rollouts must be at least 2");
    if (cfg.w_obs < 0.0) throw IoError("planner.w_obs must be non-negative");
    if (!(cfg.dt > 0.0)) throw IoError("planner.dt must be positive");
}

json to_json(const PlannerConfig& cfg) {
    return {{"iterations", cfg.iterations},
            {"rollouts", cfg.rollouts},
            {"reuse", cfg.reuse},
            {"sigma", cfg.sigma},
            {"noise_decay", cfg.noise_decay},
            {"min_noise", cfg.min_noise},
            {"temperature", cfg.temperature},
            {"w_obs", cfg.w_obs},
            {"clearance", cfg.clearance},
            {"waypoints", cfg.waypoints},
            {"dt", cfg.dt},
            {"goal_epsilon", cfg.goal_epsilon},
            {"seed", cfg.seed},
            {"eta", cfg.projection.eta},
            {"projection_iterations", cfg.projection.max_iterations},
            {"features", to_json(cfg.features)}};
}

}  // namespace reachpred
