#pragma once

#include "kfmot/attack.hpp"
#include "kfmot/defense.hpp"
#include "kfmot/error.hpp"
#include "kfmot/theory.hpp"
#include "kfmot/tracker.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace kfmot {

struct DefenseSettings {
    std::string mode = "full";  ///< off | full | gaussian | elimination | outlier-unaware | axis-unaware
    double alpha_max = 0.95;
    double beta_trim = 0.05;
    std::size_t buffer_size = 200;
    std::size_t warmup_min = 30;
    bool modulate_provisional = false;

    std::optional<DefenseConfig> resolve() const {
        if (mode == "off") return std::nullopt;
        DefenseConfig c = DefenseConfig::preset(mode);
        c.alpha_max = alpha_max;
        c.beta_trim = beta_trim;
        c.buffer_size = buffer_size;
        c.warmup_min = warmup_min;
        c.modulate_provisional = modulate_provisional;
        c.validate();
        return c;
    }
};

struct InputSettings {
    std::string kind = "synth";  ///< synth | kitti
    std::string kitti_dir;
    std::vector<std::string> classes{"Car", "Van", "Truck", "Pedestrian", "Cyclist"};
    int traces = 10;
    int objects = 6;
    int frames = 100;
    double noise_sigma = -1.0;  ///< negative: 0.1 m (3D) or 1 px (2D)
};

struct PoisonSettings {
    bool enabled = false;
    int frames = 10;         ///< poisoned frames right before the attack
    double magnitude = 3.0;  ///< lateral shift per poisoned frame, alternating sign
};

struct AttackSettings {
    bool enabled = true;
    int target = 0;
    int hide_frames = 5;
    int attack_frame = -1;  ///< negative: middle of the target's life
    double lambda = -1.0;   ///< negative: binary search
    double lambda_hi = -1.0;  ///< negative: 4x the target extent along the direction
    int iters = 20;
    PoisonSettings poison;
};

struct AblateSettings {
    std::vector<std::string> modes{"gaussian", "elimination", "outlier-unaware", "axis-unaware"};
    std::vector<double> alphas{0.85, 0.90, 0.95, 0.99};
};

struct TheorySettings {
    SimConfig sim;
    std::vector<std::string> layouts{"optimal", "uniform", "random", "hide_first"};
    std::vector<int> hide_lengths{0, 5, 10, 15, 20, 30};
    int batches = 20;
};

struct BenchSettings {
    int frames = 300;
    int objects = 6;
    int repeats = 3;
};

/// Everything one experiment needs. Serialised as a JSON document.
struct ExperimentConfig {
    std::string profile = "apollo3d";
    DefenseSettings defense;
    InputSettings input;
    AttackSettings attack;
    AblateSettings ablate;
    TheorySettings theory;
    BenchSettings bench;
    std::optional<double> clear_threshold;  ///< default: 0.5 IoU (2D), 1.0 m (3D)
    std::uint64_t seed = 1;
    std::string out = "out";
    int jobs = 1;

    TrackerConfig tracker(bool defended = true) const {
        TrackerConfig c = TrackerConfig::profile(profile);
        if (defended) c.defense = defense.resolve();
        c.validate();
        return c;
    }

    int dims() const { return TrackerConfig::profile(profile).dims; }

    void validate() const {
        (void)tracker();
        if (input.kind != "synth" && input.kind != "kitti") throw InvalidArgument("input.kind must be synth or kitti");
        if (input.kind == "kitti" && input.kitti_dir.empty()) throw InvalidArgument("input.kitti_dir is required");
        if (input.traces < 1 || input.objects < 1 || input.frames < 2) throw InvalidArgument("bad synth input sizes");
        if (attack.hide_frames < 0 || attack.iters < 1) throw InvalidArgument("bad attack settings");
        if (attack.poison.frames < 0) throw InvalidArgument("poison.frames must be >= 0");
        if (jobs < 1) throw InvalidArgument("jobs must be >= 1");
        theory.sim.validate();
        for (const auto& l : theory.layouts) (void)layout_from_string(l);
    }
};

// ---------------------------------------------------------------------------
// JSON mapping

inline void to_json(nlohmann::json& j, const DefenseSettings& d) {
    j = {{"mode", d.mode},           {"alpha_max", d.alpha_max},     {"beta_trim", d.beta_trim},
         {"buffer_size", d.buffer_size}, {"warmup_min", d.warmup_min},
         {"modulate_provisional", d.modulate_provisional}};
}
inline void from_json(const nlohmann::json& j, DefenseSettings& d) {
    d.mode = j.value("mode", d.mode);
    d.alpha_max = j.value("alpha_max", d.alpha_max);
    d.beta_trim = j.value("beta_trim", d.beta_trim);
    d.buffer_size = j.value("buffer_size", d.buffer_size);
    d.warmup_min = j.value("warmup_min", d.warmup_min);
    d.modulate_provisional = j.value("modulate_provisional", d.modulate_provisional);
}

inline void to_json(nlohmann::json& j, const InputSettings& s) {
    j = {{"kind", s.kind},     {"kitti_dir", s.kitti_dir}, {"classes", s.classes}, {"traces", s.traces},
         {"objects", s.objects}, {"frames", s.frames},     {"noise_sigma", s.noise_sigma}};
}
inline void from_json(const nlohmann::json& j, InputSettings& s) {
    s.kind = j.value("kind", s.kind);
    s.kitti_dir = j.value("kitti_dir", s.kitti_dir);
    s.classes = j.value("classes", s.classes);
    s.traces = j.value("traces", s.traces);
    s.objects = j.value("objects", s.objects);
    s.frames = j.value("frames", s.frames);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
}

inline void to_json(nlohmann::json& j, const PoisonSettings& p) {
    j = {{"enabled", p.enabled}, {"frames", p.frames}, {"magnitude", p.magnitude}};
}
inline void from_json(const nlohmann::json& j, PoisonSettings& p) {
    p.enabled = j.value("enabled", p.enabled);
    p.frames = j.value("frames", p.frames);
    p.magnitude = j.value("magnitude", p.magnitude);
}

inline void to_json(nlohmann::json& j, const AttackSettings& a) {
    j = {{"enabled", a.enabled},       {"target", a.target},       {"hide_frames", a.hide_frames},
         {"attack_frame", a.attack_frame}, {"lambda", a.lambda},   {"lambda_hi", a.lambda_hi},
         {"iters", a.iters},           {"poison", a.poison}};
}
inline void from_json(const nlohmann::json& j, AttackSettings& a) {
    a.enabled = j.value("enabled", a.enabled);
    a.target = j.value("target", a.target);
    a.hide_frames = j.value("hide_frames", a.hide_frames);
    a.attack_frame = j.value("attack_frame", a.attack_frame);
    a.lambda = j.value("lambda", a.lambda);
    a.lambda_hi = j.value("lambda_hi", a.lambda_hi);
    a.iters = j.value("iters", a.iters);
    if (j.contains("poison")) a.poison = j.at("poison").get<PoisonSettings>();
}

inline void to_json(nlohmann::json& j, const AblateSettings& a) { j = {{"modes", a.modes}, {"alphas", a.alphas}}; }
inline void from_json(const nlohmann::json& j, AblateSettings& a) {
    a.modes = j.value("modes", a.modes);
    a.alphas = j.value("alphas", a.alphas);
}

inline void to_json(nlohmann::json& j, const TheorySettings& t) {
    const auto& s = t.sim;
    j = {{"T", s.T},           {"s_ratio", s.s_ratio},   {"h_ratio", s.h_ratio},   {"lambda", s.lambda},
         {"delta_max", s.delta_max}, {"sigma", s.sigma}, {"q", s.q},               {"r", s.r},
         {"trials", s.trials}, {"layout", to_string(s.layout)}, {"layouts", t.layouts},
         {"hide_lengths", t.hide_lengths}, {"batches", t.batches}};
}
inline void from_json(const nlohmann::json& j, TheorySettings& t) {
    auto& s = t.sim;
    s.T = j.value("T", s.T);
    s.s_ratio = j.value("s_ratio", s.s_ratio);
    s.h_ratio = j.value("h_ratio", s.h_ratio);
    s.lambda = j.value("lambda", s.lambda);
    s.delta_max = j.value("delta_max", s.delta_max);
    s.sigma = j.value("sigma", s.sigma);
    s.q = j.value("q", s.q);
    s.r = j.value("r", s.r);
    s.trials = j.value("trials", s.trials);
    s.layout = layout_from_string(j.value("layout", std::string(to_string(s.layout))));
    t.layouts = j.value("layouts", t.layouts);
    t.hide_lengths = j.value("hide_lengths", t.hide_lengths);
    t.batches = j.value("batches", t.batches);
}

inline void to_json(nlohmann::json& j, const BenchSettings& b) {
    j = {{"frames", b.frames}, {"objects", b.objects}, {"repeats", b.repeats}};
}
inline void from_json(const nlohmann::json& j, BenchSettings& b) {
    b.frames = j.value("frames", b.frames);
    b.objects = j.value("objects", b.objects);
    b.repeats = j.value("repeats", b.repeats);
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = {{"profile", c.profile}, {"defense", c.defense}, {"input", c.input},
         {"attack", c.attack},   {"ablate", c.ablate},   {"theory", c.theory},
         {"bench", c.bench},     {"seed", c.seed},       {"out", c.out},
         {"jobs", c.jobs}};
    j["clear_threshold"] = c.clear_threshold ? nlohmann::json(*c.clear_threshold) : nlohmann::json(nullptr);
}
inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    c.profile = j.value("profile", c.profile);
    if (j.contains("defense")) c.defense = j.at("defense").get<DefenseSettings>();
    if (j.contains("input")) c.input = j.at("input").get<InputSettings>();
    if (j.contains("attack")) c.attack = j.at("attack").get<AttackSettings>();
    if (j.contains("ablate")) c.ablate = j.at("ablate").get<AblateSettings>();
    if (j.contains("theory")) c.theory = j.at("theory").get<TheorySettings>();
    if (j.contains("bench")) c.bench = j.at("bench").get<BenchSettings>();
    c.seed = j.value("seed", c.seed);
    c.out = j.value("out", c.out);
    c.jobs = j.value("jobs", c.jobs);
    if (j.contains("clear_threshold") && !j.at("clear_threshold").is_null())
        c.clear_threshold = j.at("clear_threshold").get<double>();
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config: " + path);
    try {
        auto c = nlohmann::json::parse(in).get<ExperimentConfig>();
        c.validate();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("bad config: ") + e.what());
    }
}

/// Reference document listing every default.
inline std::string reference_config() { return nlohmann::json(ExperimentConfig{}).dump(2) + "\n"; }

/// FNV-1a over the canonical JSON dump, leaving out fields that cannot change results.
inline std::string config_hash(const ExperimentConfig& c) {
    nlohmann::json j = c;
    j.erase("out");
    j.erase("jobs");
    const std::string s = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace kfmot
