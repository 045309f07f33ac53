// kfmot: tracking, attack, defense and theory experiments from one config.

#include "kfmot/kfmot.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kfmot;

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> profile;
    std::optional<std::string> defense;
    std::optional<int> jobs;
    std::optional<std::string> kitti;
};

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

ExperimentConfig resolve(const Overrides& o) {
    ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
    if (o.seed) c.seed = *o.seed;
    if (o.out) c.out = *o.out;
    if (o.profile) c.profile = *o.profile;
    if (o.defense) c.defense.mode = *o.defense;
    if (o.jobs) c.jobs = *o.jobs;
    if (o.kitti) {
        c.input.kind = "kitti";
        c.input.kitti_dir = *o.kitti;
    }
    c.validate();
    return c;
}

std::ofstream open_out(const ExperimentConfig& c, const std::string& name) {
    fs::create_directories(c.out);
    std::ofstream f(fs::path(c.out) / name);
    if (!f) throw InvalidArgument("cannot write " + (fs::path(c.out) / name).string());
    return f;
}

void write_json(const ExperimentConfig& c, const std::string& name, json j) {
    j["config_hash"] = config_hash(c);
    j["config"] = c;
    open_out(c, name) << j.dump(2) << "\n";
}

void csv_header(std::ofstream& f, const ExperimentConfig& c, const std::string& cols) {
    f << "# config_hash=" << config_hash(c) << "\n" << cols << "\n";
}

std::string vec_cols(const Eigen::VectorXd& v, int dims) {
    std::string s;
    for (int i = 0; i < 3; ++i) s += "," + (i < dims ? num(v[i]) : std::string());
    return s;
}

int cmd_track(const ExperimentConfig& c) {
    const auto traces = load_traces(c);
    const TrackerConfig tc = c.tracker(true);
    auto traj = open_out(c, "trajectories.csv");
    auto log = open_out(c, "frames.jsonl");
    csv_header(traj, c, "trace,frame,track_id,x,y,z,vx,vy,vz,confirmed,matched,reported");
    struct TraceRun {
        std::vector<FrameResult> frames;
        std::string buffer;
    };
    const auto runs = map_traces(traces, c.jobs, [&](const Trace& t) {
        TraceRun out;
        Tracker tracker(tc);
        std::ostringstream buf;
        for (std::size_t f = 0; f < t.frames.size(); ++f) {
            out.frames.push_back(tracker.step(static_cast<int>(f), t.frames[f]));
            if (tracker.buffer()) write_buffer_csv(buf, static_cast<int>(f), *tracker.buffer());
        }
        out.buffer = buf.str();
        return out;
    });
    if (tc.defense) {
        auto b = open_out(c, "buffer.csv");
        csv_header(b, c, "trace,frame,axis,value");
        for (std::size_t i = 0; i < traces.size(); ++i) {
            std::istringstream rows(runs[i].buffer);
            for (std::string line; std::getline(rows, line);) b << traces[i].name << "," << line << "\n";
        }
    }
    for (std::size_t i = 0; i < traces.size(); ++i) {
        for (const auto& fr : runs[i].frames) {
            for (const auto& s : fr.tracks) {
                traj << traces[i].name << "," << fr.frame << "," << s.id << vec_cols(s.center, tc.dims)
                     << vec_cols(s.velocity, tc.dims) << "," << s.confirmed << "," << s.matched << "," << s.reported
                     << "\n";
            }
            json j{{"trace", traces[i].name}, {"frame", fr.frame},     {"born", fr.born},
                   {"destroyed", fr.destroyed}, {"det_track", fr.det_track}, {"clipped_axes", fr.clipped_axes}};
            json pairs = json::array();
            for (const auto& [t, d] : fr.matching.pairs) pairs.push_back({t, d});
            j["pairs"] = pairs;
            if (fr.dmax) {
                std::vector<double> d;
                for (Eigen::Index k = 0; k < fr.dmax->size(); ++k)
                    d.push_back(std::isfinite((*fr.dmax)[k]) ? (*fr.dmax)[k] : -1.0);
                j["dmax"] = d;
            }
            log << j.dump() << "\n";
        }
    }
    write_json(c, "track.json", {{"traces", traces.size()}, {"profile", c.profile}, {"defense", c.defense.mode}});
    std::cout << "tracked " << traces.size() << " trace(s) into " << c.out << "\n";
    return 0;
}

int cmd_evaluate(const ExperimentConfig& c) {
    const auto traces = load_traces(c);
    const auto rows = evaluate(c, traces, true);
    auto f = open_out(c, "clear.csv");
    csv_header(f, c, "trace,motp,motp_norm,mota,precision,recall,f1,mt,ml,sum_d,c,m,fp,mme,g");
    json per = json::array();
    for (const auto& r : rows) {
        const auto& x = r.report;
        f << r.trace << "," << num(x.motp) << "," << num(x.motp_norm) << "," << num(x.mota) << ","
          << num(x.precision) << "," << num(x.recall) << "," << num(x.f1) << "," << num(x.mt) << "," << num(x.ml)
          << "," << num(x.sum_d) << "," << x.sum_c << "," << x.sum_m << "," << x.sum_fp << "," << x.sum_mme << ","
          << x.sum_g << "\n";
        per.push_back({{"trace", r.trace}, {"mota", x.mota}, {"motp", x.motp}, {"f1", x.f1}});
        std::cout << r.trace << ": MOTA " << num(x.mota) << "  MOTP " << num(x.motp) << "  F1 " << num(x.f1)
                  << "\n";
    }
    write_json(c, "clear.json", {{"traces", per}});
    return 0;
}

json adv_json(const AdvReport& r) {
    return {{"fd_max", r.fd_max}, {"fd_avg", r.fd_avg}, {"lf_max", r.lf_max}, {"lf_avg", r.lf_avg},
            {"verdicts", r.verdicts}};
}

void write_attack_outputs(const ExperimentConfig& c, const std::vector<Trace>& traces,
                          const std::vector<AttackOutcome>& res, const std::string& stem) {
    const std::optional<Units> units =
        traces.empty() || traces.front().units != Units::meters ? std::nullopt : std::optional(Units::meters);
    auto f = open_out(c, stem + ".csv");
    csv_header(f, c, "trace,target,attack_frame,lambda,mode,track_id,fd_max,fd_avg,lf,dmax_along");
    auto plot = open_out(c, stem + "_trajectories.csv");
    csv_header(plot, c, "trace,series,frame,x,y,z,attack_start");
    fs::create_directories(fs::path(c.out) / "plans");
    for (const auto& r : res) {
        for (const auto& m : r.modes) {
            f << r.trace << "," << r.target << "," << r.attack_frame << "," << num(r.plan.lambda) << "," << m.mode
              << "," << m.track_id << "," << num(m.fd.max) << "," << num(m.fd.avg) << "," << m.lf << ","
              << (m.dmax_along ? num(*m.dmax_along) : std::string()) << "\n";
            for (const auto& p : m.perceived)
                plot << r.trace << "," << m.mode << "," << p.frame << vec_cols(p.center, static_cast<int>(p.center.size()))
                     << "," << (p.frame == r.attack_frame) << "\n";
        }
        for (const auto& p : r.truth)
            plot << r.trace << ",truth," << p.frame << vec_cols(p.center, static_cast<int>(p.center.size())) << ","
                 << (p.frame == r.attack_frame) << "\n";
        std::ofstream(fs::path(c.out) / "plans" / (r.trace + ".plan")) << write_plan(r.plan);
    }
    json summary = json::object();
    for (const auto& [mode, rep] : summarize_modes(res, units)) {
        summary[mode] = adv_json(rep);
        std::cout << mode << ": FD max " << num(rep.fd_max) << "  FD avg " << num(rep.fd_avg) << "  LF max "
                  << num(rep.lf_max) << "  LF avg " << num(rep.lf_avg) << "\n";
    }
    write_json(c, stem + ".json", {{"summary", summary}, {"traces", res.size()}});
}

int cmd_attack(const ExperimentConfig& c) {
    const auto traces = load_traces(c);
    write_attack_outputs(c, traces, attack_eval(c, traces), "attack");
    return 0;
}

int cmd_ablate(const ExperimentConfig& c) {
    const auto traces = load_traces(c);
    write_attack_outputs(c, traces, ablate(c, traces), "ablate");
    return 0;
}

int cmd_theory(const ExperimentConfig& c) {
    SimConfig sc = c.theory.sim;
    sc.seed = c.seed;
    sc.jobs = c.jobs;
    const auto rep = simulate(sc);
    std::vector<Layout> layouts;
    for (const auto& l : c.theory.layouts) layouts.push_back(layout_from_string(l));
    auto f = open_out(c, "theory_trials.csv");
    csv_header(f, c, "trial,layout,T,d10,d01,d11");
    for (const auto& t : rep.trials)
        f << t.trial << "," << to_string(sc.layout) << "," << sc.T << "," << num(t.d10) << "," << num(t.d01) << ","
          << num(t.d11) << "\n";
    json j{{"mean_d10", rep.mean_d10}, {"mean_d01", rep.mean_d01}, {"mean_d11", rep.mean_d11},
           {"max_d10", rep.max_d10},   {"max_d01", rep.max_d01},   {"max_d11", rep.max_d11},
           {"ratio", rep.ratio},       {"beta", rep.beta},         {"clean_clips", rep.clean_clips}};
    if (layouts.size() >= 2) {
        const auto sw = layout_sweep(sc, layouts, std::min(c.theory.batches, sc.trials));
        json lj = json::object();
        for (std::size_t i = 0; i < layouts.size(); ++i) lj[to_string(layouts[i])] = sw.mean_d10[i];
        j["layouts"] = lj;
        j["dominance"] = sw.dominance;
    }
    if (c.theory.hide_lengths.size() >= 4) {
        const auto g = growth_fit(sc, c.theory.hide_lengths);
        j["growth"] = {{"hide_lengths", g.hide_lengths},   {"mean_d10", g.mean_d10},
                       {"mean_d11", g.mean_d11},           {"slope_undefended", g.undefended.slope},
                       {"r2_undefended", g.undefended.r2}, {"slope_defended", g.defended.slope},
                       {"r2_defended", g.defended.r2},     {"slope_ratio", g.slope_ratio}};
    }
    write_json(c, "theory.json", j);
    std::cout << "mean |D10| " << num(rep.mean_d10) << "  mean |D11| " << num(rep.mean_d11) << "  mean |D01| "
              << num(rep.mean_d01) << "  ratio " << num(rep.ratio) << "\n";
    return 0;
}

int cmd_bench(const ExperimentConfig& c) {
    const auto rows = bench(c);
    auto f = open_out(c, "bench.csv");
    csv_header(f, c, "defense,frames,seconds,fps");
    for (const auto& r : rows) {
        f << r.mode << "," << r.frames << "," << num(r.seconds) << "," << num(r.fps) << "\n";
        std::cout << "defense " << r.mode << ": " << r.frames << " frames in " << num(r.seconds) << " s ("
                  << num(r.fps) << " fps)\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kalman-filter multi-object tracking with hijacking attacks and a deviation-clipping defense"};
    app.require_subcommand(1);
    Overrides o;
    std::string init_path;

    auto add_common = [&](CLI::App* s) {
        s->add_option("--config", o.config, "JSON experiment config");
        s->add_option("--seed", o.seed, "master seed");
        s->add_option("--out", o.out, "output directory");
        s->add_option("--profile", o.profile, "jia2d | apollo2d | ab3dmot | apollo3d");
        s->add_option("--defense", o.defense, "on | off | full | gaussian | elimination | outlier-unaware | axis-unaware");
        s->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
        s->add_option("--kitti", o.kitti, "directory of KITTI tracking label files");
    };

    auto* init = app.add_subcommand("init-config", "print the reference config with every default");
    init->add_option("--out", init_path, "write to this file instead of stdout");
    auto* track = app.add_subcommand("track", "run the tracker and dump trajectories");
    auto* eval = app.add_subcommand("evaluate", "CLEAR metrics against ground truth");
    auto* attack = app.add_subcommand("attack", "hijacking attack with and without the defense");
    auto* abl = app.add_subcommand("ablate", "attack across defense variants and alpha values");
    auto* theory = app.add_subcommand("theory", "Monte-Carlo checks of the deviation bounds");
    auto* bench_cmd = app.add_subcommand("bench", "tracking throughput with the defense off and on");
    for (auto* s : {track, eval, attack, abl, theory, bench_cmd}) add_common(s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (init->parsed()) {
            if (init_path.empty()) std::cout << reference_config();
            else {
                std::ofstream f(init_path);
                if (!f) throw InvalidArgument("cannot write " + init_path);
                f << reference_config();
            }
            return 0;
        }
        if (o.defense && *o.defense == "on") o.defense = "full";
        const ExperimentConfig c = resolve(o);
        if (track->parsed()) return cmd_track(c);
        if (eval->parsed()) return cmd_evaluate(c);
        if (attack->parsed()) return cmd_attack(c);
        if (abl->parsed()) return cmd_ablate(c);
        if (theory->parsed()) return cmd_theory(c);
        if (bench_cmd->parsed()) return cmd_bench(c);
    } catch (const kfmot::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
