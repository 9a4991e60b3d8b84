// vivrl: experiment runner. Every subcommand reads a key = value config,
// writes its artifacts under the output root and names them with the
// subcommand, config hash and seed.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vivrl/analysis.hpp"
#include "vivrl/baseline.hpp"
#include "vivrl/calibration.hpp"
#include "vivrl/config.hpp"
#include "vivrl/control_loop.hpp"
#include "vivrl/parallel.hpp"
#include "vivrl/plant.hpp"

namespace fs = std::filesystem;
using namespace vivrl;

namespace {

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<int> episodes;
    std::optional<double> duration;
    std::optional<int> n_past;
    std::string checkpoint;
    int jobs = 1;
};

config::ExperimentConfig load(const Options &o) {
    config::ExperimentConfig c = config::load(o.config_path);
    if (o.seed) c.seed = *o.seed;
    if (!o.out.empty()) c.output_dir = o.out;
    if (o.episodes) c.episodes = *o.episodes;
    if (o.duration) c.episode.eval_duration_s = *o.duration;
    if (o.n_past) c.n_past_actions = *o.n_past;
    config::validate(c);
    fs::create_directories(config::output_root(c));
    return c;
}

std::ofstream open_out(const fs::path &p) {
    std::ofstream os(p);
    if (!os) throw ConfigError("cannot write " + p.string());
    return os;
}

void announce(const fs::path &p) { std::cout << "wrote " << p.string() << '\n'; }

// ---------------------------------------------------------------------------

int cmd_calibrate(const Options &o) {
    const auto c = load(o);
    const auto base = config::plant_params(c);
    std::cout << "calibrating: " << c.grid.vdp_epsilon.size() * c.grid.coupling_A.size() *
                                          c.grid.base_lift_coeff.size() * c.grid.fluid_damping_coeff.size()
              << " wake candidates, " << c.grid.rotation_coupling.size() << " rotation couplings\n";
    const auto rep = calib::calibrate(base, c.lock_in, c.lock_on, c.grid, config::motor_params(c), c.pid, o.jobs);
    const std::string hash = config::config_hash(c);

    const auto cand_path = config::artifact_path(c, "calibrate", "lockin_candidates", "csv");
    {
        auto os = open_out(cand_path);
        calib::write_lock_in_candidates_csv(os, rep);
    }
    announce(cand_path);
    const auto report_path = config::artifact_path(c, "calibrate", "report", "txt");
    {
        auto os = open_out(report_path);
        os << "subcommand = calibrate\nconfig_hash = " << hash << "\nseed = " << c.seed << '\n';
        os << "success = " << (rep.success ? "true" : "false") << "\nmessage = " << rep.message << '\n';
        os << "lock_in.peak_a_over_d = " << rep.lock_in.peak_a_over_d << "\nlock_in.peak_u = " << rep.lock_in.peak_u
           << "\nlock_in.band = " << rep.lock_in.band_lo_u << ".." << rep.lock_in.band_hi_u << '\n';
        for (const auto &p : rep.lock_in.sweep) os << "lock_in.U" << p.x << " = " << p.a_over_d << '\n';
        os << "lock_on.rotation_coupling = " << rep.lock_on.rotation_coupling << "\nlock_on.note = " << rep.lock_on.note
           << '\n';
        for (const auto &p : rep.lock_on.sweep)
            os << "lock_on.ratio" << p.ratio << " = " << p.a_over_d << " (tracking rms " << p.tracking_rms << ")\n";
        config::write_calibration(os << "# calibrated parameters\n", rep.wake, hash, c.seed);
    }
    announce(report_path);
    std::cout << rep.message << '\n';
    if (!rep.success) return 2;

    const auto params_path = config::calibration_path(c);
    if (params_path.has_parent_path()) fs::create_directories(params_path.parent_path());
    {
        auto os = open_out(params_path);
        config::write_calibration(os, rep.wake, hash, c.seed);
    }
    announce(params_path);
    return 0;
}

int cmd_decay(const Options &o) {
    const auto c = load(o);
    const auto p = config::plant_params(c);
    const double y0 = 0.5 * p.cylinder.diameter_m;
    const auto path = config::artifact_path(c, "decay", "identification", "csv");
    auto os = open_out(path);
    os << "medium,frequency_hz,zeta,peaks_used\n";
    os.precision(10);
    for (auto m : {plant::Medium::water, plant::Medium::air}) {
        const auto r = plant::free_decay(m, y0, p);
        const char *name = m == plant::Medium::water ? "water" : "air";
        os << name << ',' << r.frequency_hz << ',' << r.zeta << ',' << r.peaks_used << '\n';
        std::cout << name << ": f = " << r.frequency_hz << " Hz, zeta = " << r.zeta << '\n';
    }
    announce(path);
    return 0;
}

int cmd_lockin_sweep(const Options &o) {
    const auto c = config::with_calibration(load(o));
    const auto p = config::plant_params(c);
    const auto &u = c.lock_in.u_grid;
    auto pts = parallel_map(u.size(), o.jobs, [&](std::size_t i) {
        return plant::amplitude_sweep(std::span<const double>(&u[i], 1), p).front();
    });
    const auto path = config::artifact_path(c, "lockin-sweep", "amplitude", "csv");
    auto os = open_out(path);
    os << "u,a_over_d\n";
    os.precision(10);
    for (const auto &pt : pts) {
        os << pt.x << ',' << pt.a_over_d << '\n';
        std::cout << "U = " << pt.x << "  A/D = " << pt.a_over_d << '\n';
    }
    announce(path);
    return 0;
}

int cmd_sine_sweep(const Options &o) {
    const auto c = config::with_calibration(load(o));
    const auto setup = config::lock_on_setup(c);
    const auto &r = c.lock_on.ratios;
    auto pts = parallel_map(r.size(), o.jobs, [&](std::size_t i) { return baseline::lock_on_run(r[i], setup).point; });
    const auto path = config::artifact_path(c, "sine-sweep", "lockon", "csv");
    auto os = open_out(path);
    baseline::write_sweep_csv(os, pts);
    for (const auto &pt : pts)
        std::cout << "f_r/f_n = " << pt.ratio << "  A/D = " << pt.a_over_d << "  tracking rms = " << pt.tracking_rms
                  << '\n';
    announce(path);
    return 0;
}

fs::path checkpoint_path(const config::ExperimentConfig &c, const std::string &which) {
    return config::artifact_path(c, "train", "policy_" + which, "ckpt");
}

int cmd_train(const Options &o) {
    const auto c = config::with_calibration(load(o));
    const auto tc = config::train_config(c);
    const auto lc = loop::develop_limit_cycle(tc.env);
    std::cout << "uncontrolled A/D = " << lc.amplitude_over_d << ", n_past = " << c.n_past_actions
              << ", episodes = " << c.episodes << ", seed = " << c.seed << '\n';
    const auto res = loop::train(tc, lc, [](const loop::EpisodeLog &e) {
        if ((e.episode + 1) % 25 == 0)
            std::cout << "episode " << e.episode + 1 << "  reward " << e.mean_reward << "  mean alpha "
                      << e.mean_alpha << "  f/f_n " << e.dominant_freq_ratio << '\n';
    });
    const auto log_path = config::artifact_path(c, "train", "log", "csv");
    {
        auto os = open_out(log_path);
        loop::write_training_log(os, res.log);
    }
    announce(log_path);
    config::CheckpointMeta meta{static_cast<std::uint32_t>(tc.env.obs.dim()),
                                static_cast<std::uint32_t>(c.n_past_actions), c.seed, config::config_hash(c),
                                static_cast<std::int32_t>(res.log.size())};
    if (res.final_policy) {
        config::save_checkpoint(checkpoint_path(c, "final"), *res.final_policy, meta);
        announce(checkpoint_path(c, "final"));
    }
    if (res.best_policy) {
        config::save_checkpoint(checkpoint_path(c, "best"), *res.best_policy, meta);
        announce(checkpoint_path(c, "best"));
    }
    if (!res.log.empty())
        std::cout << "final-50 mean reward " << res.final_mean_reward() << ", mean alpha " << res.final_mean_alpha()
                  << '\n';
    if (res.halted) {
        std::cerr << "training halted: " << res.halt_reason << '\n';
        return 3;
    }
    return 0;
}

int cmd_eval(const Options &o) {
    const auto c = config::with_calibration(load(o));
    // --duration changes the hash; the policy was trained under the file's value.
    auto trained = c;
    trained.episode.eval_duration_s = config::load(o.config_path).episode.eval_duration_s;
    const fs::path ck_path = o.checkpoint.empty() ? checkpoint_path(trained, "final") : fs::path(o.checkpoint);
    const auto ck = config::load_checkpoint(ck_path);
    const auto env = config::environment(c);
    if (ck.policy.obs_dim() != env.obs.dim())
        throw ShapeError("checkpoint observation dimension " + std::to_string(ck.policy.obs_dim()) +
                         " does not match the configured n_past (" + std::to_string(env.obs.dim()) + ")");
    const auto lc = loop::develop_limit_cycle(env);
    const auto rec =
        loop::evaluate_deterministic(env, ck.policy, lc, c.episode.eval_duration_s, c.episode.eval_lead_in_s);
    const auto s = loop::summarize_evaluation(rec, c.episode.eval_lead_in_s, lc.amplitude_over_d, env.obs.fn_hz);
    const auto rec_path = config::artifact_path(c, "eval", "record", "csv");
    {
        auto os = open_out(rec_path);
        write_csv(os, rec);
    }
    announce(rec_path);
    const auto sum_path = config::artifact_path(c, "eval", "summary", "csv");
    {
        auto os = open_out(sum_path);
        os.precision(10);
        os << "controlled_a_over_d,uncontrolled_a_over_d,suppression,mean_alpha,dominant_freq_ratio\n"
           << s.controlled_a_over_d << ',' << s.uncontrolled_a_over_d << ',' << s.suppression << ',' << s.mean_alpha
           << ',' << s.dominant_freq_ratio << '\n';
    }
    announce(sum_path);
    std::cout << "controlled A/D " << s.controlled_a_over_d << " (uncontrolled " << s.uncontrolled_a_over_d
              << "), suppression " << s.suppression << ", mean alpha " << s.mean_alpha << ", actuation f/f_n "
              << s.dominant_freq_ratio << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// report

using Table = std::vector<std::map<std::string, double>>;

std::optional<Table> read_table(const fs::path &p) {
    std::ifstream is(p);
    if (!is) return std::nullopt;
    std::string line;
    if (!std::getline(is, line)) return Table{};
    std::vector<std::string> cols;
    {
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) cols.push_back(f);
    }
    Table t;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f;
        std::map<std::string, double> row;
        for (std::size_t i = 0; i < cols.size() && std::getline(ss, f, ','); ++i) row[cols[i]] = std::stod(f);
        t.push_back(std::move(row));
    }
    return t;
}

struct ReportLine {
    std::string figure, metric, source;
    double value;
};

int cmd_report(const Options &o) {
    const auto base = config::with_calibration(load(o));
    std::vector<ReportLine> lines;
    std::vector<std::string> missing;
    auto add = [&](const std::string &fig, const std::string &metric, double v, const fs::path &src) {
        lines.push_back({fig, metric, src.filename().string(), v});
    };

    const auto lockin = config::artifact_path(base, "lockin-sweep", "amplitude", "csv");
    if (auto t = read_table(lockin); t && !t->empty()) {
        const auto peak = *std::max_element(t->begin(), t->end(),
                                            [](auto &a, auto &b) { return a.at("a_over_d") < b.at("a_over_d"); });
        add("fig4a", "peak_a_over_d", peak.at("a_over_d"), lockin);
        add("fig4a", "peak_u", peak.at("u"), lockin);
    } else {
        missing.push_back("fig4a (run lockin-sweep)");
    }

    const auto sine = config::artifact_path(base, "sine-sweep", "lockon", "csv");
    if (auto t = read_table(sine); t && !t->empty()) {
        const auto peak = *std::max_element(t->begin(), t->end(),
                                            [](auto &a, auto &b) { return a.at("a_over_d") < b.at("a_over_d"); });
        add("fig8", "peak_ratio", peak.at("ratio"), sine);
        add("fig8", "peak_a_over_d", peak.at("a_over_d"), sine);
        for (const auto &row : *t)
            add("fig8", "a_over_d_at_" + config::detail::fmt(row.at("ratio")), row.at("a_over_d"), sine);
    } else {
        missing.push_back("fig8 (run sine-sweep)");
    }

    // Training and evaluation artifacts for each history length; the
    // configured n_past feeds fig6/fig7, n = 0 vs n = 2 feeds fig10/fig11.
    for (int n = 0; n <= 2; ++n) {
        auto c = base;
        c.n_past_actions = n;
        const std::string tag = "n" + std::to_string(n);
        const auto log = config::artifact_path(c, "train", "log", "csv");
        if (auto t = read_table(log); t && !t->empty()) {
            const std::size_t k = std::min<std::size_t>(50, t->size());
            double r = 0, a = 0, f = 0;
            for (std::size_t i = t->size() - k; i < t->size(); ++i) {
                r += (*t)[i].at("mean_reward");
                a += (*t)[i].at("mean_alpha");
                f += (*t)[i].at("dominant_freq_ratio");
            }
            const double kd = static_cast<double>(k);
            if (n == base.n_past_actions) {
                add("fig6", "final50_mean_reward", r / kd, log);
                add("fig6", "final50_mean_alpha", a / kd, log);
            }
            add("fig10", tag + "_final50_mean_reward", r / kd, log);
            add("fig10", tag + "_final50_freq_ratio", f / kd, log);
        } else if (n != 1) {
            missing.push_back("fig10 " + tag + " (run train --n-past " + std::to_string(n) + ")");
        }
        const auto ev = config::artifact_path(c, "eval", "summary", "csv");
        if (auto t = read_table(ev); t && !t->empty()) {
            const auto &row = t->front();
            if (n == base.n_past_actions) {
                add("fig7", "suppression", row.at("suppression"), ev);
                add("fig7", "controlled_a_over_d", row.at("controlled_a_over_d"), ev);
            }
            add("fig11", tag + "_suppression", row.at("suppression"), ev);
            add("fig11", tag + "_freq_ratio", row.at("dominant_freq_ratio"), ev);
        } else if (n != 1) {
            missing.push_back("fig11 " + tag + " (run eval --n-past " + std::to_string(n) + ")");
        }
    }

    const auto csv_path = config::artifact_path(base, "report", "summary", "csv");
    {
        auto os = open_out(csv_path);
        os.precision(10);
        os << "figure,metric,value,source\n";
        for (const auto &l : lines) os << l.figure << ',' << l.metric << ',' << l.value << ',' << l.source << '\n';
    }
    announce(csv_path);
    const auto txt_path = config::artifact_path(base, "report", "summary", "txt");
    {
        auto os = open_out(txt_path);
        os << "subcommand = report\nconfig_hash = " << config::config_hash(base) << "\nseed = " << base.seed << "\n\n";
        std::string fig;
        for (const auto &l : lines) {
            if (l.figure != fig) os << '[' << (fig = l.figure) << "]\n";
            os << "  " << l.metric << " = " << l.value << '\n';
        }
        if (!missing.empty()) {
            os << "[missing]\n";
            for (const auto &m : missing) os << "  " << m << '\n';
        }
    }
    announce(txt_path);
    std::ifstream echo(txt_path);
    std::cout << echo.rdbuf();
    return lines.empty() ? 4 : 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Rotary-cylinder VIV control experiments"};
    app.require_subcommand(1);
    Options o;
    auto common = [&](CLI::App *sub) {
        sub->add_option("--config", o.config_path, "Experiment config file (key = value)")->required();
        sub->add_option("--seed", o.seed, "Override the config seed");
        sub->add_option("--out", o.out, "Output directory (default: $VIVRL_OUT or ./vivrl_out)");
        sub->add_option("--n-past", o.n_past, "Past actions in the observation")->check(CLI::Range(0, 2));
        sub->add_option("--jobs", o.jobs, "Worker threads for sweeps and calibration")->check(CLI::Range(1, 256));
    };
    auto *calibrate = app.add_subcommand("calibrate", "Fit the wake model to the lock-in and lock-on targets");
    auto *decay = app.add_subcommand("decay", "Free-decay identification in water and air");
    auto *lockin = app.add_subcommand("lockin-sweep", "Uncontrolled amplitude over reduced velocity");
    auto *sine = app.add_subcommand("sine-sweep", "Open-loop sinusoidal rotation over frequency ratios");
    auto *train = app.add_subcommand("train", "Train a PPO controller");
    auto *eval = app.add_subcommand("eval", "Deterministic evaluation of a trained controller");
    auto *report = app.add_subcommand("report", "Summarize the artifacts of this config and seed");
    for (auto *s : {calibrate, decay, lockin, sine, train, eval, report}) common(s);
    for (auto *s : {train, eval, report})
        s->add_option("--episodes", o.episodes, "Training episodes (part of the config hash)")
            ->check(CLI::NonNegativeNumber);
    eval->add_option("--duration", o.duration, "Evaluation length in seconds")->check(CLI::PositiveNumber);
    eval->add_option("--checkpoint", o.checkpoint, "Checkpoint file (default: this config's final policy)");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*calibrate) return cmd_calibrate(o);
        if (*decay) return cmd_decay(o);
        if (*lockin) return cmd_lockin_sweep(o);
        if (*sine) return cmd_sine_sweep(o);
        if (*train) return cmd_train(o);
        if (*eval) return cmd_eval(o);
        if (*report) return cmd_report(o);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
