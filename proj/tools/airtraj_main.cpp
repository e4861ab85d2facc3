#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "airtraj/config.hpp"
#include "airtraj/dataset.hpp"
#include "airtraj/diff/checkpoint.hpp"
#include "airtraj/geo.hpp"
#include "airtraj/ingest.hpp"
#include "airtraj/model.hpp"
#include "airtraj/plot.hpp"
#include "airtraj/synth.hpp"
#include "airtraj/train_eval.hpp"
#include "airtraj/version.hpp"

namespace fs = std::filesystem;
using namespace airtraj;

namespace {

struct CliError {
    std::string category;
    std::string message;
};

[[noreturn]] void fail(const std::string& category, const std::string& message) {
    throw CliError{category, message};
}

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

// defaults < config file < flags < environment
config::RunConfig resolve_config(const std::string& config_file,
                                 const std::vector<std::pair<std::string, std::string>>& flag_kv) {
    config::RunConfig run;
    if (!config_file.empty()) {
        if (!fs::exists(config_file)) fail("missing-input", "config file not found: " + config_file);
        try {
            run.kv.merge_from(config::KvConfig::from_file(config_file));
        } catch (const std::exception& e) {
            fail("bad-config", e.what());
        }
    }
    for (const auto& [k, v] : flag_kv) run.kv.set(k, v);
    if (const char* root = std::getenv("AIRTRAJ_DATA_ROOT"); root && *root)
        run.kv.set("data_root", root);
    return run;
}

std::string data_root_or(const config::RunConfig& run, const std::string& flag_value) {
    const std::string root = run.kv.get_str("data_root", flag_value);
    if (root.empty()) fail("missing-input", "no data directory given (--data or AIRTRAJ_DATA_ROOT)");
    if (!fs::is_directory(root)) fail("missing-input", "data directory not found: " + root);
    return root;
}

std::vector<std::string> select_scene_files(const std::string& root,
                                            const std::string& days_csv) {
    if (days_csv.empty()) return data::list_scene_files(root);
    std::vector<std::string> files;
    const auto days = split_list(days_csv);
    const auto split = data::split_days(root, days, {});
    return split.train_files;
}

std::vector<data::SequenceWindow> load_window_set(const std::string& root,
                                                  const std::string& days_csv,
                                                  const data::HorizonConfig& horizon) {
    const auto files = select_scene_files(root, days_csv);
    if (files.empty()) fail("missing-input", "no scene files under " + root);
    auto windows = data::load_windows(files, horizon);
    if (windows.empty())
        fail("missing-input", "no usable windows (scenes shorter than the horizon?)");
    return windows;
}

int cmd_process(const std::string& raw_dir, const std::string& metar_file,
                const config::RunConfig& run, const std::string& out_dir) {
    if (!fs::is_directory(raw_dir)) fail("missing-input", "raw directory not found: " + raw_dir);
    if (!fs::exists(metar_file)) fail("missing-input", "METAR file not found: " + metar_file);
    const geo::FrameConfig frame = run.frame();

    // Weather first: one shared, time-resolved report list.
    std::vector<ingest::MetarReport> reports;
    {
        std::ifstream in(metar_file, std::ios::binary);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line[0] == '#') continue;
            try {
                reports.push_back(ingest::parse_metar(line));
            } catch (const ingest::ParseError& e) {
                std::cerr << metar_file << ":" << line_no << ": " << e.message << "\n";
            }
        }
    }
    if (reports.empty()) fail("missing-input", "no parseable METAR reports in " + metar_file);

    std::vector<fs::path> raw_files;
    for (const auto& e : fs::directory_iterator(raw_dir)) {
        if (!e.is_regular_file()) continue;
        const auto ext = e.path().extension();
        if (ext == ".csv" || ext == ".txt") raw_files.push_back(e.path());
    }
    std::sort(raw_files.begin(), raw_files.end());
    if (raw_files.empty()) fail("missing-input", "no raw track files under " + raw_dir);

    // Resolve METAR day-of-month times against the recorded span.
    std::int64_t t_ref = 0;
    std::size_t n_ref = 0;
    for (const auto& path : raw_files) {
        std::ifstream in(path, std::ios::binary);
        for (const auto& rec : ingest::parse_track_log(in)) {
            t_ref += rec.timestamp;
            ++n_ref;
            break; // first record per file is enough for anchoring
        }
    }
    if (n_ref == 0) fail("missing-input", "raw files contain no records");
    ingest::resolve_metar_times(reports, t_ref / static_cast<std::int64_t>(n_ref));

    const std::string stamp = run.stamp();
    for (const auto& path : raw_files) {
        std::ifstream in(path, std::ios::binary);
        std::vector<ingest::Diagnostic> diags;
        auto records = ingest::parse_track_log(in, &diags);
        for (const auto& d : diags)
            std::cerr << path.string() << ":" << d.line << ": " << d.message << "\n";

        geo::CleanStats stats;
        records = geo::clean(records, &stats);

        // Localize, then crop to the region of interest.
        std::map<std::string, std::vector<geo::TrackPoint>> per_aircraft;
        std::size_t outside = 0;
        for (const auto& rec : records) {
            geo::TrackPoint p;
            try {
                geo::to_local(rec, frame, &p.x, &p.y, &p.z);
            } catch (const std::exception&) {
                ++outside;
                continue;
            }
            p.t = rec.timestamp;
            p.agent_id = rec.aircraft_id;
            per_aircraft[rec.aircraft_id].push_back(std::move(p));
        }

        std::vector<geo::TrackPoint> all_points;
        for (auto& [id, pts] : per_aircraft) {
            const auto kept = geo::crop_region(pts, frame);
            for (const auto& track : geo::interpolate_1hz(id, kept, frame.gap_split_s))
                all_points.insert(all_points.end(), track.points.begin(), track.points.end());
        }

        auto scenes = geo::segment_scenes(all_points, frame);
        for (auto& scene : scenes) geo::attach_wind(scene, reports, frame.axis_azimuth_deg);

        const std::string stem = path.stem().string();
        const fs::path day_dir = fs::path(out_dir) / stem;
        fs::create_directories(day_dir);
        geo::write_scenes_file((day_dir / "scenes.csv").string(), scenes, stamp);

        std::cerr << path.string() << ": " << records.size() << " records ("
                  << stats.bad_position << " bad, " << stats.duplicates << " duplicate, "
                  << outside << " outside frame), " << scenes.size() << " scenes\n";
    }
    return 0;
}

int cmd_synth(const config::RunConfig& run, int scenes, int scenes_per_day,
              const std::string& out_dir) {
    synth::PatternSpec spec;
    try {
        spec = run.pattern();
    } catch (const std::exception& e) {
        fail("bad-config", e.what());
    }
    try {
        synth::generate_corpus(spec, scenes, run.seed(), out_dir, scenes_per_day, run.stamp());
    } catch (const std::invalid_argument& e) {
        fail("bad-config", e.what());
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        fail(msg.find("infeasible") != std::string::npos ? "infeasible" : "io-error", msg);
    }
    return 0;
}

int cmd_train(const config::RunConfig& run, const std::string& data_flag, const std::string& days,
              int epochs, double lr, std::size_t max_steps, std::size_t limit_windows,
              const std::string& out_path) {
    const std::string root = data_root_or(run, data_flag);
    auto windows = load_window_set(root, days, run.horizon());

    if (limit_windows && windows.size() > limit_windows) {
        Rng rng(run.seed());
        for (std::size_t i = windows.size(); i > 1; --i)
            std::swap(windows[i - 1],
                      windows[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
        windows.resize(limit_windows);
    }

    model::TrajectoryModel net(run.model(), run.seed());

    train_eval::TrainOptions opts;
    opts.epochs = epochs;
    opts.seed = run.seed();
    opts.learning_rate = lr;
    opts.max_steps = max_steps;
    std::size_t report_every = std::max<std::size_t>(1, windows.size() / 4);
    opts.on_step = [&](std::size_t step, const train_eval::LossReport& r) {
        if (step % report_every == 0)
            std::cerr << "step " << step << ": total=" << r.l_total << " traj=" << r.l_traj
                      << " cvae=" << r.l_cvae << "\n";
    };

    try {
        train_eval::train(net, windows, opts, out_path + ".diag");
    } catch (const train_eval::TrainAbort& e) {
        fail("internal", std::string(e.what()) +
                             (e.checkpoint_path.empty() ? "" : " (diagnostic checkpoint at " +
                                                                  e.checkpoint_path + ")"));
    }

    auto ckpt = net.to_checkpoint({{"version", kVersion},
                                   {"config_hash", run.config_hash()},
                                   {"seed", std::to_string(run.seed())},
                                   {"epochs", std::to_string(epochs)},
                                   {"n_windows", std::to_string(windows.size())}});
    diff::save_checkpoint(out_path, ckpt);
    std::cerr << "checkpoint written: " << out_path << " (" << windows.size() << " windows)\n";
    return 0;
}

model::TrajectoryModel load_model(const std::string& ckpt_path, const config::RunConfig& run,
                                  bool config_given) {
    if (!fs::exists(ckpt_path)) fail("missing-input", "checkpoint not found: " + ckpt_path);
    diff::Checkpoint ckpt;
    try {
        ckpt = diff::load_checkpoint(ckpt_path);
    } catch (const std::exception& e) {
        fail("io-error", e.what());
    }
    auto net = model::TrajectoryModel::from_checkpoint(ckpt);
    if (config_given) {
        // A config that contradicts the checkpoint's recorded architecture is an error.
        const auto requested = run.model();
        if (requested.to_string() != net.config().to_string())
            fail("bad-config", "config/checkpoint mismatch: model section differs from " + ckpt_path);
    }
    return net;
}

int cmd_predict(const config::RunConfig& run, bool config_given, const std::string& ckpt_path,
                const std::string& data_flag, const std::string& days, int n_samples,
                std::size_t window_index, const std::string& out_path) {
    auto net = load_model(ckpt_path, run, config_given);

    data::HorizonConfig horizon = run.horizon();
    horizon.t_obs = net.config().t_obs;
    horizon.t_pred = net.config().t_pred;
    const std::string root = data_root_or(run, data_flag);
    const auto windows = load_window_set(root, days, horizon);
    if (window_index >= windows.size())
        fail("missing-input", "window index " + std::to_string(window_index) + " out of range (" +
                                  std::to_string(windows.size()) + " windows)");
    const auto& w = windows[window_index];

    const auto samples = train_eval::predict(net, w, n_samples, run.seed());

    plot::WindowPrediction wp;
    wp.scene_id = w.scene_id;
    wp.start_t = w.start_t;
    wp.t_obs = w.t_obs;
    wp.t_pred = w.t_pred;
    for (int a = 0; a < w.num_agents(); ++a) {
        plot::AgentPrediction ap;
        ap.id = w.agent_ids[static_cast<std::size_t>(a)];
        ap.history.assign(w.history_of(a), w.history_of(a) + static_cast<std::size_t>(w.t_obs) * 3);
        ap.truth.assign(w.future_of(a), w.future_of(a) + static_cast<std::size_t>(w.t_pred) * 3);
        double best_ade = -1.0;
        for (std::size_t n = 0; n < samples.size(); ++n) {
            const auto& pos = samples[n].positions[static_cast<std::size_t>(a)];
            ap.samples.push_back(pos);
            const auto [ade, fde] = train_eval::ade_fde(pos, ap.truth);
            if (best_ade < 0.0 || ade < best_ade) {
                best_ade = ade;
                ap.best_index = static_cast<int>(n);
            }
        }
        wp.agents.push_back(std::move(ap));
    }

    nlohmann::json j;
    j["version"] = kVersion;
    j["config_hash"] = run.config_hash();
    j["seed"] = run.seed();
    j["n_samples"] = n_samples;
    j["window"] = plot::window_to_json(wp);

    std::ofstream out(out_path, std::ios::binary);
    if (!out) fail("io-error", "cannot write " + out_path);
    out << j.dump(2) << "\n";
    return 0;
}

int cmd_eval(const config::RunConfig& run, bool config_given, const std::string& ckpt_path,
             const std::string& baseline, const std::string& data_flag, const std::string& days,
             const std::string& train_data, const std::string& train_days, int n_samples,
             const std::string& out_path) {
    data::HorizonConfig horizon = run.horizon();

    std::optional<model::TrajectoryModel> net;
    if (!baseline.empty() && !ckpt_path.empty())
        fail("bad-config", "give either --ckpt or --baseline, not both");
    if (baseline.empty() && ckpt_path.empty())
        fail("bad-config", "one of --ckpt or --baseline is required");
    if (!ckpt_path.empty()) {
        net = load_model(ckpt_path, run, config_given);
        horizon.t_obs = net->config().t_obs;
        horizon.t_pred = net->config().t_pred;
    }

    const std::string root = data_root_or(run, data_flag);
    const auto files = select_scene_files(root, days);
    if (files.empty()) fail("missing-input", "no scene files under " + root);
    const auto windows = data::load_windows(files, horizon);
    if (windows.empty()) fail("missing-input", "no usable windows under " + root);

    train_eval::Predictor predictor;
    std::string algorithm;
    if (net) {
        predictor = train_eval::model_predictor(*net);
        algorithm = "model";
    } else if (baseline == "const-velocity") {
        predictor = train_eval::const_velocity_predictor(horizon.t_pred);
        algorithm = "const-velocity";
    } else if (baseline == "nearest-neighbor") {
        if (train_data.empty())
            fail("bad-config", "--baseline nearest-neighbor requires --train-data");
        const auto train_windows =
            load_window_set(train_data, train_days, horizon);
        predictor = train_eval::nearest_neighbor_predictor(train_eval::build_index(train_windows));
        algorithm = "nearest-neighbor";
    } else {
        fail("bad-config", "unknown baseline '" + baseline + "'");
    }

    const auto result = train_eval::evaluate(predictor, windows, n_samples, run.seed());

    nlohmann::json j;
    j["version"] = kVersion;
    j["config_hash"] = run.config_hash();
    j["dataset_fingerprint"] = config::dataset_fingerprint(files);
    j["algorithm"] = algorithm;
    j["ade_km"] = result.ade_km;
    j["fde_km"] = result.fde_km;
    j["n_samples"] = result.n_samples;
    j["n_windows"] = result.n_windows;
    j["n_agents"] = result.n_agents;
    j["seed"] = run.seed();
    j["t_obs"] = horizon.t_obs;
    j["t_pred"] = horizon.t_pred;

    std::ofstream out(out_path, std::ios::binary);
    if (!out) fail("io-error", "cannot write " + out_path);
    out << j.dump(2) << "\n";
    std::cout << "ADE/FDE (km): " << result.ade_km << "/" << result.fde_km << " over "
              << result.n_agents << " agents in " << result.n_windows << " windows\n";
    return 0;
}

int cmd_plot(const config::RunConfig& run, const std::string& scene_file, int scene_index,
             const std::string& pred_file, std::size_t window_index, const std::string& out_path) {
    if (scene_file.empty() == pred_file.empty())
        fail("bad-config", "give exactly one of --scene or --pred");

    std::string svg;
    if (!scene_file.empty()) {
        if (!fs::exists(scene_file)) fail("missing-input", "scene file not found: " + scene_file);
        const auto scenes = geo::read_scenes_file(scene_file);
        if (scenes.empty()) fail("missing-input", "no scenes in " + scene_file);
        if (scene_index < 0 || static_cast<std::size_t>(scene_index) >= scenes.size())
            fail("missing-input", "scene index out of range");
        svg = plot::render_scene_svg(scenes[static_cast<std::size_t>(scene_index)], run.stamp());
    } else {
        if (!fs::exists(pred_file)) fail("missing-input", "prediction file not found: " + pred_file);
        std::ifstream in(pred_file, std::ios::binary);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const std::exception& e) {
            fail("parse-error", std::string("bad prediction JSON: ") + e.what());
        }
        (void)window_index; // single-window prediction files
        svg = plot::render_prediction_svg(plot::window_from_json(j.at("window")), run.stamp());
    }

    std::ofstream out(out_path, std::ios::binary);
    if (!out) fail("io-error", "cannot write " + out_path);
    out << svg;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(kVersion) +
                 " - aircraft trajectory datasets, prediction and evaluation"};
    app.require_subcommand(1);

    std::string config_file;
    app.add_option("--config", config_file, "key = value configuration file")->capture_default_str();

    // Flag values that map onto configuration keys.
    std::vector<std::pair<std::string, std::string>> flag_kv;
    auto add_kv_option = [&](CLI::App* cmd, const std::string& flag, const std::string& key,
                             const std::string& help) {
        auto holder = std::make_shared<std::string>();
        cmd->add_option_function<std::string>(
               flag, [&flag_kv, key](const std::string& v) { flag_kv.emplace_back(key, v); }, help)
            ->expected(1);
        (void)holder;
    };

    // process
    auto* process = app.add_subcommand("process", "raw ADS-B logs + METAR into scene files");
    std::string raw_dir, metar_file, out_dir;
    process->add_option("--raw", raw_dir, "directory of raw track CSV files")->required();
    process->add_option("--metar", metar_file, "METAR text file, one report per line")->required();
    process->add_option("--out", out_dir, "output dataset directory")->required();
    add_kv_option(process, "--origin-lat", "frame.origin_lat", "frame origin latitude");
    add_kv_option(process, "--origin-lon", "frame.origin_lon", "frame origin longitude");
    add_kv_option(process, "--axis-azimuth", "frame.axis_azimuth_deg", "runway axis, degrees true");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic traffic-pattern corpus");
    int scenes = 5, scenes_per_day = 50;
    std::string synth_out;
    synth_cmd->add_option("--scenes", scenes, "number of scenes")->capture_default_str();
    synth_cmd->add_option("--scenes-per-day", scenes_per_day, "scenes per day directory")
        ->capture_default_str();
    synth_cmd->add_option("--out", synth_out, "output dataset directory")->required();
    synth_cmd->add_option("--spec", config_file, "pattern spec file (synth.* keys)");
    add_kv_option(synth_cmd, "--seed", "seed", "random seed");

    // train
    auto* train_cmd = app.add_subcommand("train", "train the prediction model");
    std::string train_data, train_days_opt, ckpt_out;
    int epochs = 1;
    double lr = 1e-4;
    std::size_t max_steps = 0, limit_windows = 0;
    train_cmd->add_option("--data", train_data, "scene dataset directory");
    train_cmd->add_option("--days", train_days_opt, "comma-separated day names");
    train_cmd->add_option("--epochs", epochs, "training epochs")->capture_default_str();
    train_cmd->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    train_cmd->add_option("--max-steps", max_steps, "cap on optimizer steps (0 = none)");
    train_cmd->add_option("--limit-windows", limit_windows, "cap on training windows (0 = none)");
    train_cmd->add_option("--out", ckpt_out, "checkpoint output path")->required();
    add_kv_option(train_cmd, "--seed", "seed", "random seed");
    add_kv_option(train_cmd, "--stride", "horizon.stride", "window stride, seconds");
    add_kv_option(train_cmd, "--t-obs", "horizon.t_obs", "observation horizon, seconds");
    add_kv_option(train_cmd, "--t-pred", "horizon.t_pred", "prediction horizon, seconds");

    // predict
    auto* predict_cmd = app.add_subcommand("predict", "sample futures for one window");
    std::string pred_ckpt, pred_data, pred_days, pred_out;
    int pred_n = 5;
    std::size_t window_index = 0;
    predict_cmd->add_option("--ckpt", pred_ckpt, "model checkpoint")->required();
    predict_cmd->add_option("--data", pred_data, "scene dataset directory");
    predict_cmd->add_option("--days", pred_days, "comma-separated day names");
    predict_cmd->add_option("--n", pred_n, "samples per agent")->capture_default_str();
    predict_cmd->add_option("--window", window_index, "window index")->capture_default_str();
    predict_cmd->add_option("--out", pred_out, "prediction JSON output")->required();
    add_kv_option(predict_cmd, "--seed", "seed", "random seed");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "ADE/FDE best-of-N evaluation");
    std::string eval_ckpt, eval_baseline, eval_data, eval_days, eval_train_data, eval_train_days,
        report_out;
    int eval_n = 5;
    eval_cmd->add_option("--ckpt", eval_ckpt, "model checkpoint");
    eval_cmd->add_option("--baseline", eval_baseline, "const-velocity or nearest-neighbor");
    eval_cmd->add_option("--data", eval_data, "scene dataset directory");
    eval_cmd->add_option("--days", eval_days, "comma-separated day names");
    eval_cmd->add_option("--train-data", eval_train_data, "training data for nearest-neighbor");
    eval_cmd->add_option("--train-days", eval_train_days, "day filter for --train-data");
    eval_cmd->add_option("--n", eval_n, "samples per agent")->capture_default_str();
    eval_cmd->add_option("--out", report_out, "report JSON output")->required();
    add_kv_option(eval_cmd, "--seed", "seed", "random seed");
    add_kv_option(eval_cmd, "--stride", "horizon.stride", "window stride, seconds");
    add_kv_option(eval_cmd, "--t-obs", "horizon.t_obs", "observation horizon, seconds");
    add_kv_option(eval_cmd, "--t-pred", "horizon.t_pred", "prediction horizon, seconds");

    // plot
    auto* plot_cmd = app.add_subcommand("plot", "render a scene or prediction as SVG");
    std::string plot_scene, plot_pred, plot_out;
    int scene_index = 0;
    std::size_t plot_window = 0;
    plot_cmd->add_option("--scene", plot_scene, "scene CSV file");
    plot_cmd->add_option("--scene-index", scene_index, "scene within the file")
        ->capture_default_str();
    plot_cmd->add_option("--pred", plot_pred, "prediction JSON from `predict`");
    plot_cmd->add_option("--window", plot_window, "window within the prediction file");
    plot_cmd->add_option("--out", plot_out, "SVG output path")->required();

    for (CLI::App* sub : {process, synth_cmd, train_cmd, predict_cmd, eval_cmd, plot_cmd})
        if (!sub->get_option_no_throw("--config"))
            sub->add_option("--config", config_file, "key = value configuration file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // prints help, exit 0
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e); // prints the error and usage hint
        return 2;
    }

    try {
        const config::RunConfig run = resolve_config(config_file, flag_kv);
        if (process->parsed()) return cmd_process(raw_dir, metar_file, run, out_dir);
        if (synth_cmd->parsed()) return cmd_synth(run, scenes, scenes_per_day, synth_out);
        if (train_cmd->parsed())
            return cmd_train(run, train_data, train_days_opt, epochs, lr, max_steps, limit_windows,
                             ckpt_out);
        if (predict_cmd->parsed())
            return cmd_predict(run, !config_file.empty(), pred_ckpt, pred_data, pred_days, pred_n,
                               window_index, pred_out);
        if (eval_cmd->parsed())
            return cmd_eval(run, !config_file.empty(), eval_ckpt, eval_baseline, eval_data,
                            eval_days, eval_train_data, eval_train_days, eval_n, report_out);
        if (plot_cmd->parsed())
            return cmd_plot(run, plot_scene, scene_index, plot_pred, plot_window, plot_out);
        std::cerr << app.help();
        return 2;
    } catch (const CliError& e) {
        std::cerr << "airtraj: error [" << e.category << "]: " << e.message << "\n";
        return 1;
    } catch (const ingest::ParseError& e) {
        std::cerr << "airtraj: error [parse-error]: " << e.message << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "airtraj: error [bad-config]: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "airtraj: error [internal]: " << e.what() << "\n";
        return 1;
    }
}
