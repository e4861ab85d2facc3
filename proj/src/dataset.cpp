#include "airtraj/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <stdexcept>

namespace fs = std::filesystem;

namespace airtraj::data {

std::vector<SequenceWindow> make_windows(const geo::Scene& scene, const HorizonConfig& cfg) {
    if (cfg.t_obs <= 0 || cfg.t_pred <= 0 || cfg.min_agents <= 0 || cfg.stride <= 0)
        throw std::invalid_argument("horizon config fields must be positive");

    const std::int64_t horizon = cfg.t_obs + cfg.t_pred;
    std::vector<SequenceWindow> windows;
    if (scene.duration_s() < horizon) return windows;

    for (std::int64_t start = scene.t0; start + horizon - 1 <= scene.t1;
         start += cfg.stride) {
        SequenceWindow w;
        w.scene_id = scene.scene_id;
        w.start_t = start;
        w.t_obs = cfg.t_obs;
        w.t_pred = cfg.t_pred;

        for (const auto& track : scene.agents) { // already sorted by id
            const auto& pts = track.points;
            auto it = std::lower_bound(pts.begin(), pts.end(), start,
                                       [](const geo::TrackPoint& p, std::int64_t t) { return p.t < t; });
            if (it == pts.end() || it->t != start) continue;
            const std::size_t base = static_cast<std::size_t>(it - pts.begin());
            if (base + static_cast<std::size_t>(horizon) > pts.size()) continue;
            // Strictly increasing integer times pinned at both ends force
            // consecutive coverage of every step in between.
            if (pts[base + static_cast<std::size_t>(horizon) - 1].t != start + horizon - 1) continue;
            w.agent_ids.push_back(track.agent_id);
            for (int k = 0; k < cfg.t_obs; ++k) {
                const auto& p = pts[base + static_cast<std::size_t>(k)];
                w.history.insert(w.history.end(), {p.x, p.y, p.z});
            }
            for (int k = 0; k < cfg.t_pred; ++k) {
                const auto& p = pts[base + static_cast<std::size_t>(cfg.t_obs + k)];
                w.future.insert(w.future.end(), {p.x, p.y, p.z});
            }
            for (int k = 0; k < cfg.t_obs; ++k) {
                const auto& wind = scene.wind.at(static_cast<std::size_t>(start + k - scene.t0));
                w.wind_hist.insert(w.wind_hist.end(), {wind.u_along, wind.u_cross});
            }
        }
        if (w.num_agents() >= cfg.min_agents) windows.push_back(std::move(w));
    }
    return windows;
}

std::vector<std::string> list_days(const std::string& dataset_root) {
    std::vector<std::string> days;
    if (!fs::is_directory(dataset_root))
        throw std::runtime_error("not a dataset directory: " + dataset_root);
    for (const auto& e : fs::directory_iterator(dataset_root))
        if (e.is_directory()) days.push_back(e.path().filename().string());
    std::sort(days.begin(), days.end());
    return days;
}

std::vector<std::string> list_scene_files(const std::string& dataset_root) {
    std::vector<std::string> files;
    if (!fs::is_directory(dataset_root))
        throw std::runtime_error("not a dataset directory: " + dataset_root);
    for (const auto& e : fs::directory_iterator(dataset_root)) {
        if (e.is_regular_file() && e.path().extension() == ".csv")
            files.push_back(e.path().string());
        else if (e.is_directory())
            for (const auto& f : fs::directory_iterator(e.path()))
                if (f.is_regular_file() && f.path().extension() == ".csv")
                    files.push_back(f.path().string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

DaySplit split_days(const std::string& dataset_root, const std::vector<std::string>& train_days,
                    const std::vector<std::string>& test_days) {
    std::set<std::string> train_set(train_days.begin(), train_days.end());
    for (const auto& d : test_days)
        if (train_set.count(d))
            throw std::runtime_error("day '" + d + "' appears in both train and test splits");

    const auto all = list_days(dataset_root);
    const std::set<std::string> known(all.begin(), all.end());
    auto collect = [&](const std::vector<std::string>& days) {
        std::vector<std::string> files;
        for (const auto& d : days) {
            if (!known.count(d)) throw std::runtime_error("unknown day '" + d + "'");
            for (const auto& f : fs::directory_iterator(fs::path(dataset_root) / d))
                if (f.is_regular_file() && f.path().extension() == ".csv")
                    files.push_back(f.path().string());
        }
        std::sort(files.begin(), files.end());
        return files;
    };

    return {collect(train_days), collect(test_days)};
}

std::vector<SequenceWindow> load_windows(const std::vector<std::string>& scene_files,
                                         const HorizonConfig& cfg) {
    std::vector<SequenceWindow> windows;
    for (const auto& path : scene_files) {
        const auto scenes = geo::read_scenes_file(path);
        for (const auto& scene : scenes) {
            auto scene_windows = make_windows(scene, cfg);
            windows.insert(windows.end(), std::make_move_iterator(scene_windows.begin()),
                           std::make_move_iterator(scene_windows.end()));
        }
    }
    return windows;
}

} // namespace airtraj::data
