#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "airtraj/geo.hpp"

namespace airtraj::data {

// One training/eval sample: every listed agent covers all t_obs + t_pred steps.
// Position arrays are flattened [agent][step][axis], absolute meters; wind is
// replicated per agent, [agent][step][2].
struct SequenceWindow {
    int scene_id = 0;
    std::int64_t start_t = 0;
    int t_obs = 0;
    int t_pred = 0;
    std::vector<std::string> agent_ids; // lexicographic
    std::vector<double> history;        // A * t_obs * 3
    std::vector<double> future;         // A * t_pred * 3
    std::vector<double> wind_hist;      // A * t_obs * 2

    int num_agents() const { return static_cast<int>(agent_ids.size()); }
    const double* history_of(int a) const { return history.data() + static_cast<std::size_t>(a) * t_obs * 3; }
    const double* future_of(int a) const { return future.data() + static_cast<std::size_t>(a) * t_pred * 3; }
    const double* wind_of(int a) const { return wind_hist.data() + static_cast<std::size_t>(a) * t_obs * 2; }
};

struct HorizonConfig {
    int t_obs = 11;    // seconds
    int t_pred = 120;  // seconds
    int min_agents = 1;
    int stride = 1;    // seconds between window starts
};

// Sliding windows over one scene. A window is emitted iff at least min_agents
// cover every one of the t_obs + t_pred seconds; partially-present agents are
// dropped from that window.
std::vector<SequenceWindow> make_windows(const geo::Scene& scene, const HorizonConfig& cfg);

// Day-partitioned dataset: each immediate subdirectory of `root` is one day
// holding scene CSV files. Returns the scene files for the requested days.
struct DaySplit {
    std::vector<std::string> train_files;
    std::vector<std::string> test_files;
};
DaySplit split_days(const std::string& dataset_root, const std::vector<std::string>& train_days,
                    const std::vector<std::string>& test_days);

// All day names (subdirectory names) under a dataset root, sorted.
std::vector<std::string> list_days(const std::string& dataset_root);

// All scene CSVs under a dataset root (recursing one directory level), sorted.
std::vector<std::string> list_scene_files(const std::string& dataset_root);

// Loads the given scene files and windows every scene.
std::vector<SequenceWindow> load_windows(const std::vector<std::string>& scene_files,
                                         const HorizonConfig& cfg);

} // namespace airtraj::data
