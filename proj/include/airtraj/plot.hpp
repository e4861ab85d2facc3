#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "airtraj/geo.hpp"

namespace airtraj::plot {

// One agent of a prediction window, positions flattened [step][3] in meters.
struct AgentPrediction {
    std::string id;
    std::vector<double> history;
    std::vector<double> truth;
    std::vector<std::vector<double>> samples;
    int best_index = 0; // minimum-ADE sample
};

struct WindowPrediction {
    int scene_id = 0;
    std::int64_t start_t = 0;
    int t_obs = 0;
    int t_pred = 0;
    std::vector<AgentPrediction> agents;
};

nlohmann::json window_to_json(const WindowPrediction& window);
WindowPrediction window_from_json(const nlohmann::json& j);

// Top-down SVG. Colors follow the reporting convention: observation blue,
// samples green/cyan, best sample black, ground truth red.
std::string render_scene_svg(const geo::Scene& scene, const std::string& stamp = {});
std::string render_prediction_svg(const WindowPrediction& window, const std::string& stamp = {});

} // namespace airtraj::plot
