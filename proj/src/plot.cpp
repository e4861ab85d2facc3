#include "airtraj/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace airtraj::plot {

namespace {

constexpr double kCanvas = 800.0;
constexpr double kMargin = 40.0;

struct Bounds {
    double min_x = 0.0, max_x = 1.0, min_y = 0.0, max_y = 1.0;
    bool any = false;

    void include(double x, double y) {
        if (!any) {
            min_x = max_x = x;
            min_y = max_y = y;
            any = true;
            return;
        }
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
    }
};

class SvgCanvas {
public:
    SvgCanvas(const Bounds& b, const std::string& stamp) {
        const double span = std::max({b.max_x - b.min_x, b.max_y - b.min_y, 1.0});
        scale_ = (kCanvas - 2.0 * kMargin) / span;
        cx_ = (b.min_x + b.max_x) / 2.0;
        cy_ = (b.min_y + b.max_y) / 2.0;
        out_ << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
        if (!stamp.empty()) out_ << "<!-- " << stamp << " -->\n";
        out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kCanvas << "\" height=\""
             << kCanvas << "\" viewBox=\"0 0 " << kCanvas << " " << kCanvas << "\">\n";
        out_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    }

    // +x up on the page, +y to the right (axis view along the runway).
    void polyline(const std::vector<double>& xyz, const char* color, double width,
                  const char* dash = nullptr) {
        if (xyz.size() < 6) return;
        out_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width
             << "\"";
        if (dash) out_ << " stroke-dasharray=\"" << dash << "\"";
        out_ << " points=\"";
        char buf[64];
        for (std::size_t i = 0; i + 2 < xyz.size(); i += 3) {
            const double px = kCanvas / 2.0 + (xyz[i + 1] - cy_) * scale_;
            const double py = kCanvas / 2.0 - (xyz[i] - cx_) * scale_;
            std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px, py);
            out_ << buf;
        }
        out_ << "\"/>\n";
    }

    std::string finish() {
        out_ << "</svg>\n";
        return out_.str();
    }

private:
    std::ostringstream out_;
    double scale_ = 1.0;
    double cx_ = 0.0, cy_ = 0.0;
};

void include_xyz(Bounds& b, const std::vector<double>& xyz) {
    for (std::size_t i = 0; i + 2 < xyz.size(); i += 3) b.include(xyz[i], xyz[i + 1]);
}

} // namespace

nlohmann::json window_to_json(const WindowPrediction& window) {
    nlohmann::json j;
    j["scene_id"] = window.scene_id;
    j["start_t"] = window.start_t;
    j["t_obs"] = window.t_obs;
    j["t_pred"] = window.t_pred;
    j["agents"] = nlohmann::json::array();
    for (const auto& a : window.agents) {
        nlohmann::json ja;
        ja["id"] = a.id;
        ja["history"] = a.history;
        ja["truth"] = a.truth;
        ja["samples"] = a.samples;
        ja["best_index"] = a.best_index;
        j["agents"].push_back(std::move(ja));
    }
    return j;
}

WindowPrediction window_from_json(const nlohmann::json& j) {
    WindowPrediction w;
    w.scene_id = j.at("scene_id").get<int>();
    w.start_t = j.at("start_t").get<std::int64_t>();
    w.t_obs = j.at("t_obs").get<int>();
    w.t_pred = j.at("t_pred").get<int>();
    for (const auto& ja : j.at("agents")) {
        AgentPrediction a;
        a.id = ja.at("id").get<std::string>();
        a.history = ja.at("history").get<std::vector<double>>();
        a.truth = ja.at("truth").get<std::vector<double>>();
        a.samples = ja.at("samples").get<std::vector<std::vector<double>>>();
        a.best_index = ja.at("best_index").get<int>();
        w.agents.push_back(std::move(a));
    }
    return w;
}

std::string render_scene_svg(const geo::Scene& scene, const std::string& stamp) {
    if (scene.agents.empty()) throw std::runtime_error("empty scene, nothing to plot");
    Bounds b;
    for (const auto& track : scene.agents)
        for (const auto& p : track.points) b.include(p.x, p.y);

    SvgCanvas canvas(b, stamp);
    for (const auto& track : scene.agents) {
        std::vector<double> xyz;
        xyz.reserve(track.points.size() * 3);
        for (const auto& p : track.points) {
            xyz.push_back(p.x);
            xyz.push_back(p.y);
            xyz.push_back(p.z);
        }
        canvas.polyline(xyz, "#1f77b4", 1.5);
    }
    return canvas.finish();
}

std::string render_prediction_svg(const WindowPrediction& window, const std::string& stamp) {
    if (window.agents.empty()) throw std::runtime_error("empty prediction window, nothing to plot");
    Bounds b;
    for (const auto& a : window.agents) {
        include_xyz(b, a.history);
        include_xyz(b, a.truth);
        for (const auto& s : a.samples) include_xyz(b, s);
    }

    SvgCanvas canvas(b, stamp);
    for (const auto& a : window.agents) {
        for (std::size_t n = 0; n < a.samples.size(); ++n) {
            if (static_cast<int>(n) == a.best_index) continue;
            canvas.polyline(a.samples[n], n % 2 == 0 ? "#2ca02c" : "#17becf", 1.0);
        }
        if (a.best_index >= 0 && static_cast<std::size_t>(a.best_index) < a.samples.size())
            canvas.polyline(a.samples[static_cast<std::size_t>(a.best_index)], "black", 1.5);
        canvas.polyline(a.truth, "red", 1.5);
        canvas.polyline(a.history, "#1f77b4", 2.0);
    }
    return canvas.finish();
}

} // namespace airtraj::plot
