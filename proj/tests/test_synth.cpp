#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "airtraj/dataset.hpp"
#include "airtraj/synth.hpp"

using namespace airtraj;
using namespace airtraj::synth;
namespace fs = std::filesystem;

namespace {

constexpr double kDeg = 3.14159265358979323846 / 180.0;

PatternSpec noiseless(RunwayEnd end = RunwayEnd::Low) {
    PatternSpec spec;
    spec.noise_sigma_m = 0.0;
    spec.runway_in_use = end;
    return spec;
}

SyntheticScenario one_agent(Intent intent) {
    SyntheticScenario sc;
    sc.agents = {{1000, intent}};
    sc.wind.u_along = -3.0;
    return sc;
}

// z-component of velocity x acceleration; negative = left turn in this frame.
std::vector<double> turn_signs(const std::vector<geo::TrackPoint>& pts) {
    std::vector<double> out;
    for (std::size_t i = 2; i < pts.size(); ++i) {
        const double vx1 = pts[i - 1].x - pts[i - 2].x, vy1 = pts[i - 1].y - pts[i - 2].y;
        const double vx2 = pts[i].x - pts[i - 1].x, vy2 = pts[i].y - pts[i - 1].y;
        out.push_back(vx1 * vy2 - vy1 * vx2);
    }
    return out;
}

std::string scene_bytes(const geo::Scene& scene) {
    std::ostringstream out;
    geo::write_scenes_csv(out, {scene});
    return out.str();
}

} // namespace

TEST_CASE("noiseless full circuit: closed left-hand rectangle") {
    const auto scene = generate_scene(noiseless(), one_agent(Intent::FullCircuit), 1);
    REQUIRE(scene.agents.size() == 1);
    const auto& pts = scene.agents[0].points;
    REQUIRE(pts.size() > 131);

    // Signed turn: never right, plenty of left.
    const auto signs = turn_signs(pts);
    int lefts = 0;
    for (double s : signs) {
        CHECK(s < 1e-6);
        if (s < -1.0) ++lefts;
    }
    CHECK(lefts > 20);

    // Starts and ends at the low threshold, on the ground.
    CHECK(std::hypot(pts.front().x, pts.front().y) < 40.0);
    CHECK(std::hypot(pts.back().x, pts.back().y) < 40.0);
    CHECK(pts.front().z == 0.0);
    CHECK(pts.back().z < 10.0);

    // Climbs to pattern altitude in between.
    double max_z = 0.0;
    for (const auto& p : pts) max_z = std::max(max_z, p.z);
    CHECK(max_z == doctest::Approx(300.0).epsilon(0.05));
}

TEST_CASE("noiseless circuit legs sit at 90-degree heading multiples") {
    const auto scene = generate_scene(noiseless(), one_agent(Intent::FullCircuit), 2);
    const auto& pts = scene.agents[0].points;

    // Histogram of straight-flight headings (snapped to the nearest degree).
    std::set<int> leg_headings;
    for (std::size_t i = 2; i < pts.size(); ++i) {
        const double vx1 = pts[i - 1].x - pts[i - 2].x, vy1 = pts[i - 1].y - pts[i - 2].y;
        const double vx2 = pts[i].x - pts[i - 1].x, vy2 = pts[i].y - pts[i - 1].y;
        const double cross = vx1 * vy2 - vy1 * vx2;
        if (std::fabs(cross) > 1.0) continue; // turning
        const double heading = std::atan2(vy2, vx2) / kDeg;
        leg_headings.insert(static_cast<int>(std::lround(heading + 360.0)) % 360);
    }
    for (int h : leg_headings) {
        const int rem = h % 90;
        CHECK((rem <= 1 || rem >= 89));
    }
    CHECK(leg_headings.size() >= 3);
}

TEST_CASE("high runway circuits also turn left") {
    const auto scene = generate_scene(noiseless(RunwayEnd::High), one_agent(Intent::FullCircuit), 3);
    const auto signs = turn_signs(scene.agents[0].points);
    for (double s : signs) CHECK(s < 1e-6);
    const auto& pts = scene.agents[0].points;
    // High-side pattern lives on +y.
    double mean_y = 0.0;
    for (const auto& p : pts) mean_y += p.y;
    CHECK(mean_y / static_cast<double>(pts.size()) > 100.0);
}

TEST_CASE("45-degree downwind entry joins at the stated angle") {
    const auto scene = generate_scene(noiseless(), one_agent(Intent::DownwindEntry45), 4);
    const auto& pts = scene.agents[0].points;

    // Initial leg heading vs the downwind course (-x for the low runway).
    const double vx = pts[3].x - pts[2].x, vy = pts[3].y - pts[2].y;
    const double entry = std::atan2(vy, vx) / kDeg;
    CHECK(entry == doctest::Approx(135.0).epsilon(0.01));

    // After joining the downwind every turn is a left turn. The merge arc ends
    // 95 m past the midpoint (x = 700), so x < 590 is safely beyond it.
    std::size_t join = 0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (std::fabs(pts[i].y - (-1000.0)) < 2.0 && pts[i].x < 590.0) {
            join = i;
            break;
        }
    REQUIRE(join > 0);
    const std::vector<geo::TrackPoint> tail(pts.begin() + static_cast<std::ptrdiff_t>(join),
                                            pts.end());
    for (double s : turn_signs(tail)) CHECK(s < 1e-6);
}

TEST_CASE("infeasible geometry raises an error") {
    PatternSpec spec = noiseless();
    spec.crosswind_offset_m = 200.0; // below twice the 229 m turn radius
    CHECK_THROWS_WITH_AS(generate_scene(spec, one_agent(Intent::FullCircuit), 5),
                         "infeasible pattern geometry: leg shorter than turn radius",
                         std::runtime_error);
}

TEST_CASE("scenes satisfy occupancy, wind-length and 1 Hz invariants") {
    PatternSpec spec; // default noise
    SyntheticScenario sc;
    sc.agents = {{1000, Intent::FullCircuit},
                 {1060, Intent::DownwindEntry45},
                 {5000, Intent::Departure}}; // clamped to keep the scene contiguous
    sc.wind.u_along = 2.0;
    sc.wind.u_cross = -1.0;
    const auto scene = generate_scene(spec, sc, 6);

    CHECK(scene.wind.size() == static_cast<std::size_t>(scene.duration_s()));

    std::set<std::int64_t> occupied;
    for (const auto& track : scene.agents) {
        for (std::size_t i = 0; i < track.points.size(); ++i) {
            occupied.insert(track.points[i].t);
            if (i) CHECK(track.points[i].t == track.points[i - 1].t + 1);
        }
    }
    for (std::int64_t t = scene.t0; t <= scene.t1; ++t) CHECK(occupied.count(t) == 1);

    // Everything stays inside the 5 km / 6000 ft region.
    for (const auto& track : scene.agents)
        for (const auto& p : track.points) {
            CHECK(std::hypot(p.x, p.y) <= 5000.0);
            CHECK(p.z <= 6000.0 * 0.3048);
        }
}

TEST_CASE("generation is byte-deterministic per seed") {
    PatternSpec spec; // noisy
    const auto a = generate_scene(spec, one_agent(Intent::FullCircuit), 42);
    const auto b = generate_scene(spec, one_agent(Intent::FullCircuit), 42);
    CHECK(scene_bytes(a) == scene_bytes(b));
    const auto c = generate_scene(spec, one_agent(Intent::FullCircuit), 43);
    CHECK(scene_bytes(a) != scene_bytes(c));
}

TEST_CASE("noiseless tracks pass the pipeline crop and resampling unchanged") {
    const auto scene = generate_scene(noiseless(), one_agent(Intent::FullCircuit), 7);
    geo::FrameConfig frame;
    const auto& pts = scene.agents[0].points;

    const auto cropped = geo::crop_region(pts, frame);
    CHECK(cropped.size() == pts.size());

    const auto tracks = geo::interpolate_1hz(scene.agents[0].agent_id, cropped, frame.gap_split_s);
    REQUIRE(tracks.size() == 1);
    REQUIRE(tracks[0].points.size() == pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(tracks[0].points[i].x == pts[i].x);
        CHECK(tracks[0].points[i].y == pts[i].y);
        CHECK(tracks[0].points[i].z == pts[i].z);
    }
}

TEST_CASE("runway choice follows the wind") {
    PatternSpec base;
    Rng rng(77);
    int lows = 0, highs = 0;
    for (int i = 0; i < 200; ++i) {
        const auto drawn = draw_scenario(base, rng);
        if (drawn.scenario.wind.u_along <= 0.0) {
            CHECK(drawn.spec.runway_in_use == RunwayEnd::Low);
            ++lows;
        } else {
            CHECK(drawn.spec.runway_in_use == RunwayEnd::High);
            ++highs;
        }
        REQUIRE(!drawn.scenario.agents.empty());
        for (std::size_t a = 1; a < drawn.scenario.agents.size(); ++a)
            CHECK(drawn.scenario.agents[a].spawn_t >= drawn.scenario.agents[a - 1].spawn_t);
    }
    CHECK(lows > 40);
    CHECK(highs > 40);
}

TEST_CASE("corpus: manifest, regeneration determinism, window-count oracle") {
    const fs::path dir1 = fs::temp_directory_path() / "airtraj_corpus_a";
    const fs::path dir2 = fs::temp_directory_path() / "airtraj_corpus_b";
    fs::remove_all(dir1);
    fs::remove_all(dir2);

    PatternSpec spec;
    generate_corpus(spec, 4, 99, dir1.string(), /*scenes_per_day=*/2, "stamp");
    generate_corpus(spec, 4, 99, dir2.string(), 2, "stamp");

    REQUIRE(fs::exists(dir1 / "manifest.json"));
    const auto files1 = data::list_scene_files(dir1.string());
    REQUIRE(files1.size() == 4);
    CHECK(fs::exists(dir1 / "day_000" / "scene_000000.csv"));
    CHECK(fs::exists(dir1 / "day_001" / "scene_000003.csv"));

    // Byte-identical regeneration, manifest included.
    for (const auto& f1 : files1) {
        const std::string rel = fs::relative(f1, dir1).string();
        std::ifstream a(f1, std::ios::binary), b(dir2 / rel, std::ios::binary);
        std::stringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        CHECK(sa.str() == sb.str());
    }
    {
        std::ifstream a(dir1 / "manifest.json", std::ios::binary),
            b(dir2 / "manifest.json", std::ios::binary);
        std::stringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        CHECK(sa.str() == sb.str());
    }

    // Window counts agree with a per-second presence enumeration.
    data::HorizonConfig horizon;
    horizon.t_obs = 4;
    horizon.t_pred = 9;
    const auto windows = data::load_windows(files1, horizon);

    std::size_t expected = 0;
    for (const auto& f : files1) {
        for (const auto& scene : geo::read_scenes_file(f)) {
            std::map<std::string, std::set<std::int64_t>> presence;
            for (const auto& track : scene.agents)
                for (const auto& p : track.points) presence[track.agent_id].insert(p.t);
            const int horizon_len = horizon.t_obs + horizon.t_pred;
            for (std::int64_t start = scene.t0; start + horizon_len - 1 <= scene.t1; ++start) {
                int covered = 0;
                for (const auto& [id, occ] : presence) {
                    bool full = true;
                    for (int k = 0; k < horizon_len; ++k)
                        if (!occ.count(start + k)) {
                            full = false;
                            break;
                        }
                    if (full) ++covered;
                }
                if (covered >= horizon.min_agents) ++expected;
            }
        }
    }
    CHECK(windows.size() == expected);

    // Single-scene corpus: one scene file plus the manifest.
    const fs::path dir3 = fs::temp_directory_path() / "airtraj_corpus_c";
    fs::remove_all(dir3);
    generate_corpus(spec, 1, 5, dir3.string());
    CHECK(data::list_scene_files(dir3.string()).size() == 1);
    CHECK(fs::exists(dir3 / "manifest.json"));

    fs::remove_all(dir1);
    fs::remove_all(dir2);
    fs::remove_all(dir3);
}
