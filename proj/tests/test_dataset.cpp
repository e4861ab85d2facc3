#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "airtraj/dataset.hpp"
#include "airtraj/rng.hpp"

using namespace airtraj;
using namespace airtraj::data;
namespace fs = std::filesystem;

namespace {

geo::AgentTrack run_track(const std::string& id, std::int64_t t0, int len, double x0 = 0.0) {
    geo::AgentTrack track;
    track.agent_id = id;
    for (int i = 0; i < len; ++i) {
        geo::TrackPoint p;
        p.t = t0 + i;
        p.agent_id = id;
        p.x = x0 + static_cast<double>(i);
        p.y = 0.5 * static_cast<double>(i);
        p.z = 100.0;
        track.points.push_back(std::move(p));
    }
    return track;
}

geo::Scene make_scene(std::vector<geo::AgentTrack> tracks) {
    geo::Scene scene;
    scene.scene_id = 3;
    scene.t0 = tracks.front().points.front().t;
    scene.t1 = tracks.front().points.back().t;
    for (const auto& tr : tracks) {
        scene.t0 = std::min(scene.t0, tr.points.front().t);
        scene.t1 = std::max(scene.t1, tr.points.back().t);
    }
    std::sort(tracks.begin(), tracks.end(),
              [](const geo::AgentTrack& a, const geo::AgentTrack& b) {
                  return a.agent_id < b.agent_id;
              });
    scene.agents = std::move(tracks);
    scene.wind.resize(static_cast<std::size_t>(scene.duration_s()));
    for (std::size_t i = 0; i < scene.wind.size(); ++i) {
        scene.wind[i].u_along = 0.1 * static_cast<double>(i);
        scene.wind[i].u_cross = -2.0;
    }
    return scene;
}

} // namespace

TEST_CASE("a single 131-second agent yields exactly one default window") {
    const auto scene = make_scene({run_track("A", 1000, 131)});
    HorizonConfig cfg; // 11 + 120
    const auto windows = make_windows(scene, cfg);
    REQUIRE(windows.size() == 1);
    const auto& w = windows[0];
    CHECK(w.scene_id == 3);
    CHECK(w.start_t == 1000);
    CHECK(w.num_agents() == 1);
    CHECK(w.agent_ids[0] == "A");

    // History/future slices come straight off the track.
    CHECK(w.history_of(0)[0] == 0.0);
    CHECK(w.history_of(0)[3] == 1.0);             // second step, x
    CHECK(w.future_of(0)[0] == 11.0);             // first future step, x
    CHECK(w.future_of(0)[(119) * 3 + 0] == 130.0); // last future step, x

    // Wind is replicated per agent from the scene-level sequence.
    CHECK(w.wind_of(0)[0] == doctest::Approx(0.0));
    CHECK(w.wind_of(0)[1] == doctest::Approx(-2.0));
    CHECK(w.wind_of(0)[2 * 10] == doctest::Approx(1.0)); // t offset 10, u_along
}

TEST_CASE("an agent short of full coverage is excluded from every window") {
    const auto scene = make_scene({run_track("A", 1000, 131), run_track("B", 1000, 100)});
    HorizonConfig cfg;
    const auto windows = make_windows(scene, cfg);
    REQUIRE(windows.size() == 1);
    CHECK(windows[0].num_agents() == 1);
    CHECK(windows[0].agent_ids[0] == "A");

    cfg.min_agents = 2;
    CHECK(make_windows(scene, cfg).empty());
}

TEST_CASE("window count for one continuous agent is max(0, D - horizon + 1)") {
    HorizonConfig cfg;
    cfg.t_obs = 4;
    cfg.t_pred = 9;
    for (int duration : {5, 12, 13, 14, 40, 133}) {
        const auto scene = make_scene({run_track("A", 50, duration)});
        const auto windows = make_windows(scene, cfg);
        const int expected = std::max(0, duration - (cfg.t_obs + cfg.t_pred) + 1);
        CHECK(static_cast<int>(windows.size()) == expected);
    }
}

TEST_CASE("windows match the brute-force coverage enumeration on random masks") {
    Rng rng(77);
    for (int trial = 0; trial < 120; ++trial) {
        HorizonConfig cfg;
        cfg.t_obs = rng.uniform_int(2, 5);
        cfg.t_pred = rng.uniform_int(3, 8);
        cfg.min_agents = rng.uniform_int(1, 2);
        cfg.stride = rng.uniform_int(1, 4);
        const int horizon = cfg.t_obs + cfg.t_pred;

        // Random presence masks realized as one contiguous track per run.
        std::vector<geo::AgentTrack> tracks;
        std::map<std::string, std::set<std::int64_t>> presence;
        const int n_aircraft = rng.uniform_int(1, 3);
        for (int a = 0; a < n_aircraft; ++a) {
            std::int64_t t = rng.uniform_int(0, 30);
            const int runs = rng.uniform_int(1, 3);
            for (int r = 0; r < runs; ++r) {
                const int len = rng.uniform_int(1, 40);
                const std::string id =
                    "A" + std::to_string(a) + (r ? "#" + std::to_string(r) : "");
                tracks.push_back(run_track(id, t, len, rng.uniform(-10.0, 10.0)));
                for (int i = 0; i < len; ++i) presence[id].insert(t + i);
                t += len + rng.uniform_int(1, 20);
            }
        }
        const auto scene = make_scene(std::move(tracks));
        const auto windows = make_windows(scene, cfg);

        // Oracle: enumerate starts, check every needed second of every track.
        std::vector<std::pair<std::int64_t, std::vector<std::string>>> expected;
        for (std::int64_t start = scene.t0; start + horizon - 1 <= scene.t1;
             start += cfg.stride) {
            std::vector<std::string> ids;
            for (const auto& [id, occ] : presence) {
                bool full = true;
                for (int k = 0; k < horizon; ++k)
                    if (!occ.count(start + k)) {
                        full = false;
                        break;
                    }
                if (full) ids.push_back(id);
            }
            std::sort(ids.begin(), ids.end());
            if (static_cast<int>(ids.size()) >= cfg.min_agents) expected.emplace_back(start, ids);
        }

        REQUIRE(windows.size() == expected.size());
        for (std::size_t i = 0; i < windows.size(); ++i) {
            CHECK(windows[i].start_t == expected[i].first);
            CHECK(windows[i].agent_ids == expected[i].second);
            CHECK(windows[i].num_agents() >= cfg.min_agents);
            // Emitted arrays carry one row per step for every agent.
            CHECK(windows[i].history.size() ==
                  static_cast<std::size_t>(windows[i].num_agents()) * cfg.t_obs * 3);
            CHECK(windows[i].future.size() ==
                  static_cast<std::size_t>(windows[i].num_agents()) * cfg.t_pred * 3);
            CHECK(windows[i].wind_hist.size() ==
                  static_cast<std::size_t>(windows[i].num_agents()) * cfg.t_obs * 2);
        }
    }
}

TEST_CASE("split_days: disjoint day lists, overlap errors, conservation") {
    const fs::path root = fs::temp_directory_path() / "airtraj_split_days";
    fs::remove_all(root);
    for (const char* day : {"d1", "d2", "d3", "d4", "d5", "d6", "d7"}) {
        fs::create_directories(root / day);
        std::ofstream(root / day / "scenes.csv") << "scene_id,t,agent_id,x,y,z,u_along,u_cross\n";
    }

    const auto split = split_days(root.string(), {"d1", "d2", "d3", "d4", "d5", "d6"}, {"d7"});
    CHECK(split.train_files.size() == 6);
    CHECK(split.test_files.size() == 1);

    // No file appears on both sides.
    std::set<std::string> train(split.train_files.begin(), split.train_files.end());
    for (const auto& f : split.test_files) CHECK(!train.count(f));

    // File counts are conserved against the full listing.
    const auto all = list_scene_files(root.string());
    CHECK(split.train_files.size() + split.test_files.size() == all.size());

    CHECK_THROWS_AS(split_days(root.string(), {"d1", "d2"}, {"d2"}), std::runtime_error);
    CHECK_THROWS_AS(split_days(root.string(), {"nope"}, {}), std::runtime_error);
    fs::remove_all(root);
}
