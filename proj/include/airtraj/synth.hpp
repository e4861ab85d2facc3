#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "airtraj/geo.hpp"
#include "airtraj/rng.hpp"

namespace airtraj::synth {

enum class RunwayEnd { Low, High };

enum class Intent { FullCircuit, DownwindEntry45, Departure };

// Rectangular left-hand circuit geometry around a runway lying along +x from
// (0,0) to (runway_length_m, 0). Low-end operations move along +x, high-end
// along -x; both circuits turn left.
struct PatternSpec {
    double runway_length_m = 1400.0;
    double pattern_altitude_m = 300.0;
    double crosswind_offset_m = 1000.0;   // lateral distance to the downwind leg
    double downwind_extension_m = 1000.0; // beyond both runway ends
    double airspeed_mps = 36.0;
    double turn_rate_dps = 9.0;
    double noise_sigma_m = 15.0;
    RunwayEnd runway_in_use = RunwayEnd::Low;

    double turn_radius_m() const;
    void validate() const;
    std::map<std::string, std::string> to_kv() const;
    static PatternSpec from_kv(const std::map<std::string, std::string>& kv);
};

struct AgentSchedule {
    std::int64_t spawn_t = 0;
    Intent intent = Intent::FullCircuit;
};

struct SyntheticScenario {
    std::vector<AgentSchedule> agents; // spawn times non-decreasing
    ingest::WindContext wind;
};

// Kinematic waypoint-following tracks at 1 Hz with optional Gaussian noise.
// Later spawn times are clamped so some aircraft is present at every second
// of the scene. Deterministic per seed.
geo::Scene generate_scene(const PatternSpec& spec, const SyntheticScenario& scenario,
                          std::uint64_t seed);

// Random wind, runway into the wind, 1-3 agents with random intents/spawns.
struct DrawnScenario {
    PatternSpec spec;
    SyntheticScenario scenario;
};
DrawnScenario draw_scenario(const PatternSpec& base, Rng& rng);

// Scene built end-to-end from one seed (scenario draw + kinematics + noise).
geo::Scene generate_corpus_scene(const PatternSpec& base, std::uint64_t scene_seed, int scene_id);

// Writes day_NNN/scene_NNNNNN.csv files plus manifest.json (per-scene seeds).
void generate_corpus(const PatternSpec& spec, int n_scenes, std::uint64_t seed,
                     const std::string& out_dir, int scenes_per_day = 50,
                     const std::string& stamp = {});

const char* intent_name(Intent intent);

} // namespace airtraj::synth
