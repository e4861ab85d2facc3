#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "airtraj/dataset.hpp"
#include "airtraj/model.hpp"

namespace airtraj::train_eval {

struct LossReport {
    double l_traj = 0.0;
    double l_cvae = 0.0;
    double l_total = 0.0;
};

struct EvalResult {
    double ade_km = 0.0;
    double fde_km = 0.0;
    int n_samples = 0;
    std::size_t n_windows = 0;
    std::size_t n_agents = 0; // agent instances scored (windows x agents)
};

struct TrainOptions {
    int epochs = 1;
    std::uint64_t seed = 0;
    double learning_rate = 1e-4;
    // Optional cap on optimizer steps (0 = no cap); epochs still bound the run.
    std::size_t max_steps = 0;
    std::function<void(std::size_t step, const LossReport&)> on_step;
};

// Thrown when a loss goes non-finite; a diagnostic checkpoint has been written
// to `checkpoint_path` when non-empty.
struct TrainAbort : std::runtime_error {
    TrainAbort(const std::string& msg, std::string path)
        : std::runtime_error(msg), checkpoint_path(std::move(path)) {}
    std::string checkpoint_path;
};

// Adam training, one optimizer step per window; window order is reshuffled
// every epoch from the seed. Returns the per-step loss history.
std::vector<LossReport> train(model::TrajectoryModel& net,
                              const std::vector<data::SequenceWindow>& windows,
                              const TrainOptions& opts,
                              const std::string& diagnostic_checkpoint = {});

// N independent prior samples for every agent of the window.
std::vector<model::PredictionSample> predict(const model::TrajectoryModel& net,
                                             const data::SequenceWindow& window, int n_samples,
                                             std::uint64_t seed);

// prediction/truth are [t_pred][3] flattened, meters; result in km.
std::pair<double, double> ade_fde(std::span<const double> prediction,
                                  std::span<const double> truth);

// Minimum-ADE sample; returns that sample's (ade, fde).
std::pair<double, double> best_of_n(const std::vector<std::span<const double>>& samples,
                                    std::span<const double> truth);

// Zero-acceleration Verlet continuation of the last two observed points.
model::PredictionSample baseline_const_velocity(const data::SequenceWindow& window, int t_pred,
                                                double dt = 1.0);

// (history, future) pairs in absolute coordinates for nearest-neighbor lookup.
struct TrajectoryIndex {
    int t_obs = 0;
    int t_pred = 0;
    std::vector<std::vector<double>> histories; // t_obs*3 each
    std::vector<std::vector<double>> futures;   // t_pred*3 each
};
TrajectoryIndex build_index(const std::vector<data::SequenceWindow>& windows);

// Future paired with the history minimizing summed squared distance to the
// query; ties toward the lowest index.
model::PredictionSample baseline_nearest_neighbor(const data::SequenceWindow& window,
                                                  const TrajectoryIndex& index);

// A predictor yields N future samples for every agent of a window.
using Predictor = std::function<std::vector<model::PredictionSample>(
    const data::SequenceWindow&, int n_samples, std::uint64_t seed)>;

Predictor model_predictor(const model::TrajectoryModel& net);
Predictor const_velocity_predictor(int t_pred, double dt = 1.0);
Predictor nearest_neighbor_predictor(TrajectoryIndex index);

// Mean best-of-N ADE/FDE over all agents of all windows, km.
EvalResult evaluate(const Predictor& predictor, const std::vector<data::SequenceWindow>& windows,
                    int n_samples, std::uint64_t seed);

} // namespace airtraj::train_eval
