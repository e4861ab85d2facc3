#include "airtraj/train_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "airtraj/diff/adam.hpp"
#include "airtraj/diff/checkpoint.hpp"
#include "airtraj/rng.hpp"

namespace airtraj::train_eval {

std::vector<LossReport> train(model::TrajectoryModel& net,
                              const std::vector<data::SequenceWindow>& windows,
                              const TrainOptions& opts,
                              const std::string& diagnostic_checkpoint) {
    if (windows.empty()) throw std::runtime_error("empty training set");

    diff::AdamState adam;
    adam.learning_rate = opts.learning_rate;
    adam_init(adam, net.parameters());

    Rng rng(opts.seed);
    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<LossReport> history;
    std::size_t step = 0;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        // Fisher-Yates from the seeded stream.
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);

        for (std::size_t idx : order) {
            LossReport report;
            try {
                const auto fwd = net.train_forward(windows[idx], rng);
                report.l_traj = fwd.l_traj.scalar_value();
                report.l_cvae = fwd.l_cvae.scalar_value();
                report.l_total = fwd.l_total.scalar_value();
                diff::zero_grads(net.parameters());
                diff::backward(fwd.l_total);
            } catch (const std::exception& e) {
                std::string path;
                if (!diagnostic_checkpoint.empty()) {
                    path = diagnostic_checkpoint;
                    auto ckpt = net.to_checkpoint({{"diagnostic", "non-finite loss"},
                                                   {"step", std::to_string(step)}});
                    diff::save_checkpoint(path, ckpt);
                }
                throw TrainAbort(std::string("training aborted at step ") + std::to_string(step) +
                                     ": " + e.what(),
                                 path);
            }
            adam_step(net.parameters(), adam);
            history.push_back(report);
            if (opts.on_step) opts.on_step(step, report);
            ++step;
            if (opts.max_steps && step >= opts.max_steps) return history;
        }
    }
    return history;
}

std::vector<model::PredictionSample> predict(const model::TrajectoryModel& net,
                                             const data::SequenceWindow& window, int n_samples,
                                             std::uint64_t seed) {
    if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
    Rng rng(seed);
    std::vector<model::PredictionSample> out;
    out.reserve(static_cast<std::size_t>(n_samples));
    for (int n = 0; n < n_samples; ++n) out.push_back(net.sample_forward(window, rng));
    return out;
}

std::pair<double, double> ade_fde(std::span<const double> prediction,
                                  std::span<const double> truth) {
    if (prediction.size() != truth.size() || prediction.size() % 3 != 0)
        throw std::runtime_error("ade_fde: length mismatch (" + std::to_string(prediction.size()) +
                                 " vs " + std::to_string(truth.size()) + ")");
    const std::size_t steps = prediction.size() / 3;
    if (steps == 0) throw std::runtime_error("ade_fde: empty trajectories");

    double acc = 0.0;
    double last = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
        const double dx = prediction[t * 3 + 0] - truth[t * 3 + 0];
        const double dy = prediction[t * 3 + 1] - truth[t * 3 + 1];
        const double dz = prediction[t * 3 + 2] - truth[t * 3 + 2];
        last = std::sqrt(dx * dx + dy * dy + dz * dz);
        acc += last;
    }
    return {acc / static_cast<double>(steps) / 1000.0, last / 1000.0};
}

std::pair<double, double> best_of_n(const std::vector<std::span<const double>>& samples,
                                    std::span<const double> truth) {
    if (samples.empty()) throw std::runtime_error("best_of_n: no samples");
    double best_ade = std::numeric_limits<double>::infinity();
    double best_fde = 0.0;
    for (const auto& s : samples) {
        const auto [ade, fde] = ade_fde(s, truth);
        if (ade < best_ade) {
            best_ade = ade;
            best_fde = fde;
        }
    }
    return {best_ade, best_fde};
}

model::PredictionSample baseline_const_velocity(const data::SequenceWindow& window, int t_pred,
                                                double dt) {
    model::PredictionSample sample;
    sample.t_pred = t_pred;
    for (int a = 0; a < window.num_agents(); ++a) {
        const double* hist = window.history_of(a);
        const double* x_prev = hist + static_cast<std::size_t>(window.t_obs - 2) * 3;
        const double* x_last = hist + static_cast<std::size_t>(window.t_obs - 1) * 3;
        std::vector<double> zeros(static_cast<std::size_t>(t_pred) * 3, 0.0);
        sample.positions.push_back(diff::verlet_rollout_values(
            zeros, std::span<const double>(x_prev, 3), std::span<const double>(x_last, 3), t_pred,
            3, dt));
        sample.accelerations.push_back(std::move(zeros));
    }
    return sample;
}

TrajectoryIndex build_index(const std::vector<data::SequenceWindow>& windows) {
    TrajectoryIndex index;
    for (const auto& w : windows) {
        index.t_obs = w.t_obs;
        index.t_pred = w.t_pred;
        for (int a = 0; a < w.num_agents(); ++a) {
            const double* h = w.history_of(a);
            const double* f = w.future_of(a);
            index.histories.emplace_back(h, h + static_cast<std::size_t>(w.t_obs) * 3);
            index.futures.emplace_back(f, f + static_cast<std::size_t>(w.t_pred) * 3);
        }
    }
    return index;
}

model::PredictionSample baseline_nearest_neighbor(const data::SequenceWindow& window,
                                                  const TrajectoryIndex& index) {
    if (index.histories.empty()) throw std::runtime_error("empty nearest-neighbor index");
    model::PredictionSample sample;
    sample.t_pred = index.t_pred;
    for (int a = 0; a < window.num_agents(); ++a) {
        const double* q = window.history_of(a);
        const std::size_t len = static_cast<std::size_t>(window.t_obs) * 3;
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < index.histories.size(); ++i) {
            if (index.histories[i].size() != len)
                throw std::runtime_error("nearest-neighbor index horizon mismatch");
            double d = 0.0;
            for (std::size_t k = 0; k < len; ++k) {
                const double diff = index.histories[i][k] - q[k];
                d += diff * diff;
            }
            if (d < best_d) { // strict: ties stay with the lowest index
                best_d = d;
                best = i;
            }
        }
        sample.positions.push_back(index.futures[best]);
        sample.accelerations.emplace_back(index.futures[best].size(), 0.0);
    }
    return sample;
}

Predictor model_predictor(const model::TrajectoryModel& net) {
    return [&net](const data::SequenceWindow& w, int n, std::uint64_t seed) {
        return predict(net, w, n, seed);
    };
}

Predictor const_velocity_predictor(int t_pred, double dt) {
    return [t_pred, dt](const data::SequenceWindow& w, int n, std::uint64_t) {
        std::vector<model::PredictionSample> out(static_cast<std::size_t>(n),
                                                 baseline_const_velocity(w, t_pred, dt));
        return out;
    };
}

Predictor nearest_neighbor_predictor(TrajectoryIndex index) {
    return [index = std::move(index)](const data::SequenceWindow& w, int n, std::uint64_t) {
        std::vector<model::PredictionSample> out(static_cast<std::size_t>(n),
                                                 baseline_nearest_neighbor(w, index));
        return out;
    };
}

EvalResult evaluate(const Predictor& predictor, const std::vector<data::SequenceWindow>& windows,
                    int n_samples, std::uint64_t seed) {
    if (windows.empty()) throw std::runtime_error("empty evaluation set");
    EvalResult result;
    result.n_samples = n_samples;
    result.n_windows = windows.size();

    double ade_acc = 0.0, fde_acc = 0.0;
    std::size_t count = 0;
    for (std::size_t wi = 0; wi < windows.size(); ++wi) {
        const auto& w = windows[wi];
        // Per-window seed keeps evaluation independent of window order.
        const auto samples = predictor(w, n_samples, seed + wi);
        for (int a = 0; a < w.num_agents(); ++a) {
            std::vector<std::span<const double>> per_agent;
            per_agent.reserve(samples.size());
            for (const auto& s : samples)
                per_agent.emplace_back(s.positions[static_cast<std::size_t>(a)]);
            const std::span<const double> truth(w.future_of(a),
                                                static_cast<std::size_t>(w.t_pred) * 3);
            const auto [ade, fde] = best_of_n(per_agent, truth);
            ade_acc += ade;
            fde_acc += fde;
            ++count;
        }
    }
    result.n_agents = count;
    result.ade_km = ade_acc / static_cast<double>(count);
    result.fde_km = fde_acc / static_cast<double>(count);
    return result;
}

} // namespace airtraj::train_eval
