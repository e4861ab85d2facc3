#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "airtraj/dataset.hpp"
#include "airtraj/diff/array.hpp"
#include "airtraj/diff/checkpoint.hpp"
#include "airtraj/rng.hpp"

namespace airtraj::model {

struct ModelConfig {
    int tcn_channels = 32;
    int tcn_kernel = 4;
    int tcn_layers = 2; // dilation doubles per layer: 1, 2, 4, ...
    int cnn_channels = 16;
    int cnn_kernel = 3;
    int gat_heads = 4;
    int gat_dim = 32; // per-head output features
    int cvae_latent_dim = 64;
    int mlp_hidden = 64;
    int t_obs = 11;
    int t_pred = 120;
    double delta_t = 1.0;        // seconds, matches the 1 Hz grid
    double leaky_slope = 0.2;    // GAT attention nonlinearity
    double input_scale = 1e-3;   // meters -> encoder input units
    double loss_scale = 1e-3;    // meters -> trajectory-loss units

    int h_enc_dim() const { return tcn_channels + cnn_channels; }
    int h_gat_dim() const { return gat_heads * gat_dim; }
    int cond_dim() const { return h_enc_dim() + h_gat_dim(); }

    void validate() const;
    std::map<std::string, std::string> to_kv() const;
    static ModelConfig from_kv(const std::map<std::string, std::string>& kv);
    std::string to_string() const; // canonical "k=v" lines
    static ModelConfig from_string(const std::string& text);
};

// One sampled future for every agent of a window. Positions reproduce exactly
// from (last two observed points, accelerations) via the Verlet recurrence.
struct PredictionSample {
    int t_pred = 0;
    std::vector<std::vector<double>> accelerations; // per agent, t_pred*3, m/s^2
    std::vector<std::vector<double>> positions;     // per agent, t_pred*3, meters
};

class TrajectoryModel {
public:
    TrajectoryModel(ModelConfig cfg, std::uint64_t init_seed);

    static TrajectoryModel from_checkpoint(const diff::Checkpoint& ckpt);
    diff::Checkpoint to_checkpoint(std::map<std::string, std::string> meta = {}) const;

    const ModelConfig& config() const { return cfg_; }
    std::vector<diff::Array>& parameters() { return params_; }
    const std::vector<diff::Array>& parameters() const { return params_; }
    const std::vector<std::string>& parameter_names() const { return names_; }
    const diff::Array& param(const std::string& name) const;

    // Shared-weight TCN over each agent's absolute-coordinate history; the
    // final-timestep feature vector per agent.
    std::vector<diff::Array> encode_history(const data::SequenceWindow& w) const;

    // h_obs with the CNN-encoded wind sequence appended per agent.
    std::vector<diff::Array> encode_context(const data::SequenceWindow& w) const;

    // Multi-head graph attention over the fully-connected agent graph
    // (self-edges included); heads concatenated.
    std::vector<diff::Array> social_attention(const std::vector<diff::Array>& h_enc) const;

    // Future encoder (same topology as the history TCN, separate weights).
    diff::Array encode_future(const data::SequenceWindow& w, int agent) const;

    struct CvaeTrainOut {
        diff::Array mu, log_var, z, h_cvae;
    };
    // Recognition path: z = mu + exp(log_var/2) * epsilon, then decode.
    CvaeTrainOut cvae_train_forward(const diff::Array& h_pred, const diff::Array& cond,
                                    const diff::Array& epsilon) const;

    // Prior path: decode a given latent against the conditioning vector.
    diff::Array cvae_sample_forward(const diff::Array& cond, const diff::Array& z) const;

    struct Rollout {
        diff::Array accel;     // [t_pred, 3], m/s^2
        diff::Array positions; // [t_pred, 3], meters
    };
    // MLP head to acceleration, then Verlet integration from the last two
    // observed positions (meters).
    Rollout head_and_rollout(const diff::Array& h_cvae, const double* hist_last_two) const;

    struct TrainForward {
        diff::Array l_total, l_traj, l_cvae;
    };
    TrainForward train_forward(const data::SequenceWindow& w, Rng& rng) const;
    // Deterministic variant for gradient checks: epsilon supplied per agent.
    TrainForward train_forward_with_eps(const data::SequenceWindow& w,
                                        const std::vector<std::vector<double>>& eps) const;

    PredictionSample sample_forward(const data::SequenceWindow& w, Rng& rng) const;
    PredictionSample sample_forward_with_z(const data::SequenceWindow& w,
                                           const std::vector<std::vector<double>>& z) const;

private:
    void build_params(Rng& rng);
    diff::Array tcn_apply(const std::string& prefix, const diff::Array& input) const;

    ModelConfig cfg_;
    std::vector<std::string> names_;
    std::vector<diff::Array> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

} // namespace airtraj::model
