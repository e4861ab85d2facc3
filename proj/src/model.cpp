#include "airtraj/model.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace airtraj::model {

using diff::Array;

namespace {

int get_int(const std::map<std::string, std::string>& kv, const std::string& key, int fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : std::stoi(it->second);
}

double get_double(const std::map<std::string, std::string>& kv, const std::string& key,
                  double fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : std::stod(it->second);
}

std::vector<double> xavier(Rng& rng, int fan_in, int fan_out, std::size_t count,
                           double gain = 1.0) {
    const double limit = gain * std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> v(count);
    for (auto& x : v) x = rng.uniform(-limit, limit);
    return v;
}

} // namespace

void ModelConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v <= 0) throw std::invalid_argument(std::string(name) + " must be positive");
    };
    positive(tcn_channels, "tcn_channels");
    positive(tcn_kernel, "tcn_kernel");
    positive(tcn_layers, "tcn_layers");
    positive(cnn_channels, "cnn_channels");
    positive(cnn_kernel, "cnn_kernel");
    positive(gat_heads, "gat_heads");
    positive(gat_dim, "gat_dim");
    positive(cvae_latent_dim, "cvae_latent_dim");
    positive(mlp_hidden, "mlp_hidden");
    positive(t_pred, "t_pred");
    if (t_obs < 2) throw std::invalid_argument("t_obs must be >= 2 (Verlet needs two anchors)");
    if (delta_t <= 0.0) throw std::invalid_argument("delta_t must be positive");
    if (input_scale <= 0.0 || loss_scale <= 0.0)
        throw std::invalid_argument("scales must be positive");
}

std::map<std::string, std::string> ModelConfig::to_kv() const {
    std::map<std::string, std::string> kv;
    auto put_i = [&](const char* k, int v) { kv[k] = std::to_string(v); };
    auto put_d = [&](const char* k, double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        kv[k] = buf;
    };
    put_i("tcn_channels", tcn_channels);
    put_i("tcn_kernel", tcn_kernel);
    put_i("tcn_layers", tcn_layers);
    put_i("cnn_channels", cnn_channels);
    put_i("cnn_kernel", cnn_kernel);
    put_i("gat_heads", gat_heads);
    put_i("gat_dim", gat_dim);
    put_i("cvae_latent_dim", cvae_latent_dim);
    put_i("mlp_hidden", mlp_hidden);
    put_i("t_obs", t_obs);
    put_i("t_pred", t_pred);
    put_d("delta_t", delta_t);
    put_d("leaky_slope", leaky_slope);
    put_d("input_scale", input_scale);
    put_d("loss_scale", loss_scale);
    return kv;
}

ModelConfig ModelConfig::from_kv(const std::map<std::string, std::string>& kv) {
    ModelConfig c;
    c.tcn_channels = get_int(kv, "tcn_channels", c.tcn_channels);
    c.tcn_kernel = get_int(kv, "tcn_kernel", c.tcn_kernel);
    c.tcn_layers = get_int(kv, "tcn_layers", c.tcn_layers);
    c.cnn_channels = get_int(kv, "cnn_channels", c.cnn_channels);
    c.cnn_kernel = get_int(kv, "cnn_kernel", c.cnn_kernel);
    c.gat_heads = get_int(kv, "gat_heads", c.gat_heads);
    c.gat_dim = get_int(kv, "gat_dim", c.gat_dim);
    c.cvae_latent_dim = get_int(kv, "cvae_latent_dim", c.cvae_latent_dim);
    c.mlp_hidden = get_int(kv, "mlp_hidden", c.mlp_hidden);
    c.t_obs = get_int(kv, "t_obs", c.t_obs);
    c.t_pred = get_int(kv, "t_pred", c.t_pred);
    c.delta_t = get_double(kv, "delta_t", c.delta_t);
    c.leaky_slope = get_double(kv, "leaky_slope", c.leaky_slope);
    c.input_scale = get_double(kv, "input_scale", c.input_scale);
    c.loss_scale = get_double(kv, "loss_scale", c.loss_scale);
    c.validate();
    return c;
}

std::string ModelConfig::to_string() const {
    std::ostringstream out;
    for (const auto& [k, v] : to_kv()) out << k << "=" << v << "\n";
    return out.str();
}

ModelConfig ModelConfig::from_string(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return from_kv(kv);
}

TrajectoryModel::TrajectoryModel(ModelConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(init_seed);
    build_params(rng);
}

void TrajectoryModel::build_params(Rng& rng) {
    auto add_param = [&](const std::string& name, diff::Shape shape, std::vector<double> values) {
        index_[name] = params_.size();
        names_.push_back(name);
        params_.push_back(Array::from(std::move(shape), std::move(values), true));
    };
    // Biases follow the usual uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) scheme.
    auto add_bias = [&](const std::string& name, diff::Shape shape, int fan_in,
                        double gain = 1.0) {
        const auto n = diff::numel(shape);
        const double limit = gain / std::sqrt(static_cast<double>(fan_in));
        std::vector<double> v(n);
        for (auto& x : v) x = rng.uniform(-limit, limit);
        add_param(name, std::move(shape), std::move(v));
    };

    const int C = cfg_.tcn_channels;
    const int K = cfg_.tcn_kernel;
    for (const char* prefix : {"tcn_obs", "tcn_pred"}) {
        for (int l = 0; l < cfg_.tcn_layers; ++l) {
            const int c_in = l == 0 ? 3 : C;
            const std::string base = std::string(prefix) + ".l" + std::to_string(l);
            add_param(base + ".kernel", {C, c_in, K},
                      xavier(rng, c_in * K, C * K, static_cast<std::size_t>(C) * c_in * K));
            add_bias(base + ".bias", {C}, c_in * K);
        }
    }

    add_param("cnn.kernel", {cfg_.cnn_channels, 2, cfg_.cnn_kernel},
              xavier(rng, 2 * cfg_.cnn_kernel, cfg_.cnn_channels * cfg_.cnn_kernel,
                     static_cast<std::size_t>(cfg_.cnn_channels) * 2 * cfg_.cnn_kernel));
    add_bias("cnn.bias", {cfg_.cnn_channels}, 2 * cfg_.cnn_kernel);

    const int F = cfg_.h_enc_dim();
    for (int h = 0; h < cfg_.gat_heads; ++h) {
        const std::string base = "gat.h" + std::to_string(h);
        add_param(base + ".weight", {cfg_.gat_dim, F},
                  xavier(rng, F, cfg_.gat_dim, static_cast<std::size_t>(cfg_.gat_dim) * F));
        add_param(base + ".a_src", {cfg_.gat_dim},
                  xavier(rng, cfg_.gat_dim, 1, static_cast<std::size_t>(cfg_.gat_dim)));
        add_param(base + ".a_dst", {cfg_.gat_dim},
                  xavier(rng, cfg_.gat_dim, 1, static_cast<std::size_t>(cfg_.gat_dim)));
    }

    const int cond = cfg_.cond_dim();
    const int latent = cfg_.cvae_latent_dim;
    const int hidden = cfg_.mlp_hidden;

    const int q_in = cfg_.tcn_channels + cond;
    add_param("q.l1.weight", {hidden, q_in},
              xavier(rng, q_in, hidden, static_cast<std::size_t>(hidden) * q_in));
    add_bias("q.l1.bias", {hidden}, q_in);
    add_param("q.mu.weight", {latent, hidden},
              xavier(rng, hidden, latent, static_cast<std::size_t>(latent) * hidden));
    add_bias("q.mu.bias", {latent}, hidden);
    add_param("q.logvar.weight", {latent, hidden},
              xavier(rng, hidden, latent, static_cast<std::size_t>(latent) * hidden));
    add_bias("q.logvar.bias", {latent}, hidden);

    const int p_in = latent + cond;
    add_param("p.l1.weight", {hidden, p_in},
              xavier(rng, p_in, hidden, static_cast<std::size_t>(hidden) * p_in));
    add_bias("p.l1.bias", {hidden}, p_in);

    add_param("head.l1.weight", {hidden, hidden},
              xavier(rng, hidden, hidden, static_cast<std::size_t>(hidden) * hidden));
    add_bias("head.l1.bias", {hidden}, hidden);
    const int out = cfg_.t_pred * 3;
    // Small output init: the rollout starts close to the constant-velocity
    // continuation (exactly so for zero weights).
    add_param("head.out.weight", {out, hidden},
              xavier(rng, hidden, out, static_cast<std::size_t>(out) * hidden, 0.01));
    add_bias("head.out.bias", {out}, hidden, 0.01);
}

const Array& TrajectoryModel::param(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::runtime_error("unknown parameter: " + name);
    return params_[it->second];
}

TrajectoryModel TrajectoryModel::from_checkpoint(const diff::Checkpoint& ckpt) {
    auto it = ckpt.meta.find("model_config");
    if (it == ckpt.meta.end())
        throw std::runtime_error("config/checkpoint mismatch: checkpoint has no model_config");
    TrajectoryModel m(ModelConfig::from_string(it->second), /*init_seed=*/0);

    std::unordered_map<std::string, std::size_t> found;
    for (std::size_t i = 0; i < ckpt.names.size(); ++i) found[ckpt.names[i]] = i;
    for (std::size_t i = 0; i < m.names_.size(); ++i) {
        auto f = found.find(m.names_[i]);
        if (f == found.end())
            throw std::runtime_error("config/checkpoint mismatch: missing parameter " +
                                     m.names_[i]);
        const Array& src = ckpt.arrays[f->second];
        if (src.shape() != m.params_[i].shape())
            throw std::runtime_error("config/checkpoint mismatch: parameter " + m.names_[i] +
                                     " has shape " + diff::shape_str(src.shape()) + ", expected " +
                                     diff::shape_str(m.params_[i].shape()));
        auto& dst = m.params_[i].mutable_values();
        std::copy(src.values().begin(), src.values().end(), dst.begin());
    }
    return m;
}

diff::Checkpoint TrajectoryModel::to_checkpoint(std::map<std::string, std::string> meta) const {
    diff::Checkpoint ckpt;
    ckpt.meta = std::move(meta);
    ckpt.meta["model_config"] = cfg_.to_string();
    for (std::size_t i = 0; i < names_.size(); ++i) {
        ckpt.names.push_back(names_[i]);
        ckpt.arrays.push_back(Array::from(params_[i].shape(),
                                          {params_[i].values().begin(), params_[i].values().end()},
                                          true));
    }
    return ckpt;
}

diff::Array TrajectoryModel::tcn_apply(const std::string& prefix, const Array& input) const {
    Array x = input;
    int dilation = 1;
    for (int l = 0; l < cfg_.tcn_layers; ++l) {
        const std::string base = prefix + ".l" + std::to_string(l);
        x = diff::relu(
            diff::causal_conv1d(x, param(base + ".kernel"), param(base + ".bias"), dilation));
        dilation *= 2;
    }
    return diff::select(x, /*axis=*/1, input.shape()[1] - 1);
}

std::vector<Array> TrajectoryModel::encode_history(const data::SequenceWindow& w) const {
    if (w.t_obs != cfg_.t_obs)
        throw std::runtime_error("window t_obs " + std::to_string(w.t_obs) +
                                 " does not match model t_obs " + std::to_string(cfg_.t_obs));
    std::vector<Array> out;
    out.reserve(static_cast<std::size_t>(w.num_agents()));
    const int T = cfg_.t_obs;
    for (int a = 0; a < w.num_agents(); ++a) {
        std::vector<double> chans(static_cast<std::size_t>(3) * T);
        const double* hist = w.history_of(a);
        for (int t = 0; t < T; ++t)
            for (int c = 0; c < 3; ++c)
                chans[static_cast<std::size_t>(c) * T + t] =
                    hist[static_cast<std::size_t>(t) * 3 + c] * cfg_.input_scale;
        out.push_back(tcn_apply("tcn_obs", Array::from({3, T}, std::move(chans))));
    }
    return out;
}

std::vector<Array> TrajectoryModel::encode_context(const data::SequenceWindow& w) const {
    auto h_obs = encode_history(w);
    const int T = cfg_.t_obs;
    std::vector<Array> out;
    out.reserve(h_obs.size());
    for (int a = 0; a < w.num_agents(); ++a) {
        std::vector<double> chans(static_cast<std::size_t>(2) * T);
        const double* wind = w.wind_of(a);
        for (int t = 0; t < T; ++t)
            for (int c = 0; c < 2; ++c)
                chans[static_cast<std::size_t>(c) * T + t] = wind[static_cast<std::size_t>(t) * 2 + c];
        Array wc = diff::relu(diff::causal_conv1d(Array::from({2, T}, std::move(chans)),
                                                  param("cnn.kernel"), param("cnn.bias"), 1));
        Array wind_enc = diff::select(wc, 1, T - 1);
        out.push_back(diff::concat({h_obs[static_cast<std::size_t>(a)], wind_enc}, 0));
    }
    return out;
}

std::vector<Array> TrajectoryModel::social_attention(const std::vector<Array>& h_enc) const {
    const int A = static_cast<int>(h_enc.size());
    if (A < 1) throw std::runtime_error("social_attention needs at least one agent");

    std::vector<std::vector<Array>> head_outputs(static_cast<std::size_t>(A));
    for (int h = 0; h < cfg_.gat_heads; ++h) {
        const std::string base = "gat.h" + std::to_string(h);
        const Array& W = param(base + ".weight");
        const Array& a_src = param(base + ".a_src");
        const Array& a_dst = param(base + ".a_dst");
        const Array zero_bias = Array::zeros({cfg_.gat_dim});

        std::vector<Array> wh(static_cast<std::size_t>(A));
        std::vector<Array> src_score(static_cast<std::size_t>(A));
        std::vector<Array> dst_score(static_cast<std::size_t>(A));
        std::vector<Array> wh_rows(static_cast<std::size_t>(A));
        for (int j = 0; j < A; ++j) {
            wh[j] = diff::linear(h_enc[static_cast<std::size_t>(j)], W, zero_bias);
            src_score[j] = diff::sum(diff::mul(a_src, wh[j]));
            dst_score[j] = diff::sum(diff::mul(a_dst, wh[j]));
            wh_rows[j] = diff::reshape(wh[j], {1, cfg_.gat_dim});
        }
        const Array stacked = diff::concat(wh_rows, 0); // [A, gat_dim]

        for (int i = 0; i < A; ++i) {
            std::vector<Array> scores;
            scores.reserve(static_cast<std::size_t>(A));
            for (int j = 0; j < A; ++j)
                scores.push_back(diff::reshape(
                    diff::leaky_relu(diff::add(src_score[i], dst_score[j]), cfg_.leaky_slope),
                    {1}));
            const Array alpha = diff::softmax(diff::concat(scores, 0), 0); // [A]
            const Array mixed = diff::matmul(diff::reshape(alpha, {1, A}), stacked);
            head_outputs[static_cast<std::size_t>(i)].push_back(
                diff::reshape(mixed, {cfg_.gat_dim}));
        }
    }

    std::vector<Array> out;
    out.reserve(static_cast<std::size_t>(A));
    for (int i = 0; i < A; ++i) out.push_back(diff::concat(head_outputs[static_cast<std::size_t>(i)], 0));
    return out;
}

diff::Array TrajectoryModel::encode_future(const data::SequenceWindow& w, int agent) const {
    const int T = cfg_.t_pred;
    if (w.t_pred != T)
        throw std::runtime_error("window t_pred " + std::to_string(w.t_pred) +
                                 " does not match model t_pred " + std::to_string(T));
    std::vector<double> chans(static_cast<std::size_t>(3) * T);
    const double* fut = w.future_of(agent);
    for (int t = 0; t < T; ++t)
        for (int c = 0; c < 3; ++c)
            chans[static_cast<std::size_t>(c) * T + t] =
                fut[static_cast<std::size_t>(t) * 3 + c] * cfg_.input_scale;
    return tcn_apply("tcn_pred", Array::from({3, T}, std::move(chans)));
}

TrajectoryModel::CvaeTrainOut TrajectoryModel::cvae_train_forward(const Array& h_pred,
                                                                  const Array& cond,
                                                                  const Array& epsilon) const {
    const Array q_h =
        diff::relu(diff::linear(diff::concat({h_pred, cond}, 0), param("q.l1.weight"),
                                param("q.l1.bias")));
    CvaeTrainOut out;
    out.mu = diff::linear(q_h, param("q.mu.weight"), param("q.mu.bias"));
    out.log_var = diff::linear(q_h, param("q.logvar.weight"), param("q.logvar.bias"));
    const Array sigma = diff::exp(diff::scale(out.log_var, 0.5));
    out.z = diff::add(out.mu, diff::mul(sigma, epsilon));
    out.h_cvae = cvae_sample_forward(cond, out.z);
    return out;
}

diff::Array TrajectoryModel::cvae_sample_forward(const Array& cond, const Array& z) const {
    return diff::relu(
        diff::linear(diff::concat({z, cond}, 0), param("p.l1.weight"), param("p.l1.bias")));
}

TrajectoryModel::Rollout TrajectoryModel::head_and_rollout(const Array& h_cvae,
                                                           const double* hist_last_two) const {
    const Array hidden =
        diff::relu(diff::linear(h_cvae, param("head.l1.weight"), param("head.l1.bias")));
    const Array flat = diff::linear(hidden, param("head.out.weight"), param("head.out.bias"));
    Rollout r;
    r.accel = diff::reshape(flat, {cfg_.t_pred, 3});
    const Array x_prev = Array::from({3}, {hist_last_two[0], hist_last_two[1], hist_last_two[2]});
    const Array x_last = Array::from({3}, {hist_last_two[3], hist_last_two[4], hist_last_two[5]});
    r.positions = diff::verlet_rollout(r.accel, x_prev, x_last, cfg_.delta_t);
    return r;
}

TrajectoryModel::TrainForward
TrajectoryModel::train_forward_with_eps(const data::SequenceWindow& w,
                                        const std::vector<std::vector<double>>& eps) const {
    const int A = w.num_agents();
    if (static_cast<int>(eps.size()) != A)
        throw std::runtime_error("epsilon count does not match agent count");

    auto h_enc = encode_context(w);
    auto h_gat = social_attention(h_enc);

    Array traj_sum, kl_sum;
    for (int a = 0; a < A; ++a) {
        const Array cond = diff::concat({h_enc[static_cast<std::size_t>(a)],
                                         h_gat[static_cast<std::size_t>(a)]}, 0);
        const Array h_pred = encode_future(w, a);
        const Array epsilon = Array::from({cfg_.cvae_latent_dim}, eps[static_cast<std::size_t>(a)]);
        const auto cvae = cvae_train_forward(h_pred, cond, epsilon);

        const double* hist = w.history_of(a);
        const auto roll = head_and_rollout(cvae.h_cvae,
                                           hist + static_cast<std::size_t>(cfg_.t_obs - 2) * 3);

        std::vector<double> target(static_cast<std::size_t>(cfg_.t_pred) * 3);
        const double* fut = w.future_of(a);
        for (std::size_t i = 0; i < target.size(); ++i) target[i] = fut[i] * cfg_.loss_scale;
        const Array l_traj = diff::mse(diff::scale(roll.positions, cfg_.loss_scale),
                                       Array::from({cfg_.t_pred, 3}, std::move(target)));
        const Array l_kl = diff::gaussian_kl(cvae.mu, cvae.log_var);

        traj_sum = a == 0 ? l_traj : diff::add(traj_sum, l_traj);
        kl_sum = a == 0 ? l_kl : diff::add(kl_sum, l_kl);
    }

    TrainForward out;
    out.l_traj = diff::scale(traj_sum, 1.0 / A);
    out.l_cvae = diff::scale(kl_sum, 1.0 / A);
    out.l_total = diff::add(out.l_traj, out.l_cvae);
    return out;
}

TrajectoryModel::TrainForward TrajectoryModel::train_forward(const data::SequenceWindow& w,
                                                             Rng& rng) const {
    std::vector<std::vector<double>> eps(static_cast<std::size_t>(w.num_agents()));
    for (auto& e : eps) {
        e.resize(static_cast<std::size_t>(cfg_.cvae_latent_dim));
        for (auto& x : e) x = rng.normal();
    }
    return train_forward_with_eps(w, eps);
}

PredictionSample TrajectoryModel::sample_forward_with_z(
    const data::SequenceWindow& w, const std::vector<std::vector<double>>& z) const {
    const int A = w.num_agents();
    if (static_cast<int>(z.size()) != A)
        throw std::runtime_error("latent count does not match agent count");

    auto h_enc = encode_context(w);
    auto h_gat = social_attention(h_enc);

    PredictionSample sample;
    sample.t_pred = cfg_.t_pred;
    for (int a = 0; a < A; ++a) {
        const Array cond = diff::concat({h_enc[static_cast<std::size_t>(a)],
                                         h_gat[static_cast<std::size_t>(a)]}, 0);
        const Array latent = Array::from({cfg_.cvae_latent_dim}, z[static_cast<std::size_t>(a)]);
        const Array h_cvae = cvae_sample_forward(cond, latent);
        const double* hist = w.history_of(a);
        const auto roll = head_and_rollout(h_cvae,
                                           hist + static_cast<std::size_t>(cfg_.t_obs - 2) * 3);
        sample.accelerations.emplace_back(roll.accel.values().begin(), roll.accel.values().end());
        sample.positions.emplace_back(roll.positions.values().begin(),
                                      roll.positions.values().end());
    }
    return sample;
}

PredictionSample TrajectoryModel::sample_forward(const data::SequenceWindow& w, Rng& rng) const {
    std::vector<std::vector<double>> z(static_cast<std::size_t>(w.num_agents()));
    for (auto& v : z) {
        v.resize(static_cast<std::size_t>(cfg_.cvae_latent_dim));
        for (auto& x : v) x = rng.normal();
    }
    return sample_forward_with_z(w, z);
}

} // namespace airtraj::model
