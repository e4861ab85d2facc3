#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "airtraj/train_eval.hpp"
#include "airtraj/rng.hpp"

using namespace airtraj;
using namespace airtraj::train_eval;
using model::ModelConfig;
using model::TrajectoryModel;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.tcn_channels = 4;
    cfg.tcn_kernel = 2;
    cfg.tcn_layers = 2;
    cfg.cnn_channels = 3;
    cfg.cnn_kernel = 2;
    cfg.gat_heads = 2;
    cfg.gat_dim = 3;
    cfg.cvae_latent_dim = 3;
    cfg.mlp_hidden = 5;
    cfg.t_obs = 4;
    cfg.t_pred = 6;
    return cfg;
}

// Straight-line track: the constant-velocity continuation is exact truth.
data::SequenceWindow straight_window(const ModelConfig& cfg, double vx, double vy,
                                     double x0 = 0.0, double y0 = 0.0) {
    data::SequenceWindow w;
    w.t_obs = cfg.t_obs;
    w.t_pred = cfg.t_pred;
    w.agent_ids = {"AC0"};
    for (int t = 0; t < cfg.t_obs + cfg.t_pred; ++t) {
        auto& dst = t < cfg.t_obs ? w.history : w.future;
        dst.insert(dst.end(), {x0 + vx * t, y0 + vy * t, 300.0});
    }
    w.wind_hist.assign(static_cast<std::size_t>(cfg.t_obs) * 2, 0.0);
    return w;
}

data::SequenceWindow curved_window(const ModelConfig& cfg, Rng& rng, int agents = 1) {
    data::SequenceWindow w;
    w.t_obs = cfg.t_obs;
    w.t_pred = cfg.t_pred;
    for (int a = 0; a < agents; ++a) {
        w.agent_ids.push_back("AC" + std::to_string(a));
        const double x0 = rng.uniform(-1500.0, 1500.0);
        const double y0 = rng.uniform(-1500.0, 1500.0);
        const double vx = rng.uniform(-40.0, 40.0);
        const double vy = rng.uniform(-40.0, 40.0);
        const double curv = rng.uniform(-1.0, 1.0);
        for (int t = 0; t < cfg.t_obs + cfg.t_pred; ++t) {
            auto& dst = t < cfg.t_obs ? w.history : w.future;
            dst.insert(dst.end(),
                       {x0 + vx * t + 0.5 * curv * t * t, y0 + vy * t - 0.4 * curv * t * t, 300.0});
        }
    }
    const double ua = rng.uniform(-6.0, 6.0), uc = rng.uniform(-6.0, 6.0);
    for (int a = 0; a < agents; ++a)
        for (int t = 0; t < cfg.t_obs; ++t) w.wind_hist.insert(w.wind_hist.end(), {ua, uc});
    return w;
}

void zero_params(TrajectoryModel& net) {
    for (auto& p : net.parameters())
        std::fill(p.mutable_values().begin(), p.mutable_values().end(), 0.0);
}

} // namespace

TEST_CASE("ade_fde: zero error, the 3-4-5 offset, and the length guard") {
    const std::vector<double> truth = {0, 0, 0, 1, 0, 0, 2, 0, 0};
    const auto [zade, zfde] = ade_fde(truth, truth);
    CHECK(zade == 0.0);
    CHECK(zfde == 0.0);

    std::vector<double> off = truth;
    for (std::size_t t = 0; t < 3; ++t) {
        off[t * 3 + 0] += 3.0;
        off[t * 3 + 1] += 4.0;
    }
    const auto [ade, fde] = ade_fde(off, truth);
    CHECK(ade == doctest::Approx(0.005).epsilon(1e-12));
    CHECK(fde == doctest::Approx(0.005).epsilon(1e-12));

    const std::vector<double> shorter = {0, 0, 0};
    CHECK_THROWS_AS(ade_fde(shorter, truth), std::runtime_error);
}

TEST_CASE("ade_fde matches the brute-force summation oracle") {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const int T = rng.uniform_int(1, 40);
        std::vector<double> a(static_cast<std::size_t>(T) * 3), b(a.size());
        for (auto& v : a) v = rng.uniform(-5000.0, 5000.0);
        for (auto& v : b) v = rng.uniform(-5000.0, 5000.0);

        const auto [ade, fde] = ade_fde(a, b);

        double acc = 0.0, last = 0.0;
        for (int t = 0; t < T; ++t) {
            double d2 = 0.0;
            for (int k = 0; k < 3; ++k) {
                const double d = a[static_cast<std::size_t>(t) * 3 + k] -
                                 b[static_cast<std::size_t>(t) * 3 + k];
                d2 += d * d;
            }
            last = std::sqrt(d2);
            acc += last;
        }
        CHECK(ade == doctest::Approx(acc / T / 1000.0).epsilon(1e-12));
        CHECK(fde == doctest::Approx(last / 1000.0).epsilon(1e-12));
    }
}

TEST_CASE("best_of_n: truth in the set wins; N=1 degenerates to ade_fde") {
    Rng rng(5);
    const int T = 10;
    std::vector<double> truth(static_cast<std::size_t>(T) * 3);
    for (auto& v : truth) v = rng.uniform(-100.0, 100.0);

    std::vector<std::vector<double>> samples(4, truth);
    for (int n = 0; n < 3; ++n)
        for (auto& v : samples[static_cast<std::size_t>(n)]) v += rng.uniform(-50.0, 50.0);

    std::vector<std::span<const double>> spans(samples.begin(), samples.end());
    const auto [ade, fde] = best_of_n(spans, truth);
    CHECK(ade == 0.0);
    CHECK(fde == 0.0);

    const auto single = best_of_n({std::span<const double>(samples[0])}, truth);
    CHECK(single == ade_fde(samples[0], truth));

    CHECK_THROWS_AS(best_of_n({}, truth), std::runtime_error);
}

TEST_CASE("best_of_n matches the exhaustive minimum scan and pairs the FDE") {
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        const int T = rng.uniform_int(2, 15);
        const int N = rng.uniform_int(1, 7);
        std::vector<double> truth(static_cast<std::size_t>(T) * 3);
        for (auto& v : truth) v = rng.uniform(-500.0, 500.0);
        std::vector<std::vector<double>> samples(static_cast<std::size_t>(N), truth);
        for (auto& s : samples)
            for (auto& v : s) v += rng.uniform(-200.0, 200.0);

        std::vector<std::span<const double>> spans(samples.begin(), samples.end());
        const auto got = best_of_n(spans, truth);

        double best_ade = 1e300, best_fde = 0.0;
        for (const auto& s : samples) {
            const auto [a, f] = ade_fde(s, truth);
            if (a < best_ade) {
                best_ade = a;
                best_fde = f; // the minimizing sample's own FDE
            }
        }
        CHECK(got.first == best_ade);
        CHECK(got.second == best_fde);
    }
}

TEST_CASE("constant-velocity baseline: straight continuation and stationary case") {
    const ModelConfig cfg = tiny_config();
    const auto w = straight_window(cfg, 10.0, -4.0, 100.0, 50.0);
    const auto sample = baseline_const_velocity(w, cfg.t_pred);
    REQUIRE(sample.positions.size() == 1);
    for (int t = 0; t < cfg.t_pred; ++t) {
        const double expect_x = 100.0 + 10.0 * (cfg.t_obs + t);
        const double expect_y = 50.0 - 4.0 * (cfg.t_obs + t);
        CHECK(sample.positions[0][static_cast<std::size_t>(t) * 3 + 0] ==
              doctest::Approx(expect_x).epsilon(1e-12));
        CHECK(sample.positions[0][static_cast<std::size_t>(t) * 3 + 1] ==
              doctest::Approx(expect_y).epsilon(1e-12));
    }

    const auto still = baseline_const_velocity(straight_window(cfg, 0.0, 0.0, 7.0, 8.0), cfg.t_pred);
    for (int t = 0; t < cfg.t_pred; ++t) {
        CHECK(still.positions[0][static_cast<std::size_t>(t) * 3 + 0] == 7.0);
        CHECK(still.positions[0][static_cast<std::size_t>(t) * 3 + 1] == 8.0);
    }
}

TEST_CASE("zero-output model equals the constant-velocity baseline bit-exactly") {
    const ModelConfig cfg = tiny_config();
    TrajectoryModel net(cfg, 77);
    zero_params(net);

    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const auto w = curved_window(cfg, rng, rng.uniform_int(1, 3));
        const auto model_sample = net.sample_forward_with_z(
            w, std::vector<std::vector<double>>(
                   static_cast<std::size_t>(w.num_agents()),
                   std::vector<double>(static_cast<std::size_t>(cfg.cvae_latent_dim), 1.3)));
        const auto baseline = baseline_const_velocity(w, cfg.t_pred);
        for (int a = 0; a < w.num_agents(); ++a)
            for (std::size_t i = 0; i < model_sample.positions[static_cast<std::size_t>(a)].size();
                 ++i)
                CHECK(model_sample.positions[static_cast<std::size_t>(a)][i] ==
                      baseline.positions[static_cast<std::size_t>(a)][i]);
    }
}

TEST_CASE("nearest-neighbor baseline: exact hit, nearer entry, tie to lowest index") {
    const ModelConfig cfg = tiny_config();
    std::vector<data::SequenceWindow> train = {straight_window(cfg, 10.0, 0.0),
                                               straight_window(cfg, -10.0, 5.0, 500.0, 0.0)};
    const auto index = build_index(train);
    REQUIRE(index.histories.size() == 2);

    // Query equals the first indexed history.
    const auto hit = baseline_nearest_neighbor(train[0], index);
    for (std::size_t i = 0; i < hit.positions[0].size(); ++i)
        CHECK(hit.positions[0][i] == index.futures[0][i]);

    // Query closer to entry B.
    const auto near_b = baseline_nearest_neighbor(straight_window(cfg, -10.0, 5.0, 499.0, 0.5), index);
    for (std::size_t i = 0; i < near_b.positions[0].size(); ++i)
        CHECK(near_b.positions[0][i] == index.futures[1][i]);

    // Exact tie between two identical histories with different futures.
    std::vector<data::SequenceWindow> tied = {straight_window(cfg, 3.0, 0.0),
                                              straight_window(cfg, 3.0, 0.0)};
    tied[1].future[0] += 999.0;
    const auto tie_index = build_index(tied);
    const auto tie = baseline_nearest_neighbor(tied[0], tie_index);
    CHECK(tie.positions[0][0] == tie_index.futures[0][0]);

    CHECK_THROWS_AS(baseline_nearest_neighbor(train[0], TrajectoryIndex{}), std::runtime_error);
}

TEST_CASE("nearest-neighbor choice always matches the exhaustive scan") {
    const ModelConfig cfg = tiny_config();
    Rng rng(9);
    std::vector<data::SequenceWindow> train;
    for (int i = 0; i < 100; ++i) train.push_back(curved_window(cfg, rng));
    const auto index = build_index(train);
    REQUIRE(index.histories.size() == 100);

    for (int trial = 0; trial < 50; ++trial) {
        const auto query = curved_window(cfg, rng);
        const auto got = baseline_nearest_neighbor(query, index);

        std::size_t best = 0;
        double best_d = 1e300;
        for (std::size_t i = 0; i < index.histories.size(); ++i) {
            double d = 0.0;
            for (std::size_t k = 0; k < index.histories[i].size(); ++k) {
                const double diff = index.histories[i][k] - query.history[k];
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        for (std::size_t i = 0; i < got.positions[0].size(); ++i)
            CHECK(got.positions[0][i] == index.futures[best][i]);
    }
}

TEST_CASE("loss report: perfect prediction with a collapsed posterior is exactly zero") {
    const ModelConfig cfg = tiny_config();
    TrajectoryModel net(cfg, 10);
    zero_params(net); // mu = 0, log_var = 0, accelerations = 0

    const auto w = straight_window(cfg, 12.0, -7.0, 30.0, 60.0);
    Rng rng(1);
    const auto fwd = net.train_forward(w, rng);
    CHECK(fwd.l_traj.scalar_value() == 0.0);
    CHECK(fwd.l_cvae.scalar_value() == 0.0);
    CHECK(fwd.l_total.scalar_value() == 0.0);
}

TEST_CASE("loss additivity is exact and terms are non-negative") {
    const ModelConfig cfg = tiny_config();
    TrajectoryModel net(cfg, 11);
    Rng rng(12);
    for (int trial = 0; trial < 25; ++trial) {
        const auto w = curved_window(cfg, rng, rng.uniform_int(1, 3));
        Rng step_rng(static_cast<std::uint64_t>(trial));
        const auto fwd = net.train_forward(w, step_rng);
        CHECK(fwd.l_traj.scalar_value() >= 0.0);
        CHECK(fwd.l_cvae.scalar_value() >= 0.0);
        CHECK(fwd.l_total.scalar_value() ==
              fwd.l_traj.scalar_value() + fwd.l_cvae.scalar_value());
    }
}

TEST_CASE("training is deterministic: same seed, identical parameters") {
    const ModelConfig cfg = tiny_config();
    Rng rng(13);
    std::vector<data::SequenceWindow> windows;
    for (int i = 0; i < 6; ++i) windows.push_back(curved_window(cfg, rng, 1 + i % 2));

    TrainOptions opts;
    opts.epochs = 2;
    opts.seed = 99;

    TrajectoryModel a(cfg, 21), b(cfg, 21);
    const auto ha = train(a, windows, opts);
    const auto hb = train(b, windows, opts);
    REQUIRE(ha.size() == hb.size());
    for (std::size_t i = 0; i < ha.size(); ++i) CHECK(ha[i].l_total == hb[i].l_total);
    for (std::size_t p = 0; p < a.parameters().size(); ++p)
        for (std::size_t i = 0; i < a.parameters()[p].size(); ++i)
            CHECK(a.parameters()[p].values()[i] == b.parameters()[p].values()[i]);
}

TEST_CASE("loss decreases over 200 steps on a 10-window toy set") {
    const ModelConfig cfg = tiny_config();
    Rng rng(14);
    std::vector<data::SequenceWindow> windows;
    for (int i = 0; i < 10; ++i) windows.push_back(curved_window(cfg, rng));

    TrajectoryModel net(cfg, 31);
    TrainOptions opts;
    opts.epochs = 20; // 10 windows -> 200 steps
    opts.seed = 5;
    const auto history = train(net, windows, opts);
    REQUIRE(history.size() == 200);

    double first = 0.0, last = 0.0;
    for (int i = 0; i < 5; ++i) {
        first += history[static_cast<std::size_t>(i)].l_total;
        last += history[history.size() - 1 - static_cast<std::size_t>(i)].l_total;
    }
    CHECK(last < first);
}

TEST_CASE("a non-finite loss aborts with a diagnostic checkpoint") {
    const ModelConfig cfg = tiny_config();
    Rng rng(15);
    std::vector<data::SequenceWindow> windows = {curved_window(cfg, rng)};

    TrajectoryModel net(cfg, 41);
    net.parameters()[0].mutable_values()[0] = 1e300; // overflow on the first forward

    const std::string diag = "/tmp/airtraj_diag_ckpt.bin";
    std::filesystem::remove(diag);
    TrainOptions opts;
    opts.epochs = 1;
    opts.seed = 0;
    CHECK_THROWS_AS(train(net, windows, opts, diag), TrainAbort);
    CHECK(std::filesystem::exists(diag));
    std::filesystem::remove(diag);
}

TEST_CASE("predict: sample counts and seeded reproducibility") {
    const ModelConfig cfg = tiny_config();
    TrajectoryModel net(cfg, 51);
    Rng rng(16);
    const auto w = curved_window(cfg, rng, 2);

    const auto one = predict(net, w, 1, 7);
    REQUIRE(one.size() == 1);
    CHECK(one[0].positions.size() == 2);

    const auto five_a = predict(net, w, 5, 7);
    const auto five_b = predict(net, w, 5, 7);
    REQUIRE(five_a.size() == 5);
    for (int n = 0; n < 5; ++n)
        for (std::size_t i = 0; i < five_a[static_cast<std::size_t>(n)].positions[0].size(); ++i)
            CHECK(five_a[static_cast<std::size_t>(n)].positions[0][i] ==
                  five_b[static_cast<std::size_t>(n)].positions[0][i]);

    CHECK_THROWS_AS(predict(net, w, 0, 7), std::invalid_argument);
}

TEST_CASE("evaluate: perfect predictor scores zero; const-velocity nails straight lines") {
    const ModelConfig cfg = tiny_config();
    Rng rng(17);
    std::vector<data::SequenceWindow> windows = {curved_window(cfg, rng, 2)};

    const Predictor perfect = [&](const data::SequenceWindow& w, int n, std::uint64_t) {
        model::PredictionSample s;
        s.t_pred = w.t_pred;
        for (int a = 0; a < w.num_agents(); ++a) {
            s.positions.emplace_back(w.future_of(a),
                                     w.future_of(a) + static_cast<std::size_t>(w.t_pred) * 3);
            s.accelerations.emplace_back(static_cast<std::size_t>(w.t_pred) * 3, 0.0);
        }
        return std::vector<model::PredictionSample>(static_cast<std::size_t>(n), s);
    };
    const auto perfect_result = evaluate(perfect, windows, 5, 1);
    CHECK(perfect_result.ade_km == 0.0);
    CHECK(perfect_result.fde_km == 0.0);
    CHECK(perfect_result.n_agents == 2);

    std::vector<data::SequenceWindow> straight = {straight_window(cfg, 25.0, -10.0),
                                                  straight_window(cfg, -15.0, 30.0, 1.0, 2.0)};
    const auto cv = evaluate(const_velocity_predictor(cfg.t_pred), straight, 5, 1);
    CHECK(cv.ade_km < 1e-12);
    CHECK(cv.fde_km < 1e-12);
}

TEST_CASE("evaluate equals an independent per-window accumulation") {
    const ModelConfig cfg = tiny_config();
    TrajectoryModel net(cfg, 61);
    Rng rng(18);
    std::vector<data::SequenceWindow> windows;
    for (int i = 0; i < 12; ++i) windows.push_back(curved_window(cfg, rng, 1 + i % 3));

    const int N = 4;
    const std::uint64_t seed = 33;
    const auto result = evaluate(model_predictor(net), windows, N, seed);

    double ade_acc = 0.0, fde_acc = 0.0;
    std::size_t count = 0;
    for (std::size_t wi = 0; wi < windows.size(); ++wi) {
        const auto samples = predict(net, windows[wi], N, seed + wi);
        for (int a = 0; a < windows[wi].num_agents(); ++a) {
            double best_a = 1e300, best_f = 0.0;
            for (const auto& s : samples) {
                const auto [ad, fd] = ade_fde(
                    s.positions[static_cast<std::size_t>(a)],
                    std::span<const double>(windows[wi].future_of(a),
                                            static_cast<std::size_t>(windows[wi].t_pred) * 3));
                if (ad < best_a) {
                    best_a = ad;
                    best_f = fd;
                }
            }
            ade_acc += best_a;
            fde_acc += best_f;
            ++count;
        }
    }
    CHECK(result.n_agents == count);
    CHECK(result.ade_km == doctest::Approx(ade_acc / count).epsilon(1e-12));
    CHECK(result.fde_km == doctest::Approx(fde_acc / count).epsilon(1e-12));

    // Deterministic given (checkpoint, test set, N, seed).
    const auto again = evaluate(model_predictor(net), windows, N, seed);
    CHECK(again.ade_km == result.ade_km);
    CHECK(again.fde_km == result.fde_km);
}
