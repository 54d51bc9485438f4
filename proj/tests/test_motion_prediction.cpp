#include <catch2/catch.hpp>

#include <array>

#include "dlfuzz/motion_prediction.hpp"
#include "dlfuzz/rng.hpp"
#include "fixtures.hpp"

using namespace dlfuzz;

namespace {

// Independent oracle: the same constant-velocity filter written as a full
// 4x4 matrix implementation (state x, y, vx, vy). The shipped filter runs
// two 2-state axis filters; both routes must agree to float precision.
struct MatrixKalman {
    std::array<double, 4> x{};
    std::array<std::array<double, 4>, 4> P{};
    double q, r2;

    MatrixKalman(Vec2 z0, const PredictionConfig& cfg)
        : q(cfg.process_noise), r2(cfg.measurement_noise * cfg.measurement_noise) {
        x = {z0.x, z0.y, 0.0, 0.0};
        for (auto& row : P) row.fill(0.0);
        P[0][0] = P[1][1] = r2;
        P[2][2] = P[3][3] = cfg.init_velocity_var;
    }

    void predict(double dt) {
        // F = [I, dt*I; 0, I]
        x[0] += dt * x[2];
        x[1] += dt * x[3];
        std::array<std::array<double, 4>, 4> FP{};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                double v = P[i][j];
                if (i < 2) v += dt * P[i + 2][j];
                FP[i][j] = v;
            }
        std::array<std::array<double, 4>, 4> FPFt{};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) {
                double v = FP[i][j];
                if (j < 2) v += dt * FP[i][j + 2];
                FPFt[i][j] = v;
            }
        P = FPFt;
        const double d3 = q * dt * dt * dt / 3.0, d2 = q * dt * dt / 2.0, d1 = q * dt;
        P[0][0] += d3;
        P[1][1] += d3;
        P[0][2] += d2;
        P[2][0] += d2;
        P[1][3] += d2;
        P[3][1] += d2;
        P[2][2] += d1;
        P[3][3] += d1;
    }

    void update(Vec2 z) {
        // H selects (x, y); S = H P H^T + r2 I is diagonal by symmetry of
        // the axis-decoupled covariance, but invert the full 2x2 anyway.
        const double s00 = P[0][0] + r2, s01 = P[0][1], s10 = P[1][0], s11 = P[1][1] + r2;
        const double det = s00 * s11 - s01 * s10;
        const double i00 = s11 / det, i01 = -s01 / det, i10 = -s10 / det, i11 = s00 / det;
        const double y0 = z.x - x[0], y1 = z.y - x[1];
        std::array<double, 4> k0{}, k1{};
        for (int i = 0; i < 4; ++i) {
            k0[i] = P[i][0] * i00 + P[i][1] * i10;
            k1[i] = P[i][0] * i01 + P[i][1] * i11;
        }
        for (int i = 0; i < 4; ++i) x[i] += k0[i] * y0 + k1[i] * y1;
        std::array<std::array<double, 4>, 4> newP{};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                newP[i][j] = P[i][j] - k0[i] * P[0][j] - k1[i] * P[1][j];
        P = newP;
    }
};

PredictedTrajectory matrix_predict(const std::vector<TimedPoint>& history, double horizon,
                                   const PredictionConfig& cfg) {
    MatrixKalman kf(history[0].p, cfg);
    const double dt = history[1].t - history[0].t;
    for (std::size_t i = 1; i < history.size(); ++i) {
        kf.predict(dt);
        kf.update(history[i].p);
    }
    PredictedTrajectory out;
    const auto n = static_cast<long long>(std::llround(horizon / dt));
    for (long long k = 1; k <= n; ++k) {
        const double tau = dt * static_cast<double>(k);
        out.samples.push_back({history.back().t + tau,
                               {kf.x[0] + tau * kf.x[2], kf.x[1] + tau * kf.x[3]}});
    }
    return out;
}

std::vector<TimedPoint> line_history(Vec2 v0, Vec2 vel, int n, double dt = 0.1) {
    std::vector<TimedPoint> h;
    for (int k = 0; k < n; ++k) {
        const double t = dt * k;
        h.push_back({t, v0 + t * vel});
    }
    return h;
}

}  // namespace

TEST_CASE("constant-velocity input predicts along the line") {
    const auto history = line_history({0, 0}, {2, 0}, 30);
    const auto pred = kalman_predict(history, 1.0);
    REQUIRE(pred.samples.size() == 10);
    for (const TimedPoint& tp : pred.samples) {
        CHECK(std::fabs(tp.p.x - 2.0 * tp.t) < 0.05);
        CHECK(std::fabs(tp.p.y) < 0.05);
    }
}

TEST_CASE("axis filter agrees with the independent matrix filter") {
    SplitMix64 rng(17);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<TimedPoint> history;
        Vec2 p{rng.uniform(-50, 50), rng.uniform(-50, 50)};
        Vec2 vel{rng.uniform(-8, 8), rng.uniform(-8, 8)};
        for (int k = 0; k < 25; ++k) {
            history.push_back({0.1 * k, p});
            p = p + 0.1 * vel + Vec2{rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03)};
        }
        const auto a = kalman_predict(history, 2.0);
        const auto b = matrix_predict(history, 2.0, {});
        REQUIRE(a.samples.size() == b.samples.size());
        for (std::size_t i = 0; i < a.samples.size(); ++i) {
            REQUIRE(a.samples[i].t == Approx(b.samples[i].t));
            REQUIRE(distance(a.samples[i].p, b.samples[i].p) < 1e-9);
        }
    }
}

TEST_CASE("identical history stays put") {
    const auto history = line_history({3, 4}, {0, 0}, 10);
    const auto pred = kalman_predict(history, 1.0);
    for (const TimedPoint& tp : pred.samples) CHECK(distance(tp.p, {3, 4}) < 0.05);
}

TEST_CASE("history preconditions") {
    CHECK_THROWS_AS(kalman_predict(line_history({0, 0}, {1, 0}, 2), 1.0), InsufficientHistoryError);
    auto bad = line_history({0, 0}, {1, 0}, 10);
    bad[5].t += 0.03;
    CHECK_THROWS_AS(kalman_predict(bad, 1.0), NonUniformSamplingError);
}

TEST_CASE("translation equivariance is exact") {
    SplitMix64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<TimedPoint> history;
        Vec2 p{0, 0};
        for (int k = 0; k < 20; ++k) {
            history.push_back({0.1 * k, p});
            p = p + Vec2{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        }
        const Vec2 d{rng.uniform(-100, 100), rng.uniform(-100, 100)};
        auto shifted = history;
        for (TimedPoint& tp : shifted) tp.p = tp.p + d;
        const auto a = kalman_predict(history, 1.5);
        const auto b = kalman_predict(shifted, 1.5);
        for (std::size_t i = 0; i < a.samples.size(); ++i)
            REQUIRE(distance(a.samples[i].p + d, b.samples[i].p) < 1e-9);
    }
}

TEST_CASE("innovation settles on clean constant-velocity input") {
    const auto history = line_history({5, -3}, {3, 1}, 25);
    double innovation = 1.0;
    kalman_predict(history, 1.0, {}, &innovation);
    CHECK(innovation < 0.01);
}

TEST_CASE("doubling the horizon doubles the sample count") {
    const auto history = line_history({0, 0}, {1, 1}, 12);
    const auto a = kalman_predict(history, 2.0);
    const auto b = kalman_predict(history, 4.0);
    CHECK(std::llabs(static_cast<long long>(b.samples.size()) -
                     2 * static_cast<long long>(a.samples.size())) <= 1);
}

TEST_CASE("pre-stop intent extrapolates the pre-braking motion") {
    // cruise then brake to a stop: the intent must keep going past the stop
    Observation obs;
    obs.dt = 0.1;
    obs.av_ids = {1};
    double x = 0.0, v = 8.0;
    for (int k = 0; k < 200; ++k) {
        if (k > 100) v = std::fmax(0.0, v - 0.25);
        x += v * 0.1;
        Scene s;
        s[1] = {{x, 0.0}, 0.0, v, 0.0};
        obs.scenes.push_back(s);
    }
    const double t_stop = obs.end_time();
    const auto intent = pre_stop_intent(obs, 1, t_stop, 5.0, 5.0);
    REQUIRE(intent.samples.size() >= 2);
    const double path_len = distance(intent.samples.front().p, intent.samples.back().p);
    CHECK(path_len > 0.5 * 1.0 * 5.0);
    CHECK(intent.samples.back().p.x > x);  // continues along the old heading
}

TEST_CASE("agents that never moved yield a stationary intent at spawn") {
    Observation obs;
    obs.dt = 0.1;
    obs.av_ids = {1};
    for (int k = 0; k < 80; ++k) {
        Scene s;
        s[1] = {{1.0, 2.0}, 0.0, 0.2, 0.0};  // creeping below the motion threshold
        obs.scenes.push_back(s);
    }
    const auto intent = pre_stop_intent(obs, 1, 6.0, 5.0, 5.0);
    CHECK(intent.stationary());
    for (const TimedPoint& tp : intent.samples) CHECK(distance(tp.p, {1.0, 2.0}) < 1e-9);

    CHECK_THROWS_AS(pre_stop_intent(obs, 9, 6.0, 5.0, 5.0), UnknownAgentError);
}

TEST_CASE("t_stop before any motion gives a stationary intent") {
    Observation obs;
    obs.dt = 0.1;
    obs.av_ids = {1};
    for (int k = 0; k < 100; ++k) {
        const double v = k > 50 ? 5.0 : 0.0;
        Scene s;
        s[1] = {{v * 0.1 * std::fmax(0, k - 50), 0.0}, 0.0, v, 0.0};
        obs.scenes.push_back(s);
    }
    const auto intent = pre_stop_intent(obs, 1, 3.0, 5.0, 5.0);
    CHECK(intent.stationary());
}
