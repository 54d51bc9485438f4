#pragma once

#include <cmath>
#include <vector>

#include "dlfuzz/errors.hpp"
#include "dlfuzz/geometry.hpp"
#include "dlfuzz/scenario.hpp"

namespace dlfuzz {

struct PredictionConfig {
    double process_noise = 0.1;      // white-noise acceleration intensity q
    double measurement_noise = 0.05; // position measurement std, meters
    double v_move = 1.0;             // speed that counts as "has moved", m/s
    double init_velocity_var = 100.0;
};

struct TimedPoint {
    double t = 0.0;
    Vec2 p;
};

struct PredictedTrajectory {
    std::vector<TimedPoint> samples;
    double horizon = 0.0;
    AgentId source_agent = 0;

    bool stationary() const {
        return samples.size() < 2 ||
               distance(samples.front().p, samples.back().p) <= 1e-9;
    }
};

namespace detail {

/// One-axis constant-velocity Kalman filter: state (position, velocity),
/// scalar position measurements. The planar filter is two of these, which
/// is exact because the CV model is axis-separable with diagonal noise.
class AxisKalman {
public:
    AxisKalman(double z0, const PredictionConfig& cfg)
        : pos_(z0), vel_(0.0), p00_(cfg.measurement_noise * cfg.measurement_noise),
          p01_(0.0), p11_(cfg.init_velocity_var), q_(cfg.process_noise),
          r2_(cfg.measurement_noise * cfg.measurement_noise) {}

    void predict(double dt) {
        pos_ += vel_ * dt;
        // P <- F P F^T + Q, Q = q * [[dt^3/3, dt^2/2], [dt^2/2, dt]]
        const double p00 = p00_ + dt * (p01_ + p01_ + dt * p11_);
        const double p01 = p01_ + dt * p11_;
        p00_ = p00 + q_ * dt * dt * dt / 3.0;
        p01_ = p01 + q_ * dt * dt / 2.0;
        p11_ = p11_ + q_ * dt;
    }

    /// Returns the innovation (pre-update residual).
    double update(double z) {
        const double innovation = z - pos_;
        const double s = p00_ + r2_;
        const double k0 = p00_ / s;
        const double k1 = p01_ / s;
        pos_ += k0 * innovation;
        vel_ += k1 * innovation;
        const double p00 = (1.0 - k0) * p00_;
        const double p01 = (1.0 - k0) * p01_;
        const double p11 = p11_ - k1 * p01_;
        p00_ = p00;
        p01_ = p01;
        p11_ = p11;
        return innovation;
    }

    double position() const { return pos_; }
    double velocity() const { return vel_; }

private:
    double pos_, vel_;
    double p00_, p01_, p11_;
    double q_, r2_;
};

}  // namespace detail

/// Fit a constant-velocity Kalman filter over uniformly sampled history and
/// propagate the final state forward with no further measurement updates.
/// The last innovation norm is written to `innovation_out` when non-null.
inline PredictedTrajectory kalman_predict(const std::vector<TimedPoint>& history, double horizon,
                                          const PredictionConfig& cfg = {},
                                          double* innovation_out = nullptr) {
    if (history.size() < 3)
        throw InsufficientHistoryError("kalman_predict needs at least 3 history samples");
    const double dt = history[1].t - history[0].t;
    if (dt <= 0.0) throw NonUniformSamplingError("history timestamps must increase");
    for (std::size_t i = 1; i < history.size(); ++i) {
        if (std::abs((history[i].t - history[i - 1].t) - dt) > 1e-6)
            throw NonUniformSamplingError("history is not uniformly sampled");
    }

    detail::AxisKalman fx(history[0].p.x, cfg);
    detail::AxisKalman fy(history[0].p.y, cfg);
    double last_innovation = 0.0;
    for (std::size_t i = 1; i < history.size(); ++i) {
        fx.predict(dt);
        fy.predict(dt);
        const double ix = fx.update(history[i].p.x);
        const double iy = fy.update(history[i].p.y);
        last_innovation = std::sqrt(ix * ix + iy * iy);
    }
    if (innovation_out) *innovation_out = last_innovation;

    PredictedTrajectory out;
    out.horizon = horizon;
    const double t0 = history.back().t;
    const Vec2 p0{fx.position(), fy.position()};
    const Vec2 vel{fx.velocity(), fy.velocity()};
    const auto n = static_cast<long long>(std::llround(horizon / dt));
    for (long long k = 1; k <= n; ++k) {
        const double tau = dt * static_cast<double>(k);
        out.samples.push_back({t0 + tau, p0 + tau * vel});
    }
    return out;
}

/// Intended trajectory of an agent around a stop instant.
///
/// The prediction anchors at the last instant the agent was actually moving
/// (speed > v_move), fitting the filter over the window that precedes it; a
/// filter run through the stopped tail would just predict "stay put" and
/// erase the intent signal. Agents that never moved yield a stationary
/// trajectory at their spawn point.
inline PredictedTrajectory pre_stop_intent(const Observation& obs, AgentId agent, double t_stop,
                                           double window, double horizon,
                                           const PredictionConfig& cfg = {}) {
    if (!obs.has_agent(agent)) throw UnknownAgentError("agent " + std::to_string(agent) + " unknown");
    const double dt = obs.dt;
    const auto idx_of = [&](double t) {
        return static_cast<long long>(std::floor(t / dt + 1e-9));
    };
    const long long last_idx = static_cast<long long>(obs.scenes.size()) - 1;
    const long long stop_idx = std::min(last_idx, std::max(0LL, idx_of(t_stop)));
    const long long search_lo = std::max(0LL, idx_of(t_stop - (window + 10.0)));

    long long move_idx = -1;
    for (long long k = stop_idx; k >= search_lo; --k) {
        if (obs.state_at(static_cast<std::size_t>(k), agent).v > cfg.v_move) {
            move_idx = k;
            break;
        }
    }

    const auto stationary_at = [&](Vec2 p, double t0) {
        PredictedTrajectory out;
        out.horizon = horizon;
        out.source_agent = agent;
        const auto n = static_cast<long long>(std::llround(horizon / dt));
        for (long long k = 0; k <= n; ++k) out.samples.push_back({t0 + dt * static_cast<double>(k), p});
        return out;
    };

    if (move_idx < 0)
        return stationary_at(obs.state_at(0, agent).p, t_stop);

    const long long hist_lo = std::max(0LL, move_idx - static_cast<long long>(std::llround(window / dt)));
    if (move_idx - hist_lo + 1 < 3)
        return stationary_at(obs.state_at(static_cast<std::size_t>(move_idx), agent).p,
                             dt * static_cast<double>(move_idx));

    std::vector<TimedPoint> history;
    history.reserve(static_cast<std::size_t>(move_idx - hist_lo + 1));
    for (long long k = hist_lo; k <= move_idx; ++k)
        history.push_back({dt * static_cast<double>(k), obs.state_at(static_cast<std::size_t>(k), agent).p});

    PredictedTrajectory out = kalman_predict(history, horizon, cfg);
    out.source_agent = agent;
    return out;
}

}  // namespace dlfuzz
