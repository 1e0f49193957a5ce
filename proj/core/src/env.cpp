#include "rolab/env.hpp"

#include <cmath>
#include <stdexcept>

namespace rolab {

namespace {

double clip(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

double wrap_angle(double th) {
  // to (-pi, pi]
  th = std::fmod(th + M_PI, 2.0 * M_PI);
  if (th <= 0.0) th += 2.0 * M_PI;
  return th - M_PI;
}

}  // namespace

EnvSpec EnvSpec::pointmass() {
  EnvSpec s;
  s.name = EnvName::PointMass;
  s.state_dim = 4;
  s.action_dim = 2;
  s.horizon = 100;
  return s;
}

EnvSpec EnvSpec::pendulum() {
  EnvSpec s;
  s.name = EnvName::Pendulum;
  s.state_dim = 3;
  s.action_dim = 1;
  s.horizon = 200;
  return s;
}

EnvSpec EnvSpec::by_name(const std::string& name) {
  if (name == "pointmass") return pointmass();
  if (name == "pendulum") return pendulum();
  throw std::invalid_argument("unknown environment: " + name);
}

std::string EnvSpec::name_str() const {
  return name == EnvName::PointMass ? "pointmass" : "pendulum";
}

std::pair<Tensor, double> env_step(const EnvSpec& spec, const Tensor& state,
                                   const Tensor& action) {
  if (state.cols() != spec.state_dim || state.rows() != 1)
    throw std::invalid_argument("env_step: state dim mismatch");
  if (action.cols() != spec.action_dim || action.rows() != 1)
    throw std::invalid_argument("env_step: action dim mismatch");
  if (!state.all_finite() || !action.all_finite())
    throw std::invalid_argument("env_step: non-finite input");

  Tensor a(1, spec.action_dim);
  for (int i = 0; i < spec.action_dim; ++i) a(0, i) = clip(action(0, i), -1.0, 1.0);

  if (spec.name == EnvName::PointMass) {
    const double px = state(0, 0), py = state(0, 1);
    const double vx = state(0, 2), vy = state(0, 3);
    const double dx = px - spec.target[0], dy = py - spec.target[1];
    const double reward = -(dx * dx + dy * dy) -
                          spec.action_cost * (a(0, 0) * a(0, 0) + a(0, 1) * a(0, 1));
    const double ax = spec.force_scale * a(0, 0) / spec.mass;
    const double ay = spec.force_scale * a(0, 1) / spec.mass;
    Tensor next(1, 4);
    next(0, 2) = (1.0 - spec.drag) * vx + spec.dt * ax;
    next(0, 3) = (1.0 - spec.drag) * vy + spec.dt * ay;
    next(0, 0) = px + spec.dt * next(0, 2);
    next(0, 1) = py + spec.dt * next(0, 3);
    return {next, reward};
  }

  // pendulum
  const double th = std::atan2(state(0, 1), state(0, 0));
  const double thdot = state(0, 2);
  const double th_err = wrap_angle(th);
  const double reward = -(spec.theta_cost * th_err * th_err +
                          spec.speed_cost * thdot * thdot +
                          spec.action_cost_pend * a(0, 0) * a(0, 0));
  const double u = spec.torque_limit * a(0, 0);
  const double inertia = spec.pend_mass * spec.length * spec.length;
  const double thdd = (spec.grav / spec.length) * std::sin(th) + u / inertia;
  const double thdot2 = clip(thdot + spec.dt * thdd, -spec.max_speed, spec.max_speed);
  const double th2 = th + spec.dt * thdot2;
  Tensor next(1, 3);
  next(0, 0) = std::cos(th2);
  next(0, 1) = std::sin(th2);
  next(0, 2) = thdot2;
  return {next, reward};
}

Tensor initial_state(const EnvSpec& spec, Rng& rng) {
  if (spec.name == EnvName::PointMass) {
    Tensor s(1, 4);
    s(0, 0) = rng.uniform(-spec.start_pos_box, spec.start_pos_box);
    s(0, 1) = rng.uniform(-spec.start_pos_box, spec.start_pos_box);
    s(0, 2) = rng.uniform(-spec.start_vel_box, spec.start_vel_box);
    s(0, 3) = rng.uniform(-spec.start_vel_box, spec.start_vel_box);
    return s;
  }
  const double th = rng.uniform(-M_PI, M_PI);
  const double thdot = rng.uniform(-spec.start_speed_box, spec.start_speed_box);
  Tensor s(1, 3);
  s(0, 0) = std::cos(th);
  s(0, 1) = std::sin(th);
  s(0, 2) = thdot;
  return s;
}

RolloutResult rollout_from(const EnvSpec& spec, const Tensor& start,
                           const PolicyFn& policy, const ObsFilter* filter) {
  RolloutResult out;
  out.trajectory.reserve(static_cast<std::size_t>(spec.horizon));
  Tensor state = start;
  for (int t = 0; t < spec.horizon; ++t) {
    const Tensor obs = filter ? (*filter)(state) : state;
    Tensor action = policy(obs);
    if (action.rows() != 1 || action.cols() != spec.action_dim)
      throw std::invalid_argument("rollout: policy returned wrong action dim");
    auto [next, reward] = env_step(spec, state, action);
    Transition tr;
    tr.s = state;
    tr.a = Tensor(1, spec.action_dim);
    for (int i = 0; i < spec.action_dim; ++i)
      tr.a(0, i) = clip(action(0, i), -1.0, 1.0);
    tr.r = reward;
    tr.s_next = next;
    tr.done = (t + 1 == spec.horizon);
    out.episode_return += reward;
    out.trajectory.push_back(std::move(tr));
    state = std::move(next);
  }
  return out;
}

RolloutResult rollout(const EnvSpec& spec, const PolicyFn& policy,
                      std::uint64_t seed, const ObsFilter* filter) {
  Rng rng(seed);
  return rollout_from(spec, initial_state(spec, rng), policy, filter);
}

PolicyFn expert_controller(const EnvSpec& spec, double gain_scale) {
  if (spec.name == EnvName::PointMass) {
    const double kp = spec.ctrl_kp * gain_scale;
    const double kd = spec.ctrl_kd * gain_scale;
    const double tx = spec.target[0], ty = spec.target[1];
    return [kp, kd, tx, ty](const Tensor& obs) {
      Tensor a(1, 2);
      a(0, 0) = clip(kp * (tx - obs(0, 0)) - kd * obs(0, 2), -1.0, 1.0);
      a(0, 1) = clip(kp * (ty - obs(0, 1)) - kd * obs(0, 3), -1.0, 1.0);
      return a;
    };
  }
  // Pendulum swing-up: pump mechanical energy toward the upright level,
  // then hand over to a stabilizing PD near the top.
  const EnvSpec s = spec;
  return [s, gain_scale](const Tensor& obs) {
    const double th = std::atan2(obs(0, 1), obs(0, 0));
    const double thdot = obs(0, 2);
    const double th_err = wrap_angle(th);
    const double inertia = s.pend_mass * s.length * s.length;
    const double energy = 0.5 * inertia * thdot * thdot +
                          s.pend_mass * s.grav * s.length * (std::cos(th) - 1.0);
    double u;
    if (std::cos(th) > 0.9 && std::abs(thdot) < 2.5) {
      u = gain_scale * (-12.0 * th_err - 2.5 * thdot);
    } else {
      u = gain_scale * thdot * (-energy);
    }
    Tensor a(1, 1);
    a(0, 0) = clip(u / s.torque_limit, -1.0, 1.0);
    return a;
  };
}

}  // namespace rolab
