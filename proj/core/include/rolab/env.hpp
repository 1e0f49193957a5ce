#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "rolab/rng.hpp"
#include "rolab/tensor.hpp"

namespace rolab {

enum class EnvName { PointMass, Pendulum };

// Analytic continuous-control tasks. Both are deterministic, run for a fixed
// horizon with no early termination, and clip actions to [-1,1]^m before the
// dynamics.
//
// pointmass: state (px, py, vx, vy), action = planar force. Semi-implicit
//   Euler: v' = v + dt*force_scale*a/mass, p' = p + dt*v'. Reward (computed
//   on the pre-step state and the clipped action):
//     -||p - target||^2 - action_cost*||a||^2.
//
// pendulum: observation (cos th, sin th, thdot) with th measured from
//   upright. Point-mass rod: thdd = (grav/length)*sin(th) + u/(mass*length^2)
//   with u = torque_limit*a; speed clamped to |thdot| <= max_speed. Reward:
//     -(theta_cost*wrap(th)^2 + speed_cost*thdot^2 + action_cost_pend*a^2).
struct EnvSpec {
  EnvName name = EnvName::PointMass;
  int state_dim = 4;
  int action_dim = 2;
  int horizon = 100;
  double dt = 0.05;

  // pointmass parameters
  double mass = 1.0;
  double force_scale = 1.0;
  double drag = 0.0;  // v' = (1-drag)*v + dt*force/mass
  std::array<double, 2> target{1.0, 1.0};
  double start_pos_box = 0.5;  // p0 ~ U(-box, box)^2 around the origin
  double start_vel_box = 0.1;
  double action_cost = 0.01;
  // scripted-expert PD gains (the task definition includes its controller)
  double ctrl_kp = 4.0;
  double ctrl_kd = 3.0;

  // pendulum parameters
  double length = 1.0;
  double grav = 10.0;
  double pend_mass = 1.0;
  double torque_limit = 2.0;
  double max_speed = 8.0;
  double start_speed_box = 1.0;  // th0 ~ U(-pi, pi), thdot0 ~ U(-box, box)
  double theta_cost = 1.0;
  double speed_cost = 0.1;
  double action_cost_pend = 0.001;

  static EnvSpec pointmass();
  static EnvSpec pendulum();
  static EnvSpec by_name(const std::string& name);
  std::string name_str() const;
};

struct Transition {
  Tensor s, a;
  double r = 0.0;
  Tensor s_next;
  bool done = false;
};

// One deterministic dynamics step. Throws on dimension mismatch or
// non-finite input.
std::pair<Tensor, double> env_step(const EnvSpec& spec, const Tensor& state,
                                   const Tensor& action);

Tensor initial_state(const EnvSpec& spec, Rng& rng);

using PolicyFn = std::function<Tensor(const Tensor& obs)>;
// Observation filter applied to the raw state before the policy sees it.
// It never touches the simulator state; evaluation plugs normalization and
// attacks in here.
using ObsFilter = std::function<Tensor(const Tensor& raw_state)>;

struct RolloutResult {
  double episode_return = 0.0;
  std::vector<Transition> trajectory;
};

RolloutResult rollout(const EnvSpec& spec, const PolicyFn& policy,
                      std::uint64_t seed, const ObsFilter* filter = nullptr);
RolloutResult rollout_from(const EnvSpec& spec, const Tensor& start,
                           const PolicyFn& policy,
                           const ObsFilter* filter = nullptr);

// Scripted behavior controllers over raw observations.
// gain_scale < 1 detunes the controller (used for the medium tiers).
PolicyFn expert_controller(const EnvSpec& spec, double gain_scale = 1.0);

}  // namespace rolab
