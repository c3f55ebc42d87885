#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "msnn/errors.hpp"

namespace msnn::device {

/// Circuit constants of the two-memristor integrate-and-fire cell. Defaults
/// are the reference device values used throughout.
struct MifParams {
  double r_on1 = 1e3;
  double r_off1 = 1e5;
  double r_on2 = 1e3;
  double r_off2 = 1e5;
  double v_on1 = 110e-3;
  double v_off1 = 5e-3;
  double v_on2 = 110e-3;
  double v_off2 = 5e-3;
  double tau1 = 1e-3;
  double tau2 = 1e-3;
  double e_rest = 0.0;
  double e_reset = 50e-3;
  double v_th = 25e-3;
  double k_v = 0.6;
  double c = 100e-12;

  void validate() const;  // throws ConfigError on a violated invariant
};

struct AlphaParams {
  double tau_syn = 0.64e-3;
  void validate() const;
};

/// Dynamic state of one cell: membrane potential and the two metastable
/// switch occupancies, kept in [0,1].
struct MifState {
  double v = 0.0;
  double x1 = 0.0;
  double x2 = 0.0;
};

/// Synaptic current generator state per input channel.
struct AlphaState {
  double i = 0.0;
  double a = 0.0;
};

enum class Integrator { ForwardEuler, ExponentialEuler };

struct StepConfig {
  double dt = 1e-5;
  Integrator integrator = Integrator::ExponentialEuler;
  int substeps = 1;
  void validate() const;
};

Integrator parse_integrator(const std::string& name);  // "expeuler" | "euler"
std::string integrator_name(Integrator it);

/// G(x) = x/r_on + (1-x)/r_off. Affine and increasing in x.
double conductance(double x, double r_on, double r_off);

/// d x/dt for one metastable switch given the voltage drop across it.
/// Magnitude is bounded by 1/tau; exponent arguments are clamped to +-500.
double state_rate(double x, double v_drop, double v_on, double v_off, double tau,
                  double v_th, double k_v);

/// Advances (v, x1, x2) by one outer step of cfg.dt using cfg.substeps equal
/// inner steps. x1/x2 always move by forward Euler and are clamped to [0,1];
/// v moves per cfg.integrator. Throws NonFiniteError on divergence.
MifState mif_step(MifState s, const MifParams& p, double i_in, const StepConfig& cfg);

/// One step of the alpha current generator. spike_weight is added to the
/// internal drive `a` on spike steps (0 otherwise).
AlphaState alpha_step(AlphaState s, const AlphaParams& p, double spike_weight,
                      const StepConfig& cfg);

using SpikeSchedule = std::vector<std::pair<int, double>>;  // (step, weight)

struct NeuronTraces {
  std::vector<double> v, x1, x2, i_syn;
  int steps() const { return static_cast<int>(v.size()); }
};

/// Joint zero-drive equilibrium (v*, x1*, x2*), solved by fixed-point
/// iteration. The discrete stepper leaves it invariant.
MifState rest_state(const MifParams& p);

/// Full time series of (v, x1, x2, I) over `steps` outer steps. Deterministic.
/// Starts from `init` if given, otherwise from rest_state.
NeuronTraces simulate_neuron(const MifParams& p, const AlphaParams& ap,
                             const SpikeSchedule& spikes, int steps, const StepConfig& cfg,
                             std::optional<MifState> init = std::nullopt);

/// Classic RK4 integration of the continuous-time cell + alpha system at
/// inner step dt_inner, sampled on the outer step grid. Verification oracle
/// only; never differentiated.
NeuronTraces rk4_reference(const MifParams& p, const AlphaParams& ap,
                           const SpikeSchedule& spikes, int steps, const StepConfig& outer,
                           double dt_inner, std::optional<MifState> init = std::nullopt);

/// Impulses of `weight` every `period` steps starting at step 0.
SpikeSchedule periodic_drive(int steps, int period, double weight);

/// Default single-cell protocol: one impulse at step 0, sized so the
/// membrane arcs from rest through threshold toward the reset level and
/// relaxes back within 1,000 steps, while staying in the regime where the
/// fixed-step RK4 oracle is stable.
inline constexpr double kDefaultDriveWeight = 5e-6;
inline SpikeSchedule default_drive() { return {{0, kDefaultDriveWeight}}; }

struct DeviceConfig {
  MifParams mif;
  AlphaParams alpha;
  StepConfig step;
};

/// Loads `key = value` lines (TOML syntax, flat table). Missing keys keep
/// their defaults; unknown keys raise ConfigError.
DeviceConfig load_device_config(const std::string& path);
DeviceConfig parse_device_config(const std::string& text);

}  // namespace msnn::device
