#include "msnn/device.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace msnn::device {

namespace {

double clamp_exp_arg(double z) { return std::clamp(z, -500.0, 500.0); }

double logistic_denominator(double z) { return 1.0 + std::exp(clamp_exp_arg(z)); }

bool finite(double v) { return std::isfinite(v); }

}  // namespace

void MifParams::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!(positive(r_on1) && positive(r_off1) && r_on1 < r_off1))
    throw ConfigError("mif params: need 0 < r_on1 < r_off1");
  if (!(positive(r_on2) && positive(r_off2) && r_on2 < r_off2))
    throw ConfigError("mif params: need 0 < r_on2 < r_off2");
  if (!(positive(tau1) && positive(tau2))) throw ConfigError("mif params: tau1, tau2 must be > 0");
  if (!(positive(c))) throw ConfigError("mif params: c must be > 0");
  if (!(k_v > 0.0 && k_v <= 1.0)) throw ConfigError("mif params: k_v must be in (0, 1]");
  if (!(positive(v_th))) throw ConfigError("mif params: v_th must be > 0");
}

void AlphaParams::validate() const {
  if (!(tau_syn > 0.0 && std::isfinite(tau_syn)))
    throw ConfigError("alpha params: tau_syn must be > 0");
}

void StepConfig::validate() const {
  if (!(dt > 0.0 && std::isfinite(dt))) throw ConfigError("step config: dt must be > 0");
  if (substeps < 1) throw ConfigError("step config: substeps must be >= 1");
}

Integrator parse_integrator(const std::string& name) {
  if (name == "expeuler" || name == "exponential_euler" || name == "ExponentialEuler")
    return Integrator::ExponentialEuler;
  if (name == "euler" || name == "forward_euler" || name == "ForwardEuler")
    return Integrator::ForwardEuler;
  throw ConfigError("unknown integrator '" + name + "' (expected expeuler|euler)");
}

std::string integrator_name(Integrator it) {
  return it == Integrator::ExponentialEuler ? "expeuler" : "euler";
}

double conductance(double x, double r_on, double r_off) {
  if (x < -1e-12 || x > 1.0 + 1e-12)
    throw DomainError("conductance: x outside [0,1]: " + std::to_string(x));
  return x / r_on + (1.0 - x) / r_off;
}

double state_rate(double x, double v_drop, double v_on, double v_off, double tau,
                  double v_th, double k_v) {
  const double slope = v_th * k_v;
  const double on_term = (1.0 - x) / logistic_denominator((v_on - v_drop) / slope);
  const double off_term = x / logistic_denominator((v_drop - v_off) / slope);
  return (on_term - off_term) / tau;
}

MifState mif_step(MifState s, const MifParams& p, double i_in, const StepConfig& cfg) {
  const double h = cfg.dt / cfg.substeps;
  const double h_over_c = h / p.c;
  for (int k = 0; k < cfg.substeps; ++k) {
    const double g1 = conductance(s.x1, p.r_on1, p.r_off1);
    const double g2 = conductance(s.x2, p.r_on2, p.r_off2);
    const double rate1 = state_rate(s.x1, s.v - p.e_rest, p.v_on1, p.v_off1, p.tau1, p.v_th, p.k_v);
    const double rate2 = state_rate(s.x2, s.v - p.e_reset, p.v_on2, p.v_off2, p.tau2, p.v_th, p.k_v);

    if (cfg.integrator == Integrator::ForwardEuler) {
      const double i_net = (i_in - g1 * (s.v - p.e_rest)) - g2 * (s.v - p.e_reset);
      s.v = s.v + h_over_c * i_net;
    } else {
      const double gsum = g1 + g2;
      const double v_inf = (g1 * p.e_rest + g2 * p.e_reset + i_in) / gsum;
      s.v = v_inf + (s.v - v_inf) * std::exp(gsum * -h_over_c);
    }
    s.x1 = std::clamp(s.x1 + rate1 * h, 0.0, 1.0);
    s.x2 = std::clamp(s.x2 + rate2 * h, 0.0, 1.0);
  }
  if (!(finite(s.v) && finite(s.x1) && finite(s.x2)))
    throw NonFiniteError("mif_step: state diverged (v=" + std::to_string(s.v) + ")");
  return s;
}

AlphaState alpha_step(AlphaState s, const AlphaParams& p, double spike_weight,
                      const StepConfig& cfg) {
  const double k = cfg.dt / p.tau_syn;
  s.a = s.a - k * s.a;
  s.a += spike_weight;
  s.i = s.i + k * (s.a - s.i);
  return s;
}

MifState rest_state(const MifParams& p) {
  MifState s;
  s.v = (conductance(0.0, p.r_on1, p.r_off1) * p.e_rest +
         conductance(0.0, p.r_on2, p.r_off2) * p.e_reset) /
        (conductance(0.0, p.r_on1, p.r_off1) + conductance(0.0, p.r_on2, p.r_off2));
  // Alternate between the x-nullcline and the v fixed point until stationary.
  for (int it = 0; it < 200; ++it) {
    const double slope = p.v_th * p.k_v;
    auto x_eq = [&](double drop, double v_on, double v_off) {
      const double on = 1.0 / logistic_denominator((v_on - drop) / slope);
      const double off = 1.0 / logistic_denominator((drop - v_off) / slope);
      return on / (on + off);
    };
    const double x1 = x_eq(s.v - p.e_rest, p.v_on1, p.v_off1);
    const double x2 = x_eq(s.v - p.e_reset, p.v_on2, p.v_off2);
    const double g1 = conductance(x1, p.r_on1, p.r_off1);
    const double g2 = conductance(x2, p.r_on2, p.r_off2);
    const double v = (g1 * p.e_rest + g2 * p.e_reset) / (g1 + g2);
    const double delta = std::abs(v - s.v) + std::abs(x1 - s.x1) + std::abs(x2 - s.x2);
    s.v = v;
    s.x1 = x1;
    s.x2 = x2;
    if (delta < 1e-16) break;
  }
  return s;
}

namespace {

std::vector<double> impulse_track(const SpikeSchedule& spikes, int steps) {
  std::vector<double> w(static_cast<size_t>(steps), 0.0);
  for (const auto& [step, weight] : spikes) {
    if (step >= 0 && step < steps) w[static_cast<size_t>(step)] += weight;
  }
  return w;
}

}  // namespace

NeuronTraces simulate_neuron(const MifParams& p, const AlphaParams& ap,
                             const SpikeSchedule& spikes, int steps, const StepConfig& cfg,
                             std::optional<MifState> init) {
  if (steps < 1) throw ConfigError("simulate_neuron: steps must be >= 1");
  p.validate();
  ap.validate();
  cfg.validate();

  MifState s = init.value_or(rest_state(p));
  AlphaState syn;
  const std::vector<double> drive = impulse_track(spikes, steps);

  NeuronTraces tr;
  tr.v.reserve(steps);
  tr.x1.reserve(steps);
  tr.x2.reserve(steps);
  tr.i_syn.reserve(steps);
  for (int t = 0; t < steps; ++t) {
    syn = alpha_step(syn, ap, drive[static_cast<size_t>(t)], cfg);
    s = mif_step(s, p, syn.i, cfg);
    tr.v.push_back(s.v);
    tr.x1.push_back(s.x1);
    tr.x2.push_back(s.x2);
    tr.i_syn.push_back(syn.i);
  }
  return tr;
}

NeuronTraces rk4_reference(const MifParams& p, const AlphaParams& ap,
                           const SpikeSchedule& spikes, int steps, const StepConfig& outer,
                           double dt_inner, std::optional<MifState> init) {
  if (steps < 1) throw ConfigError("rk4_reference: steps must be >= 1");
  if (!(dt_inner > 0.0) || dt_inner > outer.dt * (1.0 + 1e-12))
    throw ConfigError("rk4_reference: need 0 < dt_inner <= dt");
  p.validate();
  ap.validate();
  outer.validate();

  // State y = (v, x1, x2, I, a). Impulses enter as discrete jumps in `a` at
  // the start of their scheduled outer step; everything else is smooth.
  struct Y {
    double v, x1, x2, i, a;
  };
  auto deriv = [&](const Y& y) {
    Y d;
    const double g1 = conductance(std::clamp(y.x1, 0.0, 1.0), p.r_on1, p.r_off1);
    const double g2 = conductance(std::clamp(y.x2, 0.0, 1.0), p.r_on2, p.r_off2);
    d.v = (y.i - g1 * (y.v - p.e_rest) - g2 * (y.v - p.e_reset)) / p.c;
    d.x1 = state_rate(std::clamp(y.x1, 0.0, 1.0), y.v - p.e_rest, p.v_on1, p.v_off1, p.tau1,
                      p.v_th, p.k_v);
    d.x2 = state_rate(std::clamp(y.x2, 0.0, 1.0), y.v - p.e_reset, p.v_on2, p.v_off2, p.tau2,
                      p.v_th, p.k_v);
    d.i = (y.a - y.i) / ap.tau_syn;
    d.a = -y.a / ap.tau_syn;
    return d;
  };
  auto axpy = [](const Y& y, double h, const Y& d) {
    return Y{y.v + h * d.v, y.x1 + h * d.x1, y.x2 + h * d.x2, y.i + h * d.i, y.a + h * d.a};
  };

  const MifState s0 = init.value_or(rest_state(p));
  Y y{s0.v, s0.x1, s0.x2, 0.0, 0.0};
  const std::vector<double> drive = impulse_track(spikes, steps);

  const int inner = std::max(1, static_cast<int>(std::llround(outer.dt / dt_inner)));
  const double h = outer.dt / inner;

  NeuronTraces tr;
  tr.v.reserve(steps);
  tr.x1.reserve(steps);
  tr.x2.reserve(steps);
  tr.i_syn.reserve(steps);
  for (int t = 0; t < steps; ++t) {
    y.a += drive[static_cast<size_t>(t)];
    for (int k = 0; k < inner; ++k) {
      const Y k1 = deriv(y);
      const Y k2 = deriv(axpy(y, h / 2.0, k1));
      const Y k3 = deriv(axpy(y, h / 2.0, k2));
      const Y k4 = deriv(axpy(y, h, k3));
      y.v += h / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
      y.x1 += h / 6.0 * (k1.x1 + 2.0 * k2.x1 + 2.0 * k3.x1 + k4.x1);
      y.x2 += h / 6.0 * (k1.x2 + 2.0 * k2.x2 + 2.0 * k3.x2 + k4.x2);
      y.i += h / 6.0 * (k1.i + 2.0 * k2.i + 2.0 * k3.i + k4.i);
      y.a += h / 6.0 * (k1.a + 2.0 * k2.a + 2.0 * k3.a + k4.a);
    }
    y.x1 = std::clamp(y.x1, 0.0, 1.0);
    y.x2 = std::clamp(y.x2, 0.0, 1.0);
    if (!(finite(y.v) && finite(y.x1) && finite(y.x2) && finite(y.i) && finite(y.a)))
      throw NonFiniteError("rk4_reference: diverged at step " + std::to_string(t));
    tr.v.push_back(y.v);
    tr.x1.push_back(y.x1);
    tr.x2.push_back(y.x2);
    tr.i_syn.push_back(y.i);
  }
  return tr;
}

SpikeSchedule periodic_drive(int steps, int period, double weight) {
  if (period < 1) throw ConfigError("periodic_drive: period must be >= 1");
  SpikeSchedule sched;
  for (int t = 0; t < steps; t += period) sched.emplace_back(t, weight);
  return sched;
}

namespace {

struct KvLine {
  std::string key;
  std::string value;
};

std::vector<KvLine> parse_kv_lines(const std::string& text) {
  std::vector<KvLine> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    auto trim = [](std::string s) {
      const char* ws = " \t\r";
      s.erase(0, s.find_first_not_of(ws));
      if (auto e = s.find_last_not_of(ws); e != std::string::npos) s.erase(e + 1);
      return s;
    };
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    KvLine kv{trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
    // TOML strings may be quoted
    if (kv.value.size() >= 2 && kv.value.front() == '"' && kv.value.back() == '"')
      kv.value = kv.value.substr(1, kv.value.size() - 2);
    if (kv.key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    out.push_back(std::move(kv));
  }
  return out;
}

double parse_double(const KvLine& kv) {
  try {
    size_t idx = 0;
    double v = std::stod(kv.value, &idx);
    if (idx != kv.value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + kv.key + "': cannot parse number '" + kv.value + "'");
  }
}

int parse_int(const KvLine& kv) {
  try {
    size_t idx = 0;
    int v = std::stoi(kv.value, &idx);
    if (idx != kv.value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + kv.key + "': cannot parse integer '" + kv.value + "'");
  }
}

}  // namespace

DeviceConfig parse_device_config(const std::string& text) {
  DeviceConfig cfg;
  for (const auto& kv : parse_kv_lines(text)) {
    auto& m = cfg.mif;
    if (kv.key == "r_on1") m.r_on1 = parse_double(kv);
    else if (kv.key == "r_off1") m.r_off1 = parse_double(kv);
    else if (kv.key == "r_on2") m.r_on2 = parse_double(kv);
    else if (kv.key == "r_off2") m.r_off2 = parse_double(kv);
    else if (kv.key == "v_on1") m.v_on1 = parse_double(kv);
    else if (kv.key == "v_off1") m.v_off1 = parse_double(kv);
    else if (kv.key == "v_on2") m.v_on2 = parse_double(kv);
    else if (kv.key == "v_off2") m.v_off2 = parse_double(kv);
    else if (kv.key == "tau1") m.tau1 = parse_double(kv);
    else if (kv.key == "tau2") m.tau2 = parse_double(kv);
    else if (kv.key == "e_rest") m.e_rest = parse_double(kv);
    else if (kv.key == "e_reset") m.e_reset = parse_double(kv);
    else if (kv.key == "v_th") m.v_th = parse_double(kv);
    else if (kv.key == "k_v") m.k_v = parse_double(kv);
    else if (kv.key == "c") m.c = parse_double(kv);
    else if (kv.key == "tau_syn") cfg.alpha.tau_syn = parse_double(kv);
    else if (kv.key == "dt") cfg.step.dt = parse_double(kv);
    else if (kv.key == "substeps") cfg.step.substeps = parse_int(kv);
    else if (kv.key == "integrator") cfg.step.integrator = parse_integrator(kv.value);
    else throw ConfigError("config: unknown key '" + kv.key + "'");
  }
  cfg.mif.validate();
  cfg.alpha.validate();
  cfg.step.validate();
  return cfg;
}

DeviceConfig load_device_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_device_config(ss.str());
}

}  // namespace msnn::device
