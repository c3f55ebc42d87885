#include "msnn/network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "msnn/kernels.hpp"
#include "msnn/mathfn.hpp"
#include "msnn/rng.hpp"

namespace msnn::network {

using autodiff::Tape;
using autodiff::Var;
using device::MifParams;
using device::StepConfig;

namespace {

// Per-substep constants of the discrete MIF update. The taped and the
// vectorised step below evaluate the same expressions in the same order, so
// their traces agree bit-for-bit.
struct MifCoeffs {
  double h, h_over_c, neg_h_over_c;
  double g_c0_1, g_c1_1, g_c0_2, g_c1_2;
  double inv_slope;
  double on_c1, off_c1, on_c2, off_c2;
  double inv_tau1, inv_tau2;
  double neg_e_rest, neg_e_reset;
  double e_rest, e_reset;
};

MifCoeffs make_coeffs(const MifParams& p, const StepConfig& cfg) {
  MifCoeffs k;
  k.h = cfg.dt / cfg.substeps;
  k.h_over_c = k.h / p.c;
  k.neg_h_over_c = -k.h_over_c;
  k.g_c0_1 = 1.0 / p.r_on1 - 1.0 / p.r_off1;
  k.g_c1_1 = 1.0 / p.r_off1;
  k.g_c0_2 = 1.0 / p.r_on2 - 1.0 / p.r_off2;
  k.g_c1_2 = 1.0 / p.r_off2;
  k.inv_slope = 1.0 / (p.v_th * p.k_v);
  k.on_c1 = -(p.v_on1 * k.inv_slope);
  k.off_c1 = p.v_off1 * k.inv_slope;
  k.on_c2 = -(p.v_on2 * k.inv_slope);
  k.off_c2 = p.v_off2 * k.inv_slope;
  k.inv_tau1 = 1.0 / p.tau1;
  k.inv_tau2 = 1.0 / p.tau2;
  k.neg_e_rest = -p.e_rest;
  k.neg_e_reset = -p.e_reset;
  k.e_rest = p.e_rest;
  k.e_reset = p.e_reset;
  return k;
}

// One substep over a whole layer, in place.
void mif_substep_inplace(std::span<double> v, std::span<double> x1, std::span<double> x2,
                         std::span<const double> i_in, const MifCoeffs& k, bool exp_euler) {
  const size_t n = v.size();
  for (size_t j = 0; j < n; ++j) {
    const double g1 = k.g_c0_1 * x1[j] + k.g_c1_1;
    const double g2 = k.g_c0_2 * x2[j] + k.g_c1_2;
    const double drop1 = 1.0 * v[j] + k.neg_e_rest;
    const double drop2 = 1.0 * v[j] + k.neg_e_reset;

    const double s_on1 = logistic_fn(k.inv_slope * drop1 + k.on_c1);
    const double s_off1 = logistic_fn(-k.inv_slope * drop1 + k.off_c1);
    const double s_on2 = logistic_fn(k.inv_slope * drop2 + k.on_c2);
    const double s_off2 = logistic_fn(-k.inv_slope * drop2 + k.off_c2);

    const double core1 = (-1.0 * x1[j] + 1.0) * s_on1 - x1[j] * s_off1;
    const double core2 = (-1.0 * x2[j] + 1.0) * s_on2 - x2[j] * s_off2;
    const double delta1 = k.h * (k.inv_tau1 * core1 + 0.0) + 0.0;
    const double delta2 = k.h * (k.inv_tau2 * core2 + 0.0) + 0.0;

    if (exp_euler) {
      const double gsum = g1 + g2;
      const double num = (k.e_rest * g1 + 0.0) + (k.e_reset * g2 + 0.0) + i_in[j];
      const double v_inf = num / gsum;
      const double decay = std::exp(k.neg_h_over_c * gsum + 0.0);
      v[j] = v_inf + (v[j] - v_inf) * decay;
    } else {
      const double p1 = g1 * drop1;
      const double p2 = g2 * drop2;
      const double i_net = (i_in[j] - p1) - p2;
      v[j] = v[j] + (k.h_over_c * i_net + 0.0);
    }
    x1[j] = std::clamp(x1[j] + delta1, 0.0, 1.0);
    x2[j] = std::clamp(x2[j] + delta2, 0.0, 1.0);
  }
}

void mif_layer_step_inplace(std::span<double> v, std::span<double> x1, std::span<double> x2,
                            std::span<const double> i_in, const MifParams& p,
                            const StepConfig& cfg) {
  const MifCoeffs k = make_coeffs(p, cfg);
  const bool exp_euler = cfg.integrator == device::Integrator::ExponentialEuler;
  for (int s = 0; s < cfg.substeps; ++s) mif_substep_inplace(v, x1, x2, i_in, k, exp_euler);
}

void check_smooth_range(const MifParams& p, const StepConfig& cfg) {
  const double h = cfg.dt / cfg.substeps;
  if (h > std::min(p.tau1, p.tau2))
    throw ConfigError("network: dt/substeps must be <= min(tau1, tau2) so the smooth x "
                      "update stays in [0,1]");
}

}  // namespace

MsnnModel MsnnModel::build(const ModelConfig& cfg, uint64_t seed) {
  if (cfg.arch.size() < 2) throw ConfigError("model: arch needs at least input and output sizes");
  for (int n : cfg.arch)
    if (n < 1) throw ConfigError("model: layer sizes must be positive");
  if (!(cfg.attenuation > 0.0)) throw ConfigError("model: attenuation must be > 0");
  if (!(cfg.input_gain > 0.0)) throw ConfigError("model: input_gain must be > 0");
  if (cfg.spike_period < 1) throw ConfigError("model: spike_period must be >= 1");
  cfg.mif.validate();
  cfg.alpha.validate();
  cfg.step.validate();
  check_smooth_range(cfg.mif, cfg.step);

  MsnnModel m;
  m.encoder.n = cfg.arch.front();
  m.encoder.params = cfg.alpha;
  m.encoder.spike_period = cfg.spike_period;
  m.encoder.input_gain = cfg.input_gain;
  m.step = cfg.step;

  Rng rng(seed);
  for (size_t l = 0; l + 1 < cfg.arch.size(); ++l) {
    const int n_in = cfg.arch[l];
    const int n_out = cfg.arch[l + 1];
    const bool is_head = l + 2 == cfg.arch.size();
    CrossbarLayer xb;
    xb.weights = Tensor(n_out, n_in);
    xb.attenuation = cfg.attenuation;
    double bound = 1.0 / std::sqrt(static_cast<double>(n_in));
    if (is_head) bound *= cfg.head_init_scale;
    for (double& w : xb.weights.data) w = rng.uniform(-bound, bound);
    // Centring each row makes the fan-in sum insensitive to the common-mode
    // resting potential of the upstream layer, so no training budget is
    // spent cancelling per-neuron bias currents.
    for (int i = 0; i < n_out; ++i) {
      double mean = 0.0;
      for (int j = 0; j < n_in; ++j) mean += xb.weights(i, j);
      mean /= static_cast<double>(n_in);
      for (int j = 0; j < n_in; ++j) xb.weights(i, j) -= mean;
    }
    m.crossbars.push_back(std::move(xb));
    m.mif_layers.push_back(MifLayer{n_out, cfg.mif});
  }
  return m;
}

Tensor crossbar_forward(const CrossbarLayer& layer, const Tensor& v_in) {
  if (v_in.cols != 1 || v_in.rows != layer.weights.cols)
    throw ShapeError("crossbar_forward: input dimension mismatch");
  Tensor out(layer.weights.rows, 1);
  kernels::matvec(layer.weights.data, layer.weights.rows, layer.weights.cols, v_in.data,
                  out.data);
  for (double& x : out.data) x = layer.attenuation * x + 0.0;
  return out;
}

Var crossbar_forward(Tape& tape, Var weights, double attenuation, Var v_in) {
  return tape.affine(tape.matvec(weights, v_in), attenuation, 0.0);
}

double injection_weight(const AlphaEncoder& enc, double intensity, int t, bool per_step) {
  if (per_step) return enc.input_gain * intensity;
  return (t % enc.spike_period == 0) ? enc.input_gain * intensity : 0.0;
}

std::vector<double> encode_step(const AlphaEncoder& enc, EncoderState& state,
                                const SampleView& sample, int t,
                                const device::StepConfig& cfg) {
  const int n = enc.n;
  if (static_cast<int>(state.i.size()) != n) {
    state.i.assign(static_cast<size_t>(n), 0.0);
    state.a.assign(static_cast<size_t>(n), 0.0);
  }
  std::vector<double> out(static_cast<size_t>(n), 0.0);
  const double k = cfg.dt / enc.params.tau_syn;
  for (int j = 0; j < n; ++j) {
    double intensity;
    if (sample.per_step()) {
      intensity = (t < sample.event_steps)
                      ? static_cast<double>(sample.events[static_cast<size_t>(t) * n + j])
                      : 0.0;
    } else {
      intensity = static_cast<double>(sample.image[static_cast<size_t>(j)]);
    }
    const double w = injection_weight(enc, intensity, t, sample.per_step());
    double a = state.a[static_cast<size_t>(j)];
    double i = state.i[static_cast<size_t>(j)];
    a = a - k * a;
    a += w;
    i = i + k * (a - i);
    state.a[static_cast<size_t>(j)] = a;
    state.i[static_cast<size_t>(j)] = i;
    out[static_cast<size_t>(j)] = i;
  }
  return out;
}

Tensor encoder_trace(const AlphaEncoder& enc, const SampleView& sample, int steps,
                     const device::StepConfig& cfg) {
  if (sample.per_step()) {
    if (sample.events.size() != static_cast<size_t>(sample.event_steps) * enc.n)
      throw ShapeError("encoder_trace: event block size mismatch");
  } else {
    if (sample.image.size() != static_cast<size_t>(enc.n))
      throw ShapeError("encoder_trace: image size mismatch");
  }
  Tensor out(steps, enc.n);
  EncoderState st;
  for (int t = 0; t < steps; ++t) {
    std::vector<double> row = encode_step(enc, st, sample, t, cfg);
    std::copy(row.begin(), row.end(), out.data.begin() + static_cast<size_t>(t) * enc.n);
  }
  return out;
}

ForwardTrace model_forward(const MsnnModel& model, const SampleView& sample, int steps,
                           bool keep_hidden) {
  if (steps < 1) throw ConfigError("model_forward: steps must be >= 1");
  const int layers = model.num_layers();
  const Tensor enc = encoder_trace(model.encoder, sample, steps, model.step);

  std::vector<std::vector<double>> v(layers), x1(layers), x2(layers), cur(layers);
  for (int l = 0; l < layers; ++l) {
    const int n = model.mif_layers[static_cast<size_t>(l)].n;
    v[static_cast<size_t>(l)].assign(static_cast<size_t>(n),
                                     model.mif_layers[static_cast<size_t>(l)].params.e_rest);
    x1[static_cast<size_t>(l)].assign(static_cast<size_t>(n), 0.0);
    x2[static_cast<size_t>(l)].assign(static_cast<size_t>(n), 0.0);
    cur[static_cast<size_t>(l)].assign(static_cast<size_t>(n), 0.0);
  }

  ForwardTrace tr;
  const int n_out = model.output_size();
  tr.v_out = Tensor(steps, n_out);
  if (keep_hidden) {
    for (int l = 0; l < layers; ++l)
      tr.hidden_v.emplace_back(steps, model.mif_layers[static_cast<size_t>(l)].n);
  }
  tr.spikes_per_layer.assign(static_cast<size_t>(layers), 0);

  std::vector<std::vector<double>> prev_v = v;
  long above = 0;
  long neuron_steps = 0;

  for (int t = 0; t < steps; ++t) {
    std::span<const double> in{enc.data.data() + static_cast<size_t>(t) * enc.cols,
                               static_cast<size_t>(enc.cols)};
    for (int l = 0; l < layers; ++l) {
      const auto& xb = model.crossbars[static_cast<size_t>(l)];
      auto& i_l = cur[static_cast<size_t>(l)];
      kernels::matvec(xb.weights.data, xb.weights.rows, xb.weights.cols, in, i_l);
      for (double& x : i_l) x = xb.attenuation * x + 0.0;
      mif_layer_step_inplace(v[static_cast<size_t>(l)], x1[static_cast<size_t>(l)],
                             x2[static_cast<size_t>(l)], i_l,
                             model.mif_layers[static_cast<size_t>(l)].params, model.step);
      in = v[static_cast<size_t>(l)];
    }

    for (int l = 0; l < layers; ++l) {
      const double th = model.mif_layers[static_cast<size_t>(l)].params.v_th;
      const auto& vl = v[static_cast<size_t>(l)];
      auto& pl = prev_v[static_cast<size_t>(l)];
      for (size_t j = 0; j < vl.size(); ++j) {
        if (!std::isfinite(vl[j]))
          throw NonFiniteError("model_forward: layer " + std::to_string(l) +
                               " diverged at step " + std::to_string(t));
        if (pl[j] <= th && vl[j] > th) ++tr.spikes_per_layer[static_cast<size_t>(l)];
        if (vl[j] > th) ++above;
        pl[j] = vl[j];
      }
      neuron_steps += static_cast<long>(vl.size());
      if (keep_hidden) {
        auto& h = tr.hidden_v[static_cast<size_t>(l)];
        std::copy(vl.begin(), vl.end(), h.data.begin() + static_cast<size_t>(t) * h.cols);
      }
    }
    const auto& vo = v[static_cast<size_t>(layers - 1)];
    std::copy(vo.begin(), vo.end(), tr.v_out.data.begin() + static_cast<size_t>(t) * n_out);
  }
  tr.activity = neuron_steps > 0 ? static_cast<double>(above) / static_cast<double>(neuron_steps)
                                 : 0.0;
  return tr;
}

void taped_mif_layer_step(Tape& tape, TapedMifLayer& layer, Var i_in, const MifParams& p,
                          const StepConfig& cfg) {
  check_smooth_range(p, cfg);
  const MifCoeffs k = make_coeffs(p, cfg);
  const bool exp_euler = cfg.integrator == device::Integrator::ExponentialEuler;
  for (int s = 0; s < cfg.substeps; ++s) {
    Var g1 = tape.affine(layer.x1, k.g_c0_1, k.g_c1_1);
    Var g2 = tape.affine(layer.x2, k.g_c0_2, k.g_c1_2);
    Var drop1 = tape.affine(layer.v, 1.0, k.neg_e_rest);
    Var drop2 = tape.affine(layer.v, 1.0, k.neg_e_reset);

    Var s_on1 = tape.logistic(tape.affine(drop1, k.inv_slope, k.on_c1));
    Var s_off1 = tape.logistic(tape.affine(drop1, -k.inv_slope, k.off_c1));
    Var s_on2 = tape.logistic(tape.affine(drop2, k.inv_slope, k.on_c2));
    Var s_off2 = tape.logistic(tape.affine(drop2, -k.inv_slope, k.off_c2));

    Var core1 = tape.sub(tape.mul(tape.affine(layer.x1, -1.0, 1.0), s_on1),
                         tape.mul(layer.x1, s_off1));
    Var core2 = tape.sub(tape.mul(tape.affine(layer.x2, -1.0, 1.0), s_on2),
                         tape.mul(layer.x2, s_off2));
    Var delta1 = tape.scale(tape.scale(core1, k.inv_tau1), k.h);
    Var delta2 = tape.scale(tape.scale(core2, k.inv_tau2), k.h);

    if (exp_euler) {
      Var gsum = tape.add(g1, g2);
      Var num = tape.add(tape.add(tape.scale(g1, k.e_rest), tape.scale(g2, k.e_reset)), i_in);
      Var v_inf = tape.div(num, gsum);
      Var decay = tape.exp(tape.scale(gsum, k.neg_h_over_c));
      layer.v = tape.add(v_inf, tape.mul(tape.sub(layer.v, v_inf), decay));
    } else {
      Var p1 = tape.mul(g1, drop1);
      Var p2 = tape.mul(g2, drop2);
      Var i_net = tape.sub(tape.sub(i_in, p1), p2);
      layer.v = tape.add(layer.v, tape.scale(i_net, k.h_over_c));
    }
    layer.x1 = tape.add(layer.x1, delta1);
    layer.x2 = tape.add(layer.x2, delta2);
  }
}

TapedForward model_forward_taped(Tape& tape, const MsnnModel& model, const SampleView& sample,
                                 int steps) {
  std::vector<Var> leaves;
  leaves.reserve(model.crossbars.size());
  for (const auto& xb : model.crossbars) leaves.push_back(tape.leaf(xb.weights));
  return model_forward_taped_with(tape, model, sample, steps, leaves);
}

TapedForward model_forward_taped_with(Tape& tape, const MsnnModel& model,
                                      const SampleView& sample, int steps,
                                      std::span<const Var> weight_leaves) {
  if (steps < 1) throw ConfigError("model_forward_taped: steps must be >= 1");
  if (weight_leaves.size() != model.crossbars.size())
    throw ShapeError("model_forward_taped: one weight leaf per crossbar required");
  const int layers = model.num_layers();
  const Tensor enc = encoder_trace(model.encoder, sample, steps, model.step);

  TapedForward out;
  out.weight_leaves.assign(weight_leaves.begin(), weight_leaves.end());

  std::vector<TapedMifLayer> st(static_cast<size_t>(layers));
  for (int l = 0; l < layers; ++l) {
    const int n = model.mif_layers[static_cast<size_t>(l)].n;
    const Tensor v0(n, 1, model.mif_layers[static_cast<size_t>(l)].params.e_rest);
    const Tensor zero(n, 1, 0.0);
    st[static_cast<size_t>(l)] = TapedMifLayer{tape.constant(v0), tape.constant(zero),
                                               tape.constant(zero)};
  }

  out.v_out.reserve(static_cast<size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    Var in = tape.constant(
        std::span<const double>{enc.data.data() + static_cast<size_t>(t) * enc.cols,
                                static_cast<size_t>(enc.cols)},
        enc.cols, 1);
    for (int l = 0; l < layers; ++l) {
      Var i_l = crossbar_forward(tape, out.weight_leaves[static_cast<size_t>(l)],
                                 model.crossbars[static_cast<size_t>(l)].attenuation, in);
      taped_mif_layer_step(tape, st[static_cast<size_t>(l)], i_l,
                           model.mif_layers[static_cast<size_t>(l)].params, model.step);
      in = st[static_cast<size_t>(l)].v;
    }
    for (double x : tape.value(in))
      if (!std::isfinite(x))
        throw NonFiniteError("model_forward_taped: output diverged at step " +
                             std::to_string(t));
    out.v_out.push_back(in);
  }
  return out;
}

long count_spikes(std::span<const double> v_trace, double threshold) {
  long n = 0;
  double prev = threshold;  // no spike counted at t=0 unless the trace starts above
  for (double x : v_trace) {
    if (prev <= threshold && x > threshold) ++n;
    prev = x;
  }
  return n;
}

std::vector<long> count_spikes(const Tensor& traces, double threshold) {
  std::vector<long> out(static_cast<size_t>(traces.cols), 0);
  for (int j = 0; j < traces.cols; ++j) {
    double prev = threshold;
    long n = 0;
    for (int t = 0; t < traces.rows; ++t) {
      const double x = traces(t, j);
      if (prev <= threshold && x > threshold) ++n;
      prev = x;
    }
    out[static_cast<size_t>(j)] = n;
  }
  return out;
}

std::vector<int> parse_arch(const std::string& s) {
  std::vector<int> arch;
  std::string tok;
  std::istringstream in(s);
  const char sep = s.find('-') != std::string::npos ? '-' : ',';
  while (std::getline(in, tok, sep)) {
    if (tok.empty()) throw ConfigError("arch: empty component in '" + s + "'");
    try {
      size_t idx = 0;
      int v = std::stoi(tok, &idx);
      if (idx != tok.size() || v < 1) throw std::invalid_argument("bad");
      arch.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("arch: cannot parse layer size '" + tok + "'");
    }
  }
  if (arch.size() < 2) throw ConfigError("arch: need at least two layer sizes");
  return arch;
}

}  // namespace msnn::network
