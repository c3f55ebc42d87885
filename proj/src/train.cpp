#include "msnn/train.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "msnn/rng.hpp"

namespace msnn::train {

using autodiff::Tape;
using autodiff::Var;
using network::MsnnModel;

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be >= 0");
  if (steps < 1) throw ConfigError("train: steps must be >= 1");
  if (!(softmax_beta > 0.0)) throw ConfigError("train: softmax_beta must be > 0");
  if (patience < 1) throw ConfigError("train: patience must be >= 1");
  if (!(eval_fraction >= 0.0 && eval_fraction < 1.0))
    throw ConfigError("train: eval_fraction must be in [0, 1)");
}

AdamState AdamState::like(std::span<const Tensor> weights) {
  AdamState st;
  for (const Tensor& w : weights) {
    st.m.emplace_back(w.rows, w.cols);
    st.v.emplace_back(w.rows, w.cols);
  }
  return st;
}

void adam_step(std::vector<Tensor>& weights, std::span<const Tensor> grads, AdamState& state,
               double lr, const AdamConfig& cfg) {
  if (weights.size() != grads.size() || weights.size() != state.m.size())
    throw ShapeError("adam_step: tensor count mismatch");
  for (size_t i = 0; i < grads.size(); ++i) {
    if (!weights[i].same_shape(grads[i])) throw ShapeError("adam_step: shape mismatch");
    if (!grads[i].all_finite()) throw NonFiniteError("adam_step: non-finite gradient");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < weights.size(); ++i) {
    auto& w = weights[i].data;
    const auto& g = grads[i].data;
    auto& m = state.m[i].data;
    auto& v = state.v[i].data;
    for (size_t k = 0; k < w.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      w[k] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

Var loss_nll_membrane(Tape& tape, std::span<const Var> v_out_steps, int target, double beta) {
  if (v_out_steps.empty()) throw ShapeError("loss: need at least one step");
  const int classes = v_out_steps.front().rows;
  if (target < 0 || target >= classes) throw ConfigError("loss: target class out of range");

  Tensor onehot(classes, 1);
  onehot.data[static_cast<size_t>(target)] = 1.0;
  const Var pick = tape.constant(onehot);

  std::vector<Var> per_step;
  per_step.reserve(v_out_steps.size());
  for (Var v : v_out_steps) {
    const Var logits = tape.scale(v, beta);
    const Var lse = tape.logsumexp(logits);
    const Var target_logit = tape.sum(tape.mul(logits, pick));
    per_step.push_back(tape.sub(lse, target_logit));
  }
  return tape.sum(tape.stack(per_step));
}

autodiff::GradcheckReport gradcheck_model(const network::MsnnModel& model,
                                          const network::SampleView& sample, int target,
                                          int steps, double beta, double eps, double tol) {
  std::vector<Tensor> leaf_values;
  for (const auto& xb : model.crossbars) leaf_values.push_back(xb.weights);
  auto f = [&](Tape& tape, std::span<const Var> leaves) {
    auto fw = network::model_forward_taped_with(tape, model, sample, steps, leaves);
    return loss_nll_membrane(tape, fw.v_out, target, beta);
  };
  return autodiff::gradcheck(f, leaf_values, eps, tol);
}

double loss_nll_membrane_value(const Tensor& v_out, int target, double beta) {
  if (target < 0 || target >= v_out.cols) throw ConfigError("loss: target class out of range");
  double total = 0.0;
  for (int t = 0; t < v_out.rows; ++t) {
    double m = -1e300;
    for (int c = 0; c < v_out.cols; ++c) m = std::max(m, beta * v_out(t, c));
    double s = 0.0;
    for (int c = 0; c < v_out.cols; ++c) s += std::exp(beta * v_out(t, c) - m);
    const double lse = m + std::log(s);
    total += lse - beta * v_out(t, target);
  }
  if (!std::isfinite(total)) throw NonFiniteError("loss: non-finite value");
  return total;
}

int DatasetRef::size() const {
  if (!subset.empty()) return static_cast<int>(subset.size());
  if (images) return images->n;
  if (events) return static_cast<int>(events->samples.size());
  return 0;
}

namespace {
int resolve(const DatasetRef& ds, int i) {
  return ds.subset.empty() ? i : ds.subset[static_cast<size_t>(i)];
}
}  // namespace

int DatasetRef::label(int i) const {
  const int r = resolve(*this, i);
  return images ? images->labels[static_cast<size_t>(r)] : events->labels[static_cast<size_t>(r)];
}

int DatasetRef::features() const {
  return images ? images->features() : (events ? events->features() : 0);
}

int DatasetRef::num_classes() const {
  return images ? images->num_classes : (events ? events->num_classes : 0);
}

network::SampleView DatasetRef::sample(int i) const {
  const int r = resolve(*this, i);
  network::SampleView view;
  if (images) {
    view.image = {images->image(r), static_cast<size_t>(images->features())};
  } else {
    const auto& s = events->samples[static_cast<size_t>(r)];
    view.events = {s.counts.data(), s.counts.size()};
    view.event_steps = s.t;
  }
  return view;
}

DatasetRef DatasetRef::take(std::vector<int> indices) const {
  DatasetRef out = *this;
  if (subset.empty()) {
    out.subset = std::move(indices);
  } else {
    out.subset.clear();
    for (int i : indices) out.subset.push_back(subset[static_cast<size_t>(i)]);
  }
  return out;
}

int predict_from_trace(const Tensor& v_out, Readout readout, double threshold) {
  const int classes = v_out.cols;
  int best = 0;
  if (readout == Readout::MembraneSum) {
    double best_sum = -1e300;
    for (int c = 0; c < classes; ++c) {
      double s = 0.0;
      for (int t = 0; t < v_out.rows; ++t) s += v_out(t, c);
      if (s > best_sum) {
        best_sum = s;
        best = c;
      }
    }
  } else {
    const std::vector<long> counts = network::count_spikes(v_out, threshold);
    long best_count = -1;
    for (int c = 0; c < classes; ++c) {
      if (counts[static_cast<size_t>(c)] > best_count) {
        best_count = counts[static_cast<size_t>(c)];
        best = c;
      }
    }
  }
  return best;
}

EvalResult evaluate(const MsnnModel& model, const DatasetRef& ds, int steps, Readout readout,
                    int workers) {
  const int n = ds.size();
  EvalResult res;
  res.predictions.assign(static_cast<size_t>(n), 0);
  const int classes = std::max(ds.num_classes(), model.output_size());
  res.confusion = Tensor(classes, classes);
  if (n == 0) return res;

  const double threshold = model.mif_layers.back().params.v_th;
  std::vector<double> activities(static_cast<size_t>(n), 0.0);
  std::string error;

  const int nthreads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(nthreads)
  for (int i = 0; i < n; ++i) {
    try {
      const network::ForwardTrace tr = network::model_forward(model, ds.sample(i), steps);
      res.predictions[static_cast<size_t>(i)] = predict_from_trace(tr.v_out, readout, threshold);
      activities[static_cast<size_t>(i)] = tr.activity;
    } catch (const std::exception& e) {
#pragma omp critical
      error = e.what();
    }
  }
  if (!error.empty()) throw NonFiniteError("evaluate: " + error);

  long correct = 0;
  double act = 0.0;
  for (int i = 0; i < n; ++i) {
    const int truth = ds.label(i);
    const int pred = res.predictions[static_cast<size_t>(i)];
    res.confusion(truth, pred) += 1.0;
    if (truth == pred) ++correct;
    act += activities[static_cast<size_t>(i)];
  }
  res.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  res.activity = act / static_cast<double>(n);
  return res;
}

namespace {

std::vector<Tensor> weight_tensors(const MsnnModel& model) {
  std::vector<Tensor> out;
  for (const auto& xb : model.crossbars) out.push_back(xb.weights);
  return out;
}

void assign_weights(MsnnModel& model, const std::vector<Tensor>& ws) {
  for (size_t l = 0; l < ws.size(); ++l) model.crossbars[l].weights = ws[l];
}

struct BatchGrads {
  std::vector<Tensor> grads;  // one per crossbar, already meaned
  double mean_loss = 0.0;
};

BatchGrads batch_gradients(const MsnnModel& model, const DatasetRef& ds,
                           const data::Batch& batch, const TrainConfig& cfg) {
  const int bs = batch.size();
  std::vector<std::vector<Tensor>> per_sample(static_cast<size_t>(bs));
  std::vector<double> losses(static_cast<size_t>(bs), 0.0);
  std::string error;

  const int nthreads = cfg.workers > 0 ? cfg.workers : omp_get_max_threads();
#pragma omp parallel num_threads(nthreads)
  {
    Tape tape;
#pragma omp for schedule(static)
    for (int s = 0; s < bs; ++s) {
      try {
        tape.reset();
        const int row = batch.indices[static_cast<size_t>(s)];
        auto fw = network::model_forward_taped(tape, model, ds.sample(row), cfg.steps);
        const Var loss =
            loss_nll_membrane(tape, fw.v_out, ds.label(row), cfg.softmax_beta);
        auto grads = tape.backward(loss, fw.weight_leaves);
        losses[static_cast<size_t>(s)] = tape.scalar_value(loss);
        per_sample[static_cast<size_t>(s)] = std::move(grads.grads);
      } catch (const std::exception& e) {
#pragma omp critical
        error = e.what();
      }
    }
  }
  if (!error.empty()) throw NonFiniteError(error);

  // Mean over samples, accumulated in sample order so the result does not
  // depend on the worker count.
  BatchGrads out;
  const double inv = 1.0 / static_cast<double>(bs);
  for (size_t l = 0; l < model.crossbars.size(); ++l) {
    Tensor acc(model.crossbars[l].weights.rows, model.crossbars[l].weights.cols);
    for (int s = 0; s < bs; ++s) {
      const auto& g = per_sample[static_cast<size_t>(s)][l].data;
      for (size_t k = 0; k < acc.data.size(); ++k) acc.data[k] += g[k];
    }
    for (double& x : acc.data) x *= inv;
    out.grads.push_back(std::move(acc));
  }
  for (double l : losses) out.mean_loss += l;
  out.mean_loss *= inv;
  return out;
}

}  // namespace

TrainResult train(MsnnModel& model, const DatasetRef& ds, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  const int n = ds.size();
  if (n < 1) throw ConfigError("train: dataset is empty");
  if (ds.features() != model.input_size())
    throw ConfigError("train: dataset features (" + std::to_string(ds.features()) +
                      ") do not match model input (" + std::to_string(model.input_size()) + ")");

  // Deterministic holdout split for early stopping.
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  Rng split_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  split_rng.shuffle(order);
  int n_val = 0;
  if (cfg.eval_fraction > 0.0 && n > 1)
    n_val = std::clamp(static_cast<int>(std::lround(cfg.eval_fraction * n)), 1, n - 1);
  const DatasetRef val = ds.take({order.begin(), order.begin() + n_val});
  const DatasetRef tr = ds.take({order.begin() + n_val, order.end()});

  std::vector<Tensor> weights = weight_tensors(model);
  AdamState adam = AdamState::like(weights);

  TrainResult result;
  std::vector<Tensor> best_weights = weights;
  int stale = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto batches = data::make_batches(tr.size(), cfg.batch_size, cfg.seed + epoch, true);
    double epoch_loss = 0.0;
    long counted = 0;
    for (size_t b = 0; b < batches.size(); ++b) {
      assign_weights(model, weights);
      BatchGrads bg;
      try {
        bg = batch_gradients(model, tr, batches[b], cfg);
      } catch (const NonFiniteError& e) {
        throw NonFiniteError("train: epoch " + std::to_string(epoch) + " batch " +
                             std::to_string(b) + ": " + e.what());
      }
      adam_step(weights, bg.grads, adam, cfg.lr);
      epoch_loss += bg.mean_loss * batches[b].size();
      counted += batches[b].size();
    }
    assign_weights(model, weights);

    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = counted > 0 ? epoch_loss / static_cast<double>(counted) : 0.0;
    m.val_acc = n_val > 0
                    ? evaluate(model, val, cfg.steps, Readout::MembraneSum, cfg.workers).accuracy
                    : 0.0;
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);

    if (result.history.size() == 1 || m.val_acc > result.best_val_acc) {
      result.best_val_acc = m.val_acc;
      result.best_epoch = epoch;
      best_weights = weights;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }

  assign_weights(model, best_weights);
  result.best = checkpoint_from_model(model, cfg, result.history);
  return result;
}

namespace {

void write_u16(std::ostream& out, uint16_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
uint16_t read_u16(std::istream& in, const std::string& path) {
  uint16_t v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw TruncatedFileError("truncated checkpoint " + path);
  return v;
}
uint32_t read_u32(std::istream& in, const std::string& path) {
  uint32_t v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw TruncatedFileError("truncated checkpoint " + path);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out.write("MSNN", 4);
  write_u32(out, 1u);
  write_u32(out, static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    write_u16(out, static_cast<uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const uint8_t rank = 2;
    out.write(reinterpret_cast<const char*>(&rank), 1);
    write_u32(out, static_cast<uint32_t>(t.rows));
    write_u32(out, static_cast<uint32_t>(t.cols));
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
  write_u32(out, static_cast<uint32_t>(ckpt.config_text.size()));
  out.write(ckpt.config_text.data(), static_cast<std::streamsize>(ckpt.config_text.size()));
  if (!out) throw DataError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4)) throw TruncatedFileError("truncated checkpoint " + path);
  if (std::memcmp(magic, "MSNN", 4) != 0) throw BadMagicError("bad checkpoint magic in " + path);
  const uint32_t version = read_u32(in, path);
  if (version != 1u)
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " in " + path);

  Checkpoint ckpt;
  const uint32_t count = read_u32(in, path);
  if (count > 4096) throw DataError("implausible tensor count in " + path);
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = read_u16(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw TruncatedFileError("truncated checkpoint " + path);
    uint8_t rank;
    if (!in.read(reinterpret_cast<char*>(&rank), 1))
      throw TruncatedFileError("truncated checkpoint " + path);
    if (rank != 2) throw DataError("unsupported tensor rank in " + path);
    const uint32_t rows_u = read_u32(in, path);
    const uint32_t cols_u = read_u32(in, path);
    if (rows_u > (1u << 24) || cols_u > (1u << 24) ||
        static_cast<uint64_t>(rows_u) * cols_u > (1u << 28))
      throw DataError("implausible tensor shape in " + path);
    const int rows = static_cast<int>(rows_u);
    const int cols = static_cast<int>(cols_u);
    Tensor t(rows, cols);
    if (!in.read(reinterpret_cast<char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(double))))
      throw TruncatedFileError("truncated checkpoint " + path);
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  const uint32_t blob_len = read_u32(in, path);
  if (blob_len > (1u << 24)) throw DataError("implausible config blob in " + path);
  ckpt.config_text.resize(blob_len);
  if (!in.read(ckpt.config_text.data(), blob_len))
    throw TruncatedFileError("truncated checkpoint " + path);
  return ckpt;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string get_value(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
  }
  throw DataError("checkpoint config: missing key '" + key + "'");
}

}  // namespace

Checkpoint checkpoint_from_model(const MsnnModel& model, const TrainConfig& cfg,
                                 std::span<const EpochMetrics> history) {
  Checkpoint ckpt;
  for (size_t l = 0; l < model.crossbars.size(); ++l)
    ckpt.tensors.emplace_back("crossbar" + std::to_string(l), model.crossbars[l].weights);

  std::ostringstream ss;
  ss << "arch=";
  ss << model.encoder.n;
  for (const auto& layer : model.mif_layers) ss << "-" << layer.n;
  ss << "\n";
  ss << "attenuation=" << format_double(model.crossbars.front().attenuation) << "\n";
  ss << "input_gain=" << format_double(model.encoder.input_gain) << "\n";
  ss << "spike_period=" << model.encoder.spike_period << "\n";
  ss << "tau_syn=" << format_double(model.encoder.params.tau_syn) << "\n";
  ss << "dt=" << format_double(model.step.dt) << "\n";
  ss << "substeps=" << model.step.substeps << "\n";
  ss << "integrator=" << device::integrator_name(model.step.integrator) << "\n";
  const device::MifParams& p = model.mif_layers.front().params;
  ss << "r_on1=" << format_double(p.r_on1) << "\n";
  ss << "r_off1=" << format_double(p.r_off1) << "\n";
  ss << "r_on2=" << format_double(p.r_on2) << "\n";
  ss << "r_off2=" << format_double(p.r_off2) << "\n";
  ss << "v_on1=" << format_double(p.v_on1) << "\n";
  ss << "v_off1=" << format_double(p.v_off1) << "\n";
  ss << "v_on2=" << format_double(p.v_on2) << "\n";
  ss << "v_off2=" << format_double(p.v_off2) << "\n";
  ss << "tau1=" << format_double(p.tau1) << "\n";
  ss << "tau2=" << format_double(p.tau2) << "\n";
  ss << "e_rest=" << format_double(p.e_rest) << "\n";
  ss << "e_reset=" << format_double(p.e_reset) << "\n";
  ss << "v_th=" << format_double(p.v_th) << "\n";
  ss << "k_v=" << format_double(p.k_v) << "\n";
  ss << "c=" << format_double(p.c) << "\n";
  ss << "softmax_beta=" << format_double(cfg.softmax_beta) << "\n";
  ss << "steps=" << cfg.steps << "\n";
  ss << "seed=" << cfg.seed << "\n";
  for (const EpochMetrics& m : history)
    ss << "metrics=" << m.epoch << "," << format_double(m.train_loss) << ","
       << format_double(m.val_acc) << "\n";
  ckpt.config_text = ss.str();
  return ckpt;
}

MsnnModel model_from_checkpoint(const Checkpoint& ckpt) {
  network::ModelConfig cfg;
  cfg.arch = network::parse_arch(get_value(ckpt.config_text, "arch"));
  cfg.attenuation = std::stod(get_value(ckpt.config_text, "attenuation"));
  cfg.input_gain = std::stod(get_value(ckpt.config_text, "input_gain"));
  cfg.spike_period = std::stoi(get_value(ckpt.config_text, "spike_period"));
  cfg.alpha.tau_syn = std::stod(get_value(ckpt.config_text, "tau_syn"));
  cfg.step.dt = std::stod(get_value(ckpt.config_text, "dt"));
  cfg.step.substeps = std::stoi(get_value(ckpt.config_text, "substeps"));
  cfg.step.integrator = device::parse_integrator(get_value(ckpt.config_text, "integrator"));
  cfg.mif.r_on1 = std::stod(get_value(ckpt.config_text, "r_on1"));
  cfg.mif.r_off1 = std::stod(get_value(ckpt.config_text, "r_off1"));
  cfg.mif.r_on2 = std::stod(get_value(ckpt.config_text, "r_on2"));
  cfg.mif.r_off2 = std::stod(get_value(ckpt.config_text, "r_off2"));
  cfg.mif.v_on1 = std::stod(get_value(ckpt.config_text, "v_on1"));
  cfg.mif.v_off1 = std::stod(get_value(ckpt.config_text, "v_off1"));
  cfg.mif.v_on2 = std::stod(get_value(ckpt.config_text, "v_on2"));
  cfg.mif.v_off2 = std::stod(get_value(ckpt.config_text, "v_off2"));
  cfg.mif.tau1 = std::stod(get_value(ckpt.config_text, "tau1"));
  cfg.mif.tau2 = std::stod(get_value(ckpt.config_text, "tau2"));
  cfg.mif.e_rest = std::stod(get_value(ckpt.config_text, "e_rest"));
  cfg.mif.e_reset = std::stod(get_value(ckpt.config_text, "e_reset"));
  cfg.mif.v_th = std::stod(get_value(ckpt.config_text, "v_th"));
  cfg.mif.k_v = std::stod(get_value(ckpt.config_text, "k_v"));
  cfg.mif.c = std::stod(get_value(ckpt.config_text, "c"));

  MsnnModel model = MsnnModel::build(cfg, 0);
  if (ckpt.tensors.size() != model.crossbars.size())
    throw DataError("checkpoint: tensor count does not match arch");
  for (size_t l = 0; l < model.crossbars.size(); ++l) {
    const auto& [name, t] = ckpt.tensors[l];
    if (!t.same_shape(model.crossbars[l].weights))
      throw DataError("checkpoint: tensor '" + name + "' has wrong shape");
    model.crossbars[l].weights = t;
  }
  return model;
}

int checkpoint_steps(const Checkpoint& ckpt) {
  return std::stoi(get_value(ckpt.config_text, "steps"));
}

double checkpoint_beta(const Checkpoint& ckpt) {
  return std::stod(get_value(ckpt.config_text, "softmax_beta"));
}

WeightExportReport export_weights(const Checkpoint& ckpt, const std::string& csv_path,
                                  double g_scale, double g_min, double g_max) {
  if (!(g_min > 0.0) || !(g_max > g_min))
    throw ConfigError("export_weights: need 0 < g_min < g_max");

  double w_max = 0.0;
  for (const auto& [name, t] : ckpt.tensors)
    for (double w : t.data) {
      if (!std::isfinite(w)) throw NonFiniteError("export_weights: non-finite weight");
      w_max = std::max(w_max, std::abs(w));
    }
  if (g_scale <= 0.0) g_scale = w_max > 0.0 ? (g_max - g_min) / w_max : 1.0;

  std::ofstream out(csv_path);
  if (!out) throw DataError("cannot open " + csv_path + " for writing");
  out << "layer,row,col,weight,g_plus,g_minus,weight_reconstructed,abs_error\n";
  out.precision(12);

  WeightExportReport rep;
  rep.g_scale = g_scale;
  rep.g_min = g_min;
  rep.g_max = g_max;
  for (size_t l = 0; l < ckpt.tensors.size(); ++l) {
    const Tensor& t = ckpt.tensors[l].second;
    for (int i = 0; i < t.rows; ++i) {
      for (int j = 0; j < t.cols; ++j) {
        const double w = t(i, j);
        double gp = std::max(w, 0.0) * g_scale + g_min;
        double gm = std::max(-w, 0.0) * g_scale + g_min;
        const bool clip = gp > g_max || gm > g_max;
        gp = std::min(gp, g_max);
        gm = std::min(gm, g_max);
        if (clip) ++rep.clipped;
        const double w_rec = (gp - gm) / g_scale;
        const double err = std::abs(w - w_rec);
        rep.max_err = std::max(rep.max_err, err);
        ++rep.rows;
        out << l << ',' << i << ',' << j << ',' << w << ',' << gp << ',' << gm << ',' << w_rec
            << ',' << err << '\n';
      }
    }
  }
  if (!out) throw DataError("write failed: " + csv_path);
  return rep;
}

}  // namespace msnn::train
