#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msnn/autodiff.hpp"
#include "msnn/data.hpp"
#include "msnn/network.hpp"
#include "msnn/tensor.hpp"

namespace msnn::train {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 128;
  double lr = 1e-4;
  int steps = 100;
  uint64_t seed = 1;
  double softmax_beta = 100.0;  // 1/V; maps the 0..50 mV membrane range to 0..5 logits
  int patience = 5;
  double eval_fraction = 0.1;
  int workers = 0;  // 0 = OpenMP default
  void validate() const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m, v;
  long step = 0;
  static AdamState like(std::span<const Tensor> weights);
};

/// Bias-corrected Adam update, deterministic. Throws NonFiniteError on
/// non-finite gradients.
void adam_step(std::vector<Tensor>& weights, std::span<const Tensor> grads, AdamState& state,
               double lr, const AdamConfig& cfg = {});

/// Summed per-step negative log-likelihood of the scaled output membrane
/// potentials: L = sum_t -log softmax(beta * v[t])[target].
autodiff::Var loss_nll_membrane(autodiff::Tape& tape,
                                std::span<const autodiff::Var> v_out_steps, int target,
                                double beta);

/// Same quantity from a stored (steps x classes) trace, tape-free.
double loss_nll_membrane_value(const Tensor& v_out, int target, double beta);

/// End-to-end finite-difference check of dLoss/dW through the full unrolled
/// model (every crossbar weight).
autodiff::GradcheckReport gradcheck_model(const network::MsnnModel& model,
                                          const network::SampleView& sample, int target,
                                          int steps, double beta, double eps = 1e-6,
                                          double tol = 1e-4);

/// Non-owning view over either dataset kind, optionally restricted to a
/// subset of row indices.
struct DatasetRef {
  const data::ImageDataset* images = nullptr;
  const data::EventDataset* events = nullptr;
  std::vector<int> subset;  // empty = all rows

  static DatasetRef of(const data::ImageDataset& ds) { return DatasetRef{&ds, nullptr, {}}; }
  static DatasetRef of(const data::EventDataset& ds) { return DatasetRef{nullptr, &ds, {}}; }

  int size() const;
  int label(int i) const;
  int features() const;
  int num_classes() const;
  network::SampleView sample(int i) const;
  DatasetRef take(std::vector<int> indices) const;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double val_acc = 0.0;
};

struct Checkpoint {
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::string config_text;  // key=value lines + metrics history
};

enum class Readout { MembraneSum, SpikeCount };

struct EvalResult {
  double accuracy = 0.0;
  Tensor confusion;  // true class x predicted class counts
  std::vector<int> predictions;
  double activity = 0.0;  // mean fraction of neuron-steps above threshold
};

int predict_from_trace(const Tensor& v_out, Readout readout, double threshold);

/// Tape-free evaluation; deterministic regardless of worker count.
EvalResult evaluate(const network::MsnnModel& model, const DatasetRef& ds, int steps,
                    Readout readout = Readout::MembraneSum, int workers = 0);

struct TrainResult {
  std::vector<EpochMetrics> history;
  Checkpoint best;
  int best_epoch = 0;
  double best_val_acc = 0.0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Full training loop: per epoch, shuffled batches, per-sample tapes run in
/// parallel with gradients reduced in sample order (mean over the batch),
/// one Adam step per batch. Holds out eval_fraction of the data for early
/// stopping with the configured patience; the best checkpoint is retained
/// and restored into `model`.
TrainResult train(network::MsnnModel& model, const DatasetRef& ds, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = nullptr);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint checkpoint_from_model(const network::MsnnModel& model, const TrainConfig& cfg,
                                 std::span<const EpochMetrics> history);
network::MsnnModel model_from_checkpoint(const Checkpoint& ckpt);
int checkpoint_steps(const Checkpoint& ckpt);      // training steps recorded in the blob
double checkpoint_beta(const Checkpoint& ckpt);

struct WeightExportReport {
  double g_scale = 0.0;
  double g_min = 0.0;
  double g_max = 0.0;
  double max_err = 0.0;
  long clipped = 0;
  long rows = 0;
};

/// Splits each signed weight into a differential conductance pair
/// G+ = max(w,0)*g_scale + g_min, G- = max(-w,0)*g_scale + g_min, both
/// clipped to [g_min, g_max], and writes one CSV row per weight together
/// with the reconstruction error |w - (G+ - G-)/g_scale|.
/// g_scale <= 0 selects (g_max - g_min)/max|w|.
WeightExportReport export_weights(const Checkpoint& ckpt, const std::string& csv_path,
                                  double g_scale = 0.0, double g_min = 1e-5,
                                  double g_max = 1e-3);

}  // namespace msnn::train
