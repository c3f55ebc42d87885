#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "msnn/autodiff.hpp"
#include "msnn/device.hpp"
#include "msnn/tensor.hpp"

namespace msnn::network {

/// Signed, dimensionless weight matrix (n_out x n_in) with a current
/// attenuation applied to the bit-line sums.
struct CrossbarLayer {
  Tensor weights;
  double attenuation = 1.0;
};

struct MifLayer {
  int n = 0;
  device::MifParams params;
};

struct AlphaEncoder {
  int n = 0;
  device::AlphaParams params;
  int spike_period = 100;
  double input_gain = 1e-7;  // A per unit intensity
};

// Hyperparameter defaults for the dense stack. With fan-in-normalised
// weights, an attenuation of 4e-5 A/V turns a ~30 mV upstream signal into a
// few hundred nA of per-neuron drive, which is the single-cell response
// range. The input gain makes a unit-intensity pixel's alpha waveform peak
// near the same ~30 mV signal scale as the membrane potentials.
inline constexpr double kDefaultAttenuation = 4e-5;  // A per unit signal per unit weight
inline constexpr double kDefaultInputGain = 0.08;    // signal units per unit intensity

struct ModelConfig {
  std::vector<int> arch;  // e.g. {784, 100, 10}
  double attenuation = kDefaultAttenuation;
  double input_gain = kDefaultInputGain;
  int spike_period = 100;
  // Scale of the final crossbar's random init relative to 1/sqrt(fan_in).
  // 0 starts the readout from scratch, which converges much faster at small
  // step budgets; 1 gives every layer the same random init.
  double head_init_scale = 0.0;
  device::MifParams mif;
  device::AlphaParams alpha;
  device::StepConfig step;
};

/// Alternating crossbar / MIF stack behind an alpha-current encoder. Holds
/// no dynamic state; every forward starts from v = e_rest, x = 0, alpha = 0.
struct MsnnModel {
  AlphaEncoder encoder;
  std::vector<CrossbarLayer> crossbars;
  std::vector<MifLayer> mif_layers;
  device::StepConfig step;

  /// Weights drawn uniformly from [-1/sqrt(fan_in), +1/sqrt(fan_in)].
  static MsnnModel build(const ModelConfig& cfg, uint64_t seed);

  int input_size() const { return encoder.n; }
  int output_size() const { return mif_layers.back().n; }
  int num_layers() const { return static_cast<int>(mif_layers.size()); }
};

/// One input sample: either a static intensity image (injected every
/// spike_period steps) or a per-step event-count sequence (injected every
/// step, row-major T x n).
struct SampleView {
  std::span<const float> image;
  std::span<const uint8_t> events;
  int event_steps = 0;
  bool per_step() const { return !events.empty(); }
};

struct ForwardTrace {
  Tensor v_out;                    // steps x n_out
  std::vector<Tensor> hidden_v;    // per layer when requested (steps x n)
  std::vector<long> spikes_per_layer;
  double activity = 0.0;           // fraction of neuron-steps above threshold
};

/// i_out = attenuation * (weights * v_in). Tape-free.
Tensor crossbar_forward(const CrossbarLayer& layer, const Tensor& v_in);

/// Same computation recorded on the tape.
autodiff::Var crossbar_forward(autodiff::Tape& tape, autodiff::Var weights,
                               double attenuation, autodiff::Var v_in);

/// Per-channel alpha generator states for the encoder.
struct EncoderState {
  std::vector<double> i, a;
};

/// Injection weight for channel intensity at step t (0 on non-injection
/// steps of the static path).
double injection_weight(const AlphaEncoder& enc, double intensity, int t, bool per_step);

/// Advances all channels one step and returns their output currents.
std::vector<double> encode_step(const AlphaEncoder& enc, EncoderState& state,
                                const SampleView& sample, int t,
                                const device::StepConfig& cfg);

/// Full encoder output over `steps` steps (steps x n). Both forward paths
/// consume this trace, so they see bit-identical input currents.
Tensor encoder_trace(const AlphaEncoder& enc, const SampleView& sample, int steps,
                     const device::StepConfig& cfg);

/// Tape-free unroll; throws NonFiniteError if any state diverges.
ForwardTrace model_forward(const MsnnModel& model, const SampleView& sample, int steps,
                           bool keep_hidden = false);

/// Vector MIF layer state recorded on a tape.
struct TapedMifLayer {
  autodiff::Var v, x1, x2;
};

/// One discrete step of a whole MIF layer on the tape (all substeps).
/// Requires dt/substeps <= min(tau1, tau2) so the smooth update keeps
/// x in [0,1] without clamping.
void taped_mif_layer_step(autodiff::Tape& tape, TapedMifLayer& layer, autodiff::Var i_in,
                          const device::MifParams& p, const device::StepConfig& cfg);

struct TapedForward {
  std::vector<autodiff::Var> v_out;          // one per step
  std::vector<autodiff::Var> weight_leaves;  // one per crossbar
};

/// Records the full unrolled forward computation; gradients flow to the
/// crossbar weight leaves.
TapedForward model_forward_taped(autodiff::Tape& tape, const MsnnModel& model,
                                 const SampleView& sample, int steps);

/// Same, but reading crossbar weights from already-recorded leaf variables
/// (the model's own weight values are ignored).
TapedForward model_forward_taped_with(autodiff::Tape& tape, const MsnnModel& model,
                                      const SampleView& sample, int steps,
                                      std::span<const autodiff::Var> weight_leaves);

/// Rising-crossing spike count for a single neuron trace.
long count_spikes(std::span<const double> v_trace, double threshold);

/// Per-neuron counts over a (steps x n) trace block.
std::vector<long> count_spikes(const Tensor& traces, double threshold);

/// "784-100-10" or "784,100,10" -> {784, 100, 10}.
std::vector<int> parse_arch(const std::string& s);

}  // namespace msnn::network
