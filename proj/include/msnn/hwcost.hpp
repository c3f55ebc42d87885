#pragma once

#include <span>
#include <string>
#include <vector>

namespace msnn::hwcost {

/// Architecture, tile and peripheral assumptions for the cost comparison of
/// the spike-based design against a mixed-signal ADC/DAC baseline at 65 nm.
struct HwConfig {
  std::vector<int> layers{784, 100, 10};
  int devices_per_weight = 2;  // differential pair per signed weight
  int tile_dim = 128;

  double tile_area_mm2 = 2.77e-3;
  double adc_area_mm2 = 3e-3;
  int adcs_per_tile = 4;
  double adc_power_w = 2e-4;
  double adc_freq_hz = 40e6;

  double v_on = 110e-3;
  double v_off = 5e-3;
  double v_ave = 57.5e-3;  // (v_on + v_off) / 2
  double r_on = 1e3;
  double r_off = 1e5;
  double r_ave = 50.5e3;

  double activity = 0.02;  // fraction of cells active at any given time
  long steps = 1000;
  double alpha_latency_s = 0.64e-3;

  // Mixed-signal serialization assumptions, kept explicit rather than folded
  // into a single per-VMM number.
  int dac_group = 32;    // data-lines sharing one driving DAC
  int dac_cycles = 8;    // serialized input cycles per 8-bit activation
  int cols_per_adc = 16; // column conversions per ADC per VMM

  void validate() const;  // throws ConfigError
};

struct CellCount {
  long synapses = 0;
  long cells = 0;
  long tiles = 0;
};

/// synapses = sum of adjacent layer products; cells = synapses *
/// devices_per_weight; tiles = ceil(cells / tile_dim^2).
CellCount count_cells(std::span<const int> layers, int devices_per_weight, int tile_dim);

struct PowerEstimate {
  double per_tile_w = 0.0;
  double ours_w = 0.0;
  double mixed_w = 0.0;
  double improvement = 0.0;
};

/// Per-tile P = v_ave^2 / r_ave * tile_dim^2 * activity. The mixed-signal
/// baseline adds the ADC power per tile.
PowerEstimate power_estimate(const HwConfig& cfg);

struct AreaEstimate {
  double ours_mm2 = 0.0;
  double mixed_mm2 = 0.0;
  double improvement = 0.0;
};

AreaEstimate area_estimate(const HwConfig& cfg);

struct LatencyEstimate {
  double input_s = 0.0;    // DAC serialization per VMM
  double output_s = 0.0;   // ADC conversion per VMM
  double per_vmm_s = 0.0;
  double ours_s = 0.0;
  double mixed_s = 0.0;
  double improvement = 0.0;
};

/// Mixed-signal: per-VMM conversion latency times the step count plus the
/// alpha-current injection latency. Spike-based: the alpha latency alone
/// (memristor switching adds only hundreds of nanoseconds).
LatencyEstimate latency_estimate(const HwConfig& cfg);

struct HwReport {
  CellCount cells;
  PowerEstimate power;
  AreaEstimate area;
  LatencyEstimate latency;
};

HwReport make_report(const HwConfig& cfg);

/// Three-row comparison table (Area / Power / Latency x Ours / Mixed-signal
/// / Improvement), plain text or CSV.
std::string format_report_text(const HwReport& rep);
std::string format_report_csv(const HwReport& rep);

}  // namespace msnn::hwcost
