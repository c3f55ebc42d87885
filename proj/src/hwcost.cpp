#include "msnn/hwcost.hpp"

#include <cmath>
#include <sstream>

#include "msnn/errors.hpp"

namespace msnn::hwcost {

void HwConfig::validate() const {
  if (layers.size() < 2) throw ConfigError("hwcost: need at least two layer sizes");
  for (int n : layers)
    if (n < 1) throw ConfigError("hwcost: layer sizes must be positive");
  if (devices_per_weight < 1) throw ConfigError("hwcost: devices_per_weight must be >= 1");
  if (tile_dim < 1) throw ConfigError("hwcost: tile_dim must be >= 1");
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(tile_area_mm2) || !positive(adc_area_mm2) || !positive(adc_power_w) ||
      !positive(adc_freq_hz) || !positive(r_ave) || !positive(v_ave) ||
      !positive(alpha_latency_s))
    throw ConfigError("hwcost: physical constants must be positive");
  if (activity < 0.0 || activity > 1.0) throw ConfigError("hwcost: activity must be in [0,1]");
  if (steps < 0) throw ConfigError("hwcost: steps must be >= 0");
  if (adcs_per_tile < 0 || dac_group < 1 || dac_cycles < 1 || cols_per_adc < 0)
    throw ConfigError("hwcost: bad peripheral assumption");
}

CellCount count_cells(std::span<const int> layers, int devices_per_weight, int tile_dim) {
  if (layers.size() < 2) throw ConfigError("count_cells: need at least two layer sizes");
  CellCount out;
  for (size_t i = 0; i + 1 < layers.size(); ++i)
    out.synapses += static_cast<long>(layers[i]) * layers[i + 1];
  out.cells = out.synapses * devices_per_weight;
  const long per_tile = static_cast<long>(tile_dim) * tile_dim;
  out.tiles = (out.cells + per_tile - 1) / per_tile;
  return out;
}

PowerEstimate power_estimate(const HwConfig& cfg) {
  cfg.validate();
  const CellCount cells = count_cells(cfg.layers, cfg.devices_per_weight, cfg.tile_dim);
  PowerEstimate out;
  out.per_tile_w = cfg.v_ave * cfg.v_ave / cfg.r_ave * (static_cast<double>(cfg.tile_dim) *
                                                        cfg.tile_dim) * cfg.activity;
  out.ours_w = out.per_tile_w * static_cast<double>(cells.tiles);
  out.mixed_w = out.ours_w +
                static_cast<double>(cells.tiles) * cfg.adcs_per_tile * cfg.adc_power_w;
  out.improvement = out.ours_w > 0.0 ? out.mixed_w / out.ours_w : 0.0;
  return out;
}

AreaEstimate area_estimate(const HwConfig& cfg) {
  cfg.validate();
  const CellCount cells = count_cells(cfg.layers, cfg.devices_per_weight, cfg.tile_dim);
  AreaEstimate out;
  out.ours_mm2 = static_cast<double>(cells.tiles) * cfg.tile_area_mm2;
  out.mixed_mm2 = out.ours_mm2 +
                  static_cast<double>(cells.tiles) * cfg.adcs_per_tile * cfg.adc_area_mm2;
  out.improvement = out.mixed_mm2 / out.ours_mm2;
  return out;
}

LatencyEstimate latency_estimate(const HwConfig& cfg) {
  cfg.validate();
  LatencyEstimate out;
  out.input_s = static_cast<double>(cfg.dac_group) * cfg.dac_cycles / cfg.adc_freq_hz;
  out.output_s = static_cast<double>(cfg.cols_per_adc) / cfg.adc_freq_hz;
  out.per_vmm_s = out.input_s + out.output_s;
  out.ours_s = cfg.alpha_latency_s;
  out.mixed_s = out.per_vmm_s * static_cast<double>(cfg.steps) + cfg.alpha_latency_s;
  out.improvement = out.mixed_s / out.ours_s;
  return out;
}

HwReport make_report(const HwConfig& cfg) {
  HwReport rep;
  rep.cells = count_cells(cfg.layers, cfg.devices_per_weight, cfg.tile_dim);
  rep.power = power_estimate(cfg);
  rep.area = area_estimate(cfg);
  rep.latency = latency_estimate(cfg);
  return rep;
}

namespace {
std::string fmt(double v, const char* spec = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}
}  // namespace

std::string format_report_text(const HwReport& rep) {
  std::ostringstream ss;
  ss << "cells: " << rep.cells.synapses << " synapses, " << rep.cells.cells << " devices, "
     << rep.cells.tiles << " tiles\n";
  ss << "aspect      ours          mixed-signal  improvement\n";
  ss << "area        " << fmt(rep.area.ours_mm2) << " mm2   " << fmt(rep.area.mixed_mm2)
     << " mm2   " << fmt(rep.area.improvement, "%.2f") << "x\n";
  ss << "power       " << fmt(rep.power.ours_w * 1e3) << " mW    " << fmt(rep.power.mixed_w * 1e3)
     << " mW    " << fmt(rep.power.improvement, "%.2f") << "x\n";
  ss << "latency     " << fmt(rep.latency.ours_s * 1e3) << " ms    "
     << fmt(rep.latency.mixed_s * 1e3) << " ms    " << fmt(rep.latency.improvement, "%.2f")
     << "x\n";
  ss << "per-tile power: " << fmt(rep.power.per_tile_w * 1e6, "%.4f") << " uW; per-VMM latency: "
     << fmt(rep.latency.per_vmm_s * 1e6, "%.2f") << " us\n";
  return ss.str();
}

std::string format_report_csv(const HwReport& rep) {
  std::ostringstream ss;
  ss.precision(10);
  ss << "aspect,ours,mixed,improvement\n";
  ss << "area_mm2," << rep.area.ours_mm2 << ',' << rep.area.mixed_mm2 << ','
     << rep.area.improvement << "\n";
  ss << "power_w," << rep.power.ours_w << ',' << rep.power.mixed_w << ','
     << rep.power.improvement << "\n";
  ss << "latency_s," << rep.latency.ours_s << ',' << rep.latency.mixed_s << ','
     << rep.latency.improvement << "\n";
  return ss.str();
}

}  // namespace msnn::hwcost
