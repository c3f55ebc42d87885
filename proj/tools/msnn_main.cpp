// Command-line front end: single-cell simulation, gradient checking,
// training, evaluation, weight export and the hardware cost report.

#include <omp.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "msnn/data.hpp"
#include "msnn/device.hpp"
#include "msnn/errors.hpp"
#include "msnn/hwcost.hpp"
#include "msnn/network.hpp"
#include "msnn/rng.hpp"
#include "msnn/train.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitData = 4;

msnn::device::SpikeSchedule parse_spikes(const std::string& s) {
  msnn::device::SpikeSchedule sched;
  if (s.empty()) return sched;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    auto colon = tok.find(':');
    if (colon == std::string::npos)
      throw msnn::ConfigError("--spikes: expected step:weight, got '" + tok + "'");
    try {
      sched.emplace_back(std::stoi(tok.substr(0, colon)), std::stod(tok.substr(colon + 1)));
    } catch (const std::exception&) {
      throw msnn::ConfigError("--spikes: cannot parse '" + tok + "'");
    }
  }
  return sched;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fully memristive spiking network simulator and trainer"};
  app.require_subcommand(1);

  // ---- neuron-sim ----------------------------------------------------
  auto* sim = app.add_subcommand("neuron-sim", "Single-cell simulation with optional RK4 oracle");
  std::string sim_params, sim_spikes, sim_oracle = "none", sim_out = "trace.csv";
  std::string sim_integrator = "expeuler";
  int sim_steps = 1000;
  double sim_dt = 1e-5;
  int sim_substeps = 1;
  sim->add_option("--params", sim_params, "Device config file (key = value lines)");
  sim->add_option("--steps", sim_steps, "Number of outer steps");
  sim->add_option("--dt", sim_dt, "Outer step duration (s)");
  sim->add_option("--substeps", sim_substeps, "Inner substeps per outer step");
  sim->add_option("--integrator", sim_integrator, "expeuler|euler");
  sim->add_option("--oracle", sim_oracle, "rk4|none");
  sim->add_option("--spikes", sim_spikes, "Impulse schedule step:weight,... (default 0:5e-6)");
  sim->add_option("--out", sim_out, "Output CSV path");

  // ---- gradcheck -----------------------------------------------------
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the unrolled gradients");
  std::string gc_arch = "8-4-3";
  int gc_steps = 20, gc_seeds = 10;
  double gc_eps = 1e-6, gc_tol = 1e-4;
  uint64_t gc_seed = 1;
  gc->add_option("--arch", gc_arch, "Layer sizes, e.g. 8-4-3");
  gc->add_option("--steps", gc_steps, "Unroll length");
  gc->add_option("--seeds", gc_seeds, "Number of random seeds");
  gc->add_option("--seed", gc_seed, "First seed");
  gc->add_option("--eps", gc_eps, "Central difference epsilon");
  gc->add_option("--tol", gc_tol, "Relative error tolerance");

  // ---- train ---------------------------------------------------------
  auto* tr = app.add_subcommand("train", "Train crossbar weights");
  std::string tr_dataset = "mnist", tr_data_dir, tr_ckpt = "ckpt.msnn", tr_arch;
  int tr_epochs = 50, tr_batch = 128, tr_steps = 100, tr_hidden = 100, tr_workers = 0;
  int tr_train_limit = 0;
  double tr_lr = 1e-4, tr_beta = 100.0, tr_atten = msnn::network::kDefaultAttenuation;
  double tr_gain = msnn::network::kDefaultInputGain, tr_eval_frac = 0.1;
  int tr_period = 100, tr_patience = 5;
  uint64_t tr_seed = 1;
  tr->add_option("--dataset", tr_dataset, "mnist|fmnist|digits|dvs");
  tr->add_option("--data-dir", tr_data_dir, "Dataset directory (default $MSNN_DATA_DIR)");
  tr->add_option("--epochs", tr_epochs);
  tr->add_option("--batch", tr_batch);
  tr->add_option("--lr", tr_lr);
  tr->add_option("--steps", tr_steps, "Unrolled time steps per sample");
  tr->add_option("--hidden", tr_hidden, "Hidden layer size");
  tr->add_option("--arch", tr_arch, "Full architecture override, e.g. 784-100-10");
  tr->add_option("--seed", tr_seed);
  tr->add_option("--ckpt", tr_ckpt, "Checkpoint output path");
  tr->add_option("--beta", tr_beta, "Softmax temperature (1/V)");
  tr->add_option("--attenuation", tr_atten);
  tr->add_option("--input-gain", tr_gain);
  tr->add_option("--spike-period", tr_period);
  tr->add_option("--patience", tr_patience);
  tr->add_option("--eval-fraction", tr_eval_frac);
  tr->add_option("--workers", tr_workers, "Parallel workers (0 = OpenMP default)");
  tr->add_option("--train-limit", tr_train_limit, "Use only the first N training samples");
  double tr_head_init = 0.0;
  tr->add_option("--head-init", tr_head_init, "Output crossbar init scale (0 = from scratch)");

  // ---- eval ----------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ev_ckpt, ev_dataset = "mnist", ev_data_dir, ev_readout = "membrane";
  int ev_steps = 0, ev_limit = 0, ev_workers = 0;
  ev->add_option("--ckpt", ev_ckpt, "Checkpoint path")->required();
  ev->add_option("--dataset", ev_dataset, "mnist|fmnist|digits|dvs");
  ev->add_option("--data-dir", ev_data_dir);
  ev->add_option("--steps", ev_steps, "Evaluation steps (default: training steps)");
  ev->add_option("--readout", ev_readout, "membrane|spikes");
  ev->add_option("--limit", ev_limit, "Use only the first N test samples");
  ev->add_option("--workers", ev_workers);

  // ---- export-weights ------------------------------------------------
  auto* ex = app.add_subcommand("export-weights", "Differential conductance pair export");
  std::string ex_ckpt, ex_out = "weights.csv";
  double ex_scale = 0.0, ex_gmin = 1e-5, ex_gmax = 1e-3;
  ex->add_option("--ckpt", ex_ckpt)->required();
  ex->add_option("--out", ex_out, "CSV output path");
  ex->add_option("--g-scale", ex_scale, "Conductance per unit weight (0 = auto)");
  ex->add_option("--g-min", ex_gmin);
  ex->add_option("--g-max", ex_gmax);

  // ---- hwcost ----------------------------------------------------------
  auto* hw = app.add_subcommand("hwcost", "Area / power / latency comparison");
  std::string hw_arch = "784,100,10", hw_csv;
  double hw_activity = 0.02;
  long hw_steps = 1000;
  hw->add_option("--arch", hw_arch, "Layer sizes, e.g. 784,100,10");
  hw->add_option("--activity", hw_activity, "Fraction of cells active");
  hw->add_option("--steps", hw_steps, "Time steps per inference");
  hw->add_option("--csv", hw_csv, "Also write the table as CSV to this path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (sim->parsed()) {
      using namespace msnn::device;
      DeviceConfig dc;
      if (!sim_params.empty()) dc = load_device_config(sim_params);
      dc.step.dt = sim_dt;
      dc.step.substeps = sim_substeps;
      dc.step.integrator = parse_integrator(sim_integrator);
      if (sim_steps < 1) throw msnn::ConfigError("--steps must be >= 1");
      if (sim_oracle != "rk4" && sim_oracle != "none")
        throw msnn::ConfigError("--oracle must be rk4|none");

      SpikeSchedule sched = sim_spikes.empty() ? default_drive() : parse_spikes(sim_spikes);
      const NeuronTraces tr = simulate_neuron(dc.mif, dc.alpha, sched, sim_steps, dc.step);

      std::ofstream out(sim_out);
      if (!out) throw msnn::DataError("cannot open " + sim_out + " for writing");
      out.precision(12);
      if (sim_oracle == "rk4") {
        const NeuronTraces rk =
            rk4_reference(dc.mif, dc.alpha, sched, sim_steps, dc.step, dc.step.dt / 10.0);
        out << "t,v,x1,x2,I,v_rk4,x1_rk4,x2_rk4,I_rk4\n";
        double dv = 0.0;
        for (int t = 0; t < sim_steps; ++t) {
          out << t << ',' << tr.v[t] << ',' << tr.x1[t] << ',' << tr.x2[t] << ',' << tr.i_syn[t]
              << ',' << rk.v[t] << ',' << rk.x1[t] << ',' << rk.x2[t] << ',' << rk.i_syn[t]
              << '\n';
          dv = std::max(dv, std::abs(tr.v[t] - rk.v[t]));
        }
        const long s_prod = msnn::network::count_spikes(tr.v, dc.mif.v_th);
        const long s_rk = msnn::network::count_spikes(rk.v, dc.mif.v_th);
        std::cout << "max|dv| = " << dv << " V\n";
        std::cout << "spikes=" << s_prod << " spikes_rk4=" << s_rk << "\n";
      } else {
        out << "t,v,x1,x2,I\n";
        for (int t = 0; t < sim_steps; ++t)
          out << t << ',' << tr.v[t] << ',' << tr.x1[t] << ',' << tr.x2[t] << ',' << tr.i_syn[t]
              << '\n';
        std::cout << "spikes=" << msnn::network::count_spikes(tr.v, dc.mif.v_th) << "\n";
      }
      std::cout << "wrote " << sim_out << "\n";
      return kExitOk;
    }

    if (gc->parsed()) {
      const std::vector<int> arch = msnn::network::parse_arch(gc_arch);
      double worst = 0.0;
      for (int s = 0; s < gc_seeds; ++s) {
        msnn::network::ModelConfig mc;
        mc.arch = arch;
        mc.head_init_scale = 1.0;  // gradients must flow through every layer
        const msnn::network::MsnnModel model =
            msnn::network::MsnnModel::build(mc, gc_seed + static_cast<uint64_t>(s));

        // Random static sample and target, deterministic per seed.
        msnn::Rng rng(gc_seed + 1000 + static_cast<uint64_t>(s));
        std::vector<float> image(static_cast<size_t>(arch.front()));
        for (auto& x : image) x = static_cast<float>(rng.uniform());
        const int target = static_cast<int>(rng.below(static_cast<uint64_t>(arch.back())));
        msnn::network::SampleView sample;
        sample.image = image;

        const auto rep =
            msnn::train::gradcheck_model(model, sample, target, gc_steps, 100.0, gc_eps, gc_tol);
        worst = std::max(worst, rep.max_rel_err);
      }
      const bool pass = worst <= gc_tol;
      std::cout << "max_rel_err=" << worst << " tol=" << gc_tol << (pass ? " PASS" : " FAIL")
                << "\n";
      return pass ? kExitOk : kExitNumeric;
    }

    if (tr->parsed() || ev->parsed()) {
      const bool training = tr->parsed();
      std::string dataset = training ? tr_dataset : ev_dataset;
      std::string dir = training ? tr_data_dir : ev_data_dir;
      if (dir.empty()) {
        const char* env = std::getenv("MSNN_DATA_DIR");
        dir = env ? env : ".";
      }

      msnn::data::ImageDataset images;
      msnn::data::EventDataset events;
      const bool is_event = dataset == "dvs";
      if (is_event) {
        events = msnn::data::load_event_dataset(dir + "/" + (training ? "train" : "test"));
      } else if (dataset == "mnist" || dataset == "fmnist" || dataset == "digits") {
        const std::string prefix = dir + "/" + dataset + "_" + (training ? "train" : "test");
        const std::string std_prefix = dir + "/" + (training ? "train" : "t10k");
        if (std::filesystem::exists(prefix + "_images.idx3")) {
          images = msnn::data::load_image_dataset(prefix + "_images.idx3",
                                                  prefix + "_labels.idx1");
        } else if (std::filesystem::exists(std_prefix + "-images-idx3-ubyte")) {
          images = msnn::data::load_image_dataset(std_prefix + "-images-idx3-ubyte",
                                                  std_prefix + "-labels-idx1-ubyte");
        } else {
          // fall through to the canonical name so the error mentions it
          images = msnn::data::load_image_dataset(prefix + "_images.idx3",
                                                  prefix + "_labels.idx1");
        }
      } else {
        throw msnn::ConfigError("unknown dataset '" + dataset + "'");
      }

      msnn::train::DatasetRef ds = is_event ? msnn::train::DatasetRef::of(events)
                                            : msnn::train::DatasetRef::of(images);

      if (training) {
        if (tr_train_limit > 0 && tr_train_limit < ds.size()) {
          std::vector<int> keep(static_cast<size_t>(tr_train_limit));
          for (int i = 0; i < tr_train_limit; ++i) keep[static_cast<size_t>(i)] = i;
          ds = ds.take(std::move(keep));
        }
        msnn::network::ModelConfig mc;
        mc.arch = tr_arch.empty()
                      ? std::vector<int>{ds.features(), tr_hidden, ds.num_classes()}
                      : msnn::network::parse_arch(tr_arch);
        mc.attenuation = tr_atten;
        mc.input_gain = tr_gain;
        mc.spike_period = tr_period;
        mc.head_init_scale = tr_head_init;
        msnn::network::MsnnModel model = msnn::network::MsnnModel::build(mc, tr_seed);

        msnn::train::TrainConfig cfg;
        cfg.epochs = tr_epochs;
        cfg.batch_size = tr_batch;
        cfg.lr = tr_lr;
        cfg.steps = tr_steps;
        cfg.seed = tr_seed;
        cfg.softmax_beta = tr_beta;
        cfg.patience = tr_patience;
        cfg.eval_fraction = tr_eval_frac;
        cfg.workers = tr_workers;

        std::cout << "epoch,train_loss,val_acc\n";
        auto result = msnn::train::train(model, ds, cfg, [](const msnn::train::EpochMetrics& m) {
          std::cout << m.epoch << ',' << m.train_loss << ',' << m.val_acc << std::endl;
        });
        msnn::train::save_checkpoint(tr_ckpt, result.best);
        std::cout << "best_epoch=" << result.best_epoch << " best_val_acc=" << result.best_val_acc
                  << "\nwrote " << tr_ckpt << "\n";
        return kExitOk;
      }

      // eval
      msnn::train::Checkpoint ckpt = msnn::train::load_checkpoint(ev_ckpt);
      msnn::network::MsnnModel model = msnn::train::model_from_checkpoint(ckpt);
      if (ev_limit > 0 && ev_limit < ds.size()) {
        std::vector<int> keep(static_cast<size_t>(ev_limit));
        for (int i = 0; i < ev_limit; ++i) keep[static_cast<size_t>(i)] = i;
        ds = ds.take(std::move(keep));
      }
      const int steps = ev_steps > 0 ? ev_steps : msnn::train::checkpoint_steps(ckpt);
      const auto readout = ev_readout == "spikes" ? msnn::train::Readout::SpikeCount
                                                  : msnn::train::Readout::MembraneSum;
      const auto res = msnn::train::evaluate(model, ds, steps, readout, ev_workers);
      std::cout << "accuracy=" << res.accuracy << " samples=" << ds.size()
                << " activity=" << res.activity << "\n";
      std::cout << "confusion:\n";
      for (int i = 0; i < res.confusion.rows; ++i) {
        for (int j = 0; j < res.confusion.cols; ++j)
          std::cout << static_cast<long>(res.confusion(i, j)) << (j + 1 < res.confusion.cols ? ',' : '\n');
      }
      return kExitOk;
    }

    if (ex->parsed()) {
      const auto ckpt = msnn::train::load_checkpoint(ex_ckpt);
      const auto rep = msnn::train::export_weights(ckpt, ex_out, ex_scale, ex_gmin, ex_gmax);
      std::cout << "g_scale=" << rep.g_scale << " g_min=" << rep.g_min << " g_max=" << rep.g_max
                << "\nrows=" << rep.rows << " clipped=" << rep.clipped
                << " max_reconstruction_error=" << rep.max_err << "\nwrote " << ex_out << "\n";
      return kExitOk;
    }

    if (hw->parsed()) {
      msnn::hwcost::HwConfig cfg;
      cfg.layers = msnn::network::parse_arch(hw_arch);
      cfg.activity = hw_activity;
      cfg.steps = hw_steps;
      const auto rep = msnn::hwcost::make_report(cfg);
      std::cout << msnn::hwcost::format_report_text(rep);
      std::cout << "note: tile areas follow the per-tile derivation (1e-2 mm2 scale); the "
                   "improvement ratios are scale-invariant\n";
      if (!hw_csv.empty()) {
        std::ofstream out(hw_csv);
        if (!out) throw msnn::DataError("cannot open " + hw_csv + " for writing");
        out << msnn::hwcost::format_report_csv(rep);
        std::cout << "wrote " << hw_csv << "\n";
      }
      return kExitOk;
    }
  } catch (const msnn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const msnn::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const msnn::NonFiniteError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitConfig;
}
