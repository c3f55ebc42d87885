// Compares the serial reference kernels against the OpenMP versions, plus a
// batched forward/backward pass at the dense-stack sizes.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <vector>

#include "msnn/autodiff.hpp"
#include "msnn/kernels.hpp"
#include "msnn/network.hpp"
#include "msnn/rng.hpp"
#include "msnn/train.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<double> random_vec(size_t n, msnn::Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void bench_matvec(int n, int m, int reps) {
  msnn::Rng rng(7);
  const auto w = random_vec(static_cast<size_t>(n) * m, rng);
  const auto v = random_vec(static_cast<size_t>(m), rng);
  std::vector<double> out(static_cast<size_t>(n));

  auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) msnn::kernels::serial::matvec(w, n, m, v, out);
  const double t_serial = seconds_since(t0);

  t0 = Clock::now();
  for (int r = 0; r < reps; ++r) msnn::kernels::matvec(w, n, m, v, out);
  const double t_omp = seconds_since(t0);

  std::printf("matvec %5dx%-5d reps=%-6d serial %8.3f ms   omp %8.3f ms   speedup %.2fx\n", n,
              m, reps, t_serial * 1e3, t_omp * 1e3, t_serial / t_omp);
}

void bench_outer(int n, int m, int reps) {
  msnn::Rng rng(8);
  std::vector<double> w(static_cast<size_t>(n) * m, 0.0);
  const auto u = random_vec(static_cast<size_t>(n), rng);
  const auto v = random_vec(static_cast<size_t>(m), rng);

  auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) msnn::kernels::serial::outer_acc(w, n, m, u, v);
  const double t_serial = seconds_since(t0);

  t0 = Clock::now();
  for (int r = 0; r < reps; ++r) msnn::kernels::outer_acc(w, n, m, u, v);
  const double t_omp = seconds_since(t0);

  std::printf("outer  %5dx%-5d reps=%-6d serial %8.3f ms   omp %8.3f ms   speedup %.2fx\n", n,
              m, reps, t_serial * 1e3, t_omp * 1e3, t_serial / t_omp);
}

void bench_batch(int batch, int steps, int workers) {
  msnn::network::ModelConfig mc;
  mc.arch = {784, 100, 10};
  const auto model = msnn::network::MsnnModel::build(mc, 11);

  msnn::Rng rng(9);
  std::vector<std::vector<float>> images(static_cast<size_t>(batch));
  for (auto& img : images) {
    img.resize(784);
    for (auto& x : img) x = static_cast<float>(rng.uniform());
  }

  auto run = [&](int nthreads) {
    auto t0 = Clock::now();
    std::vector<double> losses(static_cast<size_t>(batch));
#pragma omp parallel num_threads(nthreads)
    {
      msnn::autodiff::Tape tape;
#pragma omp for schedule(static)
      for (int s = 0; s < batch; ++s) {
        tape.reset();
        msnn::network::SampleView sample;
        sample.image = images[static_cast<size_t>(s)];
        auto fw = msnn::network::model_forward_taped(tape, model, sample, steps);
        auto loss = msnn::train::loss_nll_membrane(tape, fw.v_out, s % 10, 100.0);
        auto grads = tape.backward(loss, fw.weight_leaves);
        losses[static_cast<size_t>(s)] = tape.scalar_value(loss) + grads.grads[0].data[0] * 0.0;
      }
    }
    return seconds_since(t0);
  };

  const double t1 = run(1);
  const double tn = run(workers);
  std::printf("batch fw+bw 784-100-10 T=%d batch=%d   1 worker %7.2f ms   %d workers %7.2f ms   "
              "speedup %.2fx\n",
              steps, batch, t1 * 1e3, workers, tn * 1e3, t1 / tn);
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", omp_get_max_threads());
  bench_matvec(100, 784, 20000);
  bench_matvec(1000, 1000, 2000);
  bench_matvec(4000, 4000, 100);
  bench_outer(100, 784, 20000);
  bench_outer(1000, 1000, 2000);
  bench_outer(4000, 4000, 100);
  bench_batch(16, 100, omp_get_max_threads());
  return 0;
}
