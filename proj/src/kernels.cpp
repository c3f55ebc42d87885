#include "msnn/kernels.hpp"

#include <omp.h>

namespace msnn::kernels {

namespace serial {

void matvec(std::span<const double> w, int n, int m, std::span<const double> v,
            std::span<double> out) {
  for (int i = 0; i < n; ++i) {
    const double* row = w.data() + static_cast<size_t>(i) * m;
    double acc = 0.0;
    for (int j = 0; j < m; ++j) acc += row[j] * v[j];
    out[i] = acc;
  }
}

void matvec_t_acc(std::span<const double> w, int n, int m, std::span<const double> u,
                  std::span<double> acc) {
  for (int j = 0; j < m; ++j) {
    double s = acc[j];
    for (int i = 0; i < n; ++i) s += w[static_cast<size_t>(i) * m + j] * u[i];
    acc[j] = s;
  }
}

void outer_acc(std::span<double> w_acc, int n, int m, std::span<const double> u,
               std::span<const double> v) {
  for (int i = 0; i < n; ++i) {
    double* row = w_acc.data() + static_cast<size_t>(i) * m;
    const double ui = u[i];
    for (int j = 0; j < m; ++j) row[j] += ui * v[j];
  }
}

}  // namespace serial

namespace {
// Below this the fork/join overhead outweighs the loop body (measured with
// the bench_kernels target; the dense-stack 100x784 products sit well under
// it and run serial, batch-level parallelism covers them instead).
constexpr long kParallelThreshold = 256 * 1024;  // elements touched

bool use_serial(long work) { return work < kParallelThreshold || omp_in_parallel(); }
}  // namespace

void matvec(std::span<const double> w, int n, int m, std::span<const double> v,
            std::span<double> out) {
  if (use_serial(static_cast<long>(n) * m)) {
    serial::matvec(w, n, m, v, out);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    const double* row = w.data() + static_cast<size_t>(i) * m;
    double acc = 0.0;
    for (int j = 0; j < m; ++j) acc += row[j] * v[j];
    out[i] = acc;
  }
}

void matvec_t_acc(std::span<const double> w, int n, int m, std::span<const double> u,
                  std::span<double> acc) {
  if (use_serial(static_cast<long>(n) * m)) {
    serial::matvec_t_acc(w, n, m, u, acc);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int j = 0; j < m; ++j) {
    double s = acc[j];
    for (int i = 0; i < n; ++i) s += w[static_cast<size_t>(i) * m + j] * u[i];
    acc[j] = s;
  }
}

void outer_acc(std::span<double> w_acc, int n, int m, std::span<const double> u,
               std::span<const double> v) {
  if (use_serial(static_cast<long>(n) * m)) {
    serial::outer_acc(w_acc, n, m, u, v);
    return;
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    double* row = w_acc.data() + static_cast<size_t>(i) * m;
    const double ui = u[i];
    for (int j = 0; j < m; ++j) row[j] += ui * v[j];
  }
}

}  // namespace msnn::kernels
