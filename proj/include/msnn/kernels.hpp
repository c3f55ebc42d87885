#pragma once

#include <span>

namespace msnn::kernels {

// Serial reference implementations. The OpenMP versions below must produce
// bit-identical results: parallelism is only ever over independent output
// elements, never over a summation order.
namespace serial {

/// out = W v, W is (n x m) row-major.
void matvec(std::span<const double> w, int n, int m, std::span<const double> v,
            std::span<double> out);

/// acc += W^T u, W is (n x m) row-major, u has n entries, acc has m.
void matvec_t_acc(std::span<const double> w, int n, int m, std::span<const double> u,
                  std::span<double> acc);

/// w_acc += u v^T, w_acc is (n x m) row-major.
void outer_acc(std::span<double> w_acc, int n, int m, std::span<const double> u,
               std::span<const double> v);

}  // namespace serial

/// OpenMP versions. They fall back to the serial path when the work is small
/// or when called from inside an active parallel region (the batch loop in
/// train/evaluate parallelises over samples; nesting would only add overhead).
void matvec(std::span<const double> w, int n, int m, std::span<const double> v,
            std::span<double> out);
void matvec_t_acc(std::span<const double> w, int n, int m, std::span<const double> u,
                  std::span<double> acc);
void outer_acc(std::span<double> w_acc, int n, int m, std::span<const double> u,
               std::span<const double> v);

}  // namespace msnn::kernels
