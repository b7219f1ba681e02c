#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hed {

/// Dense row-major matrix. Batched activations are stored feature-major:
/// one row per feature, one column per sample.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  /// Single column as a vector (one sample of a feature-major batch).
  std::vector<double> column(std::size_t c) const;
  static Matrix from_column(std::span<const double> v);

  void resize(std::size_t r, std::size_t c) {
    rows = r;
    cols = c;
    data.assign(r * c, 0.0);
  }
};

/// Vertically stacks two feature-major batches with equal column counts.
Matrix stack_rows(const Matrix& top, const Matrix& bottom);

enum class Activation { identity, relu, tanh };

namespace kernels {

// Every kernel accumulates each output element in a fixed serial order, so the
// OpenMP versions are bit-identical to kernels::reference for any thread count.

/// y[o, :] = bias[o] + sum_i w[o, i] * x[i, :], with w row-major [out x in].
void affine_forward(std::span<const double> w, std::span<const double> bias, const Matrix& x, Matrix& y);

/// dx[i, :] = sum_o w[o, i] * dy[o, :]
void affine_backward_input(std::span<const double> w, const Matrix& dy, Matrix& dx);

/// dw[o, i] += sum_b dy[o, b] * x[i, b];  db[o] += sum_b dy[o, b]
void affine_backward_params(const Matrix& dy, const Matrix& x, std::span<double> dw, std::span<double> db);

/// Applies the activation in place.
void activation_forward(Activation act, Matrix& z);

/// grad *= f'(z), with f' expressed through the activation output.
void activation_backward(Activation act, const Matrix& out, Matrix& grad);

namespace reference {

void affine_forward(std::span<const double> w, std::span<const double> bias, const Matrix& x, Matrix& y);
void affine_backward_input(std::span<const double> w, const Matrix& dy, Matrix& dx);
void affine_backward_params(const Matrix& dy, const Matrix& x, std::span<double> dw, std::span<double> db);
void activation_forward(Activation act, Matrix& z);
void activation_backward(Activation act, const Matrix& out, Matrix& grad);

}  // namespace reference

}  // namespace kernels
}  // namespace hed
