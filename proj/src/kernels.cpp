#include "hed/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace hed {

std::vector<double> Matrix::column(std::size_t c) const {
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = data[r * cols + c];
  return out;
}

Matrix Matrix::from_column(std::span<const double> v) {
  Matrix m(v.size(), 1);
  for (std::size_t r = 0; r < v.size(); ++r) m.data[r] = v[r];
  return m;
}

Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
  if (top.cols != bottom.cols) throw std::invalid_argument("stack_rows: column count mismatch");
  Matrix out(top.rows + bottom.rows, top.cols);
  std::copy(top.data.begin(), top.data.end(), out.data.begin());
  std::copy(bottom.data.begin(), bottom.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(top.data.size()));
  return out;
}

namespace kernels {
namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 16;

void check_affine(std::size_t w_size, std::size_t b_size, std::size_t out, std::size_t in) {
  if (w_size != out * in || b_size != out) throw std::invalid_argument("affine kernel: shape mismatch");
}

}  // namespace

void affine_forward(std::span<const double> w, std::span<const double> bias, const Matrix& x, Matrix& y) {
  const std::size_t out = bias.size();
  const std::size_t in = x.rows;
  const std::size_t batch = x.cols;
  check_affine(w.size(), bias.size(), out, in);
  if (y.rows != out || y.cols != batch) y.resize(out, batch);

  const double* xp = x.data.data();
  double* yp = y.data.data();
#pragma omp parallel for schedule(static) if (out * in * batch >= kParallelWork)
  for (std::size_t o = 0; o < out; ++o) {
    double* yrow = yp + o * batch;
    const double bo = bias[o];
    for (std::size_t b = 0; b < batch; ++b) yrow[b] = bo;
    const double* wrow = w.data() + o * in;
    for (std::size_t i = 0; i < in; ++i) {
      const double wi = wrow[i];
      const double* xrow = xp + i * batch;
      for (std::size_t b = 0; b < batch; ++b) yrow[b] += wi * xrow[b];
    }
  }
}

void affine_backward_input(std::span<const double> w, const Matrix& dy, Matrix& dx) {
  const std::size_t out = dy.rows;
  const std::size_t batch = dy.cols;
  if (out == 0 || w.size() % out != 0) throw std::invalid_argument("affine_backward_input: shape mismatch");
  const std::size_t in = w.size() / out;
  if (dx.rows != in || dx.cols != batch) dx.resize(in, batch);

  const double* dyp = dy.data.data();
  double* dxp = dx.data.data();
#pragma omp parallel for schedule(static) if (out * in * batch >= kParallelWork)
  for (std::size_t i = 0; i < in; ++i) {
    double* dxrow = dxp + i * batch;
    for (std::size_t b = 0; b < batch; ++b) dxrow[b] = 0.0;
    for (std::size_t o = 0; o < out; ++o) {
      const double woi = w[o * in + i];
      const double* dyrow = dyp + o * batch;
      for (std::size_t b = 0; b < batch; ++b) dxrow[b] += woi * dyrow[b];
    }
  }
}

void affine_backward_params(const Matrix& dy, const Matrix& x, std::span<double> dw, std::span<double> db) {
  const std::size_t out = dy.rows;
  const std::size_t in = x.rows;
  const std::size_t batch = dy.cols;
  if (x.cols != batch) throw std::invalid_argument("affine_backward_params: batch mismatch");
  check_affine(dw.size(), db.size(), out, in);

  // Sample-major copy of x so the per-sample update of a weight row is contiguous.
  std::vector<double> xt(batch * in);
  for (std::size_t i = 0; i < in; ++i)
    for (std::size_t b = 0; b < batch; ++b) xt[b * in + i] = x.data[i * batch + b];

  const double* dyp = dy.data.data();
#pragma omp parallel for schedule(static) if (out * in * batch >= kParallelWork)
  for (std::size_t o = 0; o < out; ++o) {
    double* dwrow = dw.data() + o * in;
    const double* dyrow = dyp + o * batch;
    double bias_acc = db[o];
    for (std::size_t b = 0; b < batch; ++b) {
      const double g = dyrow[b];
      bias_acc += g;
      const double* xrow = xt.data() + b * in;
      for (std::size_t i = 0; i < in; ++i) dwrow[i] += g * xrow[i];
    }
    db[o] = bias_acc;
  }
}

void activation_forward(Activation act, Matrix& z) {
  const std::size_t n = z.data.size();
  double* p = z.data.data();
  switch (act) {
    case Activation::identity:
      return;
    case Activation::relu:
#pragma omp parallel for schedule(static) if (n >= kParallelWork)
      for (std::size_t k = 0; k < n; ++k) p[k] = p[k] > 0.0 ? p[k] : 0.0;
      return;
    case Activation::tanh:
#pragma omp parallel for schedule(static) if (n >= kParallelWork / 8)
      for (std::size_t k = 0; k < n; ++k) p[k] = std::tanh(p[k]);
      return;
  }
}

void activation_backward(Activation act, const Matrix& out, Matrix& grad) {
  if (out.data.size() != grad.data.size()) throw std::invalid_argument("activation_backward: shape mismatch");
  const std::size_t n = grad.data.size();
  const double* o = out.data.data();
  double* g = grad.data.data();
  switch (act) {
    case Activation::identity:
      return;
    case Activation::relu:
#pragma omp parallel for schedule(static) if (n >= kParallelWork)
      for (std::size_t k = 0; k < n; ++k) g[k] = o[k] > 0.0 ? g[k] : 0.0;
      return;
    case Activation::tanh:
#pragma omp parallel for schedule(static) if (n >= kParallelWork)
      for (std::size_t k = 0; k < n; ++k) g[k] *= 1.0 - o[k] * o[k];
      return;
  }
}

namespace reference {

void affine_forward(std::span<const double> w, std::span<const double> bias, const Matrix& x, Matrix& y) {
  const std::size_t out = bias.size();
  const std::size_t in = x.rows;
  check_affine(w.size(), bias.size(), out, in);
  y.resize(out, x.cols);
  for (std::size_t o = 0; o < out; ++o) {
    for (std::size_t b = 0; b < x.cols; ++b) {
      double acc = bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += w[o * in + i] * x(i, b);
      y(o, b) = acc;
    }
  }
}

void affine_backward_input(std::span<const double> w, const Matrix& dy, Matrix& dx) {
  const std::size_t out = dy.rows;
  if (out == 0 || w.size() % out != 0) throw std::invalid_argument("affine_backward_input: shape mismatch");
  const std::size_t in = w.size() / out;
  dx.resize(in, dy.cols);
  for (std::size_t i = 0; i < in; ++i) {
    for (std::size_t b = 0; b < dy.cols; ++b) {
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) acc += w[o * in + i] * dy(o, b);
      dx(i, b) = acc;
    }
  }
}

void affine_backward_params(const Matrix& dy, const Matrix& x, std::span<double> dw, std::span<double> db) {
  const std::size_t out = dy.rows;
  const std::size_t in = x.rows;
  if (x.cols != dy.cols) throw std::invalid_argument("affine_backward_params: batch mismatch");
  check_affine(dw.size(), db.size(), out, in);
  for (std::size_t o = 0; o < out; ++o) {
    for (std::size_t i = 0; i < in; ++i) {
      double acc = dw[o * in + i];
      for (std::size_t b = 0; b < dy.cols; ++b) acc += dy(o, b) * x(i, b);
      dw[o * in + i] = acc;
    }
    double acc = db[o];
    for (std::size_t b = 0; b < dy.cols; ++b) acc += dy(o, b);
    db[o] = acc;
  }
}

void activation_forward(Activation act, Matrix& z) {
  for (double& v : z.data) {
    if (act == Activation::relu) v = v > 0.0 ? v : 0.0;
    else if (act == Activation::tanh) v = std::tanh(v);
  }
}

void activation_backward(Activation act, const Matrix& out, Matrix& grad) {
  if (out.data.size() != grad.data.size()) throw std::invalid_argument("activation_backward: shape mismatch");
  for (std::size_t k = 0; k < grad.data.size(); ++k) {
    if (act == Activation::relu) grad.data[k] = out.data[k] > 0.0 ? grad.data[k] : 0.0;
    else if (act == Activation::tanh) grad.data[k] *= 1.0 - out.data[k] * out.data[k];
  }
}

}  // namespace reference
}  // namespace kernels
}  // namespace hed
