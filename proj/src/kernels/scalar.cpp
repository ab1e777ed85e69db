#include <cmath>

#include "psc/kernels.hpp"

// Reference kernels. Loop nests are the definition of the accumulation order
// that SIMD variants must reproduce exactly: per output element, bias first,
// then contributions in ascending (j, i) / t order, innermost index last.

namespace psc::kernels {
namespace {

void conv_forward_scalar(const double* x, const double* w, const double* b, double* out,
                         const ConvShape& s, bool relu) {
  const std::size_t T = s.t_out(), K = s.k, CI = s.c_in, CO = s.c_out;
  for (std::size_t t = 0; t < T; ++t) {
    double* orow = out + t * CO;
    for (std::size_t o = 0; o < CO; ++o) orow[o] = b[o];
    for (std::size_t j = 0; j < K; ++j) {
      const double* xrow = x + (t + j) * CI;
      for (std::size_t i = 0; i < CI; ++i) {
        const double xv = xrow[i];
        const double* wrow = w + (j * CI + i) * CO;
        for (std::size_t o = 0; o < CO; ++o) orow[o] += xv * wrow[o];
      }
    }
    if (relu) {
      for (std::size_t o = 0; o < CO; ++o) orow[o] = orow[o] > 0.0 ? orow[o] : 0.0;
    }
  }
}

void conv_backward_scalar(const double* x, const double* w, const double* g, double* dx,
                          double* dw, double* db, double* /*w_t*/, const ConvShape& s) {
  const std::size_t T = s.t_out(), K = s.k, CI = s.c_in, CO = s.c_out;
  for (std::size_t i = 0; i < s.t_in * CI; ++i) dx[i] = 0.0;

  for (std::size_t t = 0; t < T; ++t) {
    const double* grow = g + t * CO;
    for (std::size_t j = 0; j < K; ++j) {
      double* dxrow = dx + (t + j) * CI;
      for (std::size_t i = 0; i < CI; ++i) {
        const double* wrow = w + (j * CI + i) * CO;
        double acc = dxrow[i];
        for (std::size_t o = 0; o < CO; ++o) acc += grow[o] * wrow[o];
        dxrow[i] = acc;
      }
    }
  }

  for (std::size_t j = 0; j < K; ++j) {
    for (std::size_t i = 0; i < CI; ++i) {
      double* dwrow = dw + (j * CI + i) * CO;
      for (std::size_t t = 0; t < T; ++t) {
        const double xv = x[(t + j) * CI + i];
        const double* grow = g + t * CO;
        for (std::size_t o = 0; o < CO; ++o) dwrow[o] += xv * grow[o];
      }
    }
  }

  for (std::size_t t = 0; t < T; ++t) {
    const double* grow = g + t * CO;
    for (std::size_t o = 0; o < CO; ++o) db[o] += grow[o];
  }
}

void maxpool_forward_scalar(const double* x, std::size_t t_in, std::size_t c, std::size_t window,
                            double* out, std::int32_t* argmax) {
  const std::size_t T = t_in / window;
  for (std::size_t tw = 0; tw < T; ++tw) {
    const std::size_t base = tw * window;
    for (std::size_t ch = 0; ch < c; ++ch) {
      double best = x[base * c + ch];
      std::int32_t arg = static_cast<std::int32_t>(base);
      for (std::size_t r = 1; r < window; ++r) {
        const double v = x[(base + r) * c + ch];
        if (v > best) {  // strict: first maximal position wins
          best = v;
          arg = static_cast<std::int32_t>(base + r);
        }
      }
      out[tw * c + ch] = best;
      argmax[tw * c + ch] = arg;
    }
  }
}

void adadelta_step_scalar(double* theta, const double* g, double* eg2, double* edx2,
                          std::size_t n, double rho, double lr, double eps) {
  const double om = 1.0 - rho;
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = g[i];
    eg2[i] = rho * eg2[i] + om * (gi * gi);
    const double delta = -lr * (std::sqrt(edx2[i] + eps) / std::sqrt(eg2[i] + eps)) * gi;
    edx2[i] = rho * edx2[i] + om * (delta * delta);
    theta[i] += delta;
  }
}

}  // namespace

const Table& scalar_table() {
  static const Table t{"scalar", conv_forward_scalar, conv_backward_scalar,
                       maxpool_forward_scalar, adadelta_step_scalar};
  return t;
}

}  // namespace psc::kernels
