#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include <cmath>

#include "psc/kernels.hpp"

// AVX2 variants. Vectorization is always across independent output elements
// (filters for conv forward/dw, input channels for dx via a transposed kernel,
// channels for pooling), never across a reduction axis, and uses mul+add
// instead of FMA; results are bit-identical with the scalar reference.

namespace psc::kernels {
namespace {

inline __m256d madd(__m256d a, __m256d b, __m256d c) {
  return _mm256_add_pd(_mm256_mul_pd(a, b), c);
}

// ---- conv forward ----------------------------------------------------------

// NV 4-wide accumulators kept in registers; CO == 4*NV.
template <int NV>
void conv_forward_block(const double* x, const double* w, const double* b, double* out,
                        const ConvShape& s, bool relu) {
  const std::size_t T = s.t_out(), K = s.k, CI = s.c_in, CO = s.c_out;
  const __m256d zero = _mm256_setzero_pd();
  for (std::size_t t = 0; t < T; ++t) {
    __m256d acc[NV];
    for (int v = 0; v < NV; ++v) acc[v] = _mm256_loadu_pd(b + 4 * v);
    for (std::size_t j = 0; j < K; ++j) {
      const double* xrow = x + (t + j) * CI;
      const double* wrow = w + j * CI * CO;
      for (std::size_t i = 0; i < CI; ++i, wrow += CO) {
        const __m256d xv = _mm256_set1_pd(xrow[i]);
        for (int v = 0; v < NV; ++v) acc[v] = madd(xv, _mm256_loadu_pd(wrow + 4 * v), acc[v]);
      }
    }
    double* orow = out + t * CO;
    for (int v = 0; v < NV; ++v)
      _mm256_storeu_pd(orow + 4 * v, relu ? _mm256_max_pd(acc[v], zero) : acc[v]);
  }
}

// Any CO: vector chunks accumulate through the output row, scalar tail.
void conv_forward_generic(const double* x, const double* w, const double* b, double* out,
                          const ConvShape& s, bool relu) {
  const std::size_t T = s.t_out(), K = s.k, CI = s.c_in, CO = s.c_out;
  const std::size_t co4 = CO & ~std::size_t(3);
  const __m256d zero = _mm256_setzero_pd();
  for (std::size_t t = 0; t < T; ++t) {
    double* orow = out + t * CO;
    for (std::size_t o = 0; o < CO; ++o) orow[o] = b[o];
    for (std::size_t j = 0; j < K; ++j) {
      const double* xrow = x + (t + j) * CI;
      const double* wrow = w + j * CI * CO;
      for (std::size_t i = 0; i < CI; ++i, wrow += CO) {
        const double xs = xrow[i];
        const __m256d xv = _mm256_set1_pd(xs);
        for (std::size_t o = 0; o < co4; o += 4)
          _mm256_storeu_pd(orow + o, madd(xv, _mm256_loadu_pd(wrow + o), _mm256_loadu_pd(orow + o)));
        for (std::size_t o = co4; o < CO; ++o) orow[o] += xs * wrow[o];
      }
    }
    if (relu) {
      for (std::size_t o = 0; o < co4; o += 4)
        _mm256_storeu_pd(orow + o, _mm256_max_pd(_mm256_loadu_pd(orow + o), zero));
      for (std::size_t o = co4; o < CO; ++o) orow[o] = orow[o] > 0.0 ? orow[o] : 0.0;
    }
  }
}

void conv_forward_avx2(const double* x, const double* w, const double* b, double* out,
                       const ConvShape& s, bool relu) {
  switch (s.c_out) {
    case 32: conv_forward_block<8>(x, w, b, out, s, relu); return;
    case 16: conv_forward_block<4>(x, w, b, out, s, relu); return;
    case 8: conv_forward_block<2>(x, w, b, out, s, relu); return;
    case 4: conv_forward_block<1>(x, w, b, out, s, relu); return;
    default: conv_forward_generic(x, w, b, out, s, relu); return;
  }
}

// ---- conv backward ---------------------------------------------------------

// dx via the kernel transposed to (k, c_out, c_in) so the vector axis (input
// channels) is contiguous.
void transpose_kernel(const double* w, double* w_t, const ConvShape& s) {
  const std::size_t K = s.k, CI = s.c_in, CO = s.c_out;
  for (std::size_t j = 0; j < K; ++j)
    for (std::size_t i = 0; i < CI; ++i)
      for (std::size_t o = 0; o < CO; ++o)
        w_t[(j * CO + o) * CI + i] = w[(j * CI + i) * CO + o];
}

template <int NV>
void conv_backward_dx_block(const double* g, const double* w_t, double* dx, const ConvShape& s) {
  const std::size_t T = s.t_out(), K = s.k, CI = s.c_in, CO = s.c_out;
  for (std::size_t t = 0; t < T; ++t) {
    const double* grow = g + t * CO;
    for (std::size_t j = 0; j < K; ++j) {
      double* dxrow = dx + (t + j) * CI;
      __m256d acc[NV];
      for (int v = 0; v < NV; ++v) acc[v] = _mm256_loadu_pd(dxrow + 4 * v);
      const double* wt = w_t + j * CO * CI;
      for (std::size_t o = 0; o < CO; ++o, wt += CI) {
        const __m256d gv = _mm256_set1_pd(grow[o]);
        for (int v = 0; v < NV; ++v) acc[v] = madd(gv, _mm256_loadu_pd(wt + 4 * v), acc[v]);
      }
      for (int v = 0; v < NV; ++v) _mm256_storeu_pd(dxrow + 4 * v, acc[v]);
    }
  }
}

void conv_backward_dx_generic(const double* g, const double* w_t, double* dx, const ConvShape& s) {
  const std::size_t T = s.t_out(), K = s.k, CI = s.c_in, CO = s.c_out;
  const std::size_t ci4 = CI & ~std::size_t(3);
  for (std::size_t t = 0; t < T; ++t) {
    const double* grow = g + t * CO;
    for (std::size_t j = 0; j < K; ++j) {
      double* dxrow = dx + (t + j) * CI;
      const double* wt = w_t + j * CO * CI;
      for (std::size_t o = 0; o < CO; ++o, wt += CI) {
        const double gs = grow[o];
        const __m256d gv = _mm256_set1_pd(gs);
        for (std::size_t i = 0; i < ci4; i += 4)
          _mm256_storeu_pd(dxrow + i, madd(gv, _mm256_loadu_pd(wt + i), _mm256_loadu_pd(dxrow + i)));
        for (std::size_t i = ci4; i < CI; ++i) dxrow[i] += gs * wt[i];
      }
    }
  }
}

template <int NV>
void conv_backward_dw_block(const double* x, const double* g, double* dw, const ConvShape& s) {
  const std::size_t T = s.t_out(), K = s.k, CI = s.c_in, CO = s.c_out;
  for (std::size_t j = 0; j < K; ++j) {
    for (std::size_t i = 0; i < CI; ++i) {
      double* dwrow = dw + (j * CI + i) * CO;
      __m256d acc[NV];
      for (int v = 0; v < NV; ++v) acc[v] = _mm256_loadu_pd(dwrow + 4 * v);
      for (std::size_t t = 0; t < T; ++t) {
        const __m256d xv = _mm256_set1_pd(x[(t + j) * CI + i]);
        const double* grow = g + t * CO;
        for (int v = 0; v < NV; ++v) acc[v] = madd(xv, _mm256_loadu_pd(grow + 4 * v), acc[v]);
      }
      for (int v = 0; v < NV; ++v) _mm256_storeu_pd(dwrow + 4 * v, acc[v]);
    }
  }
}

void conv_backward_dw_generic(const double* x, const double* g, double* dw, const ConvShape& s) {
  const std::size_t T = s.t_out(), K = s.k, CI = s.c_in, CO = s.c_out;
  const std::size_t co4 = CO & ~std::size_t(3);
  for (std::size_t j = 0; j < K; ++j) {
    for (std::size_t i = 0; i < CI; ++i) {
      double* dwrow = dw + (j * CI + i) * CO;
      for (std::size_t t = 0; t < T; ++t) {
        const double xs = x[(t + j) * CI + i];
        const __m256d xv = _mm256_set1_pd(xs);
        const double* grow = g + t * CO;
        for (std::size_t o = 0; o < co4; o += 4)
          _mm256_storeu_pd(dwrow + o, madd(xv, _mm256_loadu_pd(grow + o), _mm256_loadu_pd(dwrow + o)));
        for (std::size_t o = co4; o < CO; ++o) dwrow[o] += xs * grow[o];
      }
    }
  }
}

void conv_backward_avx2(const double* x, const double* w, const double* g, double* dx, double* dw,
                        double* db, double* w_t, const ConvShape& s) {
  const std::size_t T = s.t_out(), CI = s.c_in, CO = s.c_out;
  for (std::size_t i = 0; i < s.t_in * CI; ++i) dx[i] = 0.0;

  transpose_kernel(w, w_t, s);
  switch (CI) {
    case 32: conv_backward_dx_block<8>(g, w_t, dx, s); break;
    case 16: conv_backward_dx_block<4>(g, w_t, dx, s); break;
    case 8: conv_backward_dx_block<2>(g, w_t, dx, s); break;
    case 4: conv_backward_dx_block<1>(g, w_t, dx, s); break;
    default: conv_backward_dx_generic(g, w_t, dx, s); break;
  }

  switch (CO) {
    case 32: conv_backward_dw_block<8>(x, g, dw, s); break;
    case 16: conv_backward_dw_block<4>(x, g, dw, s); break;
    case 8: conv_backward_dw_block<2>(x, g, dw, s); break;
    case 4: conv_backward_dw_block<1>(x, g, dw, s); break;
    default: conv_backward_dw_generic(x, g, dw, s); break;
  }

  const std::size_t co4 = CO & ~std::size_t(3);
  for (std::size_t t = 0; t < T; ++t) {
    const double* grow = g + t * CO;
    for (std::size_t o = 0; o < co4; o += 4)
      _mm256_storeu_pd(db + o, _mm256_add_pd(_mm256_loadu_pd(db + o), _mm256_loadu_pd(grow + o)));
    for (std::size_t o = co4; o < CO; ++o) db[o] += grow[o];
  }
}

// ---- max pooling -----------------------------------------------------------

void maxpool_forward_avx2(const double* x, std::size_t t_in, std::size_t c, std::size_t window,
                          double* out, std::int32_t* argmax) {
  const std::size_t T = t_in / window;
  const std::size_t c4 = c & ~std::size_t(3);
  for (std::size_t tw = 0; tw < T; ++tw) {
    const std::size_t base = tw * window;
    for (std::size_t ch = 0; ch < c4; ch += 4) {
      __m256d best = _mm256_loadu_pd(x + base * c + ch);
      __m256d arg = _mm256_set1_pd(static_cast<double>(base));
      for (std::size_t r = 1; r < window; ++r) {
        const __m256d v = _mm256_loadu_pd(x + (base + r) * c + ch);
        const __m256d gt = _mm256_cmp_pd(v, best, _CMP_GT_OQ);  // strict, keeps first max
        best = _mm256_blendv_pd(best, v, gt);
        arg = _mm256_blendv_pd(arg, _mm256_set1_pd(static_cast<double>(base + r)), gt);
      }
      _mm256_storeu_pd(out + tw * c + ch, best);
      const __m128i ai = _mm256_cvttpd_epi32(arg);
      _mm_storeu_si128(reinterpret_cast<__m128i*>(argmax + tw * c + ch), ai);
    }
    for (std::size_t ch = c4; ch < c; ++ch) {
      double best = x[base * c + ch];
      std::int32_t arg = static_cast<std::int32_t>(base);
      for (std::size_t r = 1; r < window; ++r) {
        const double v = x[(base + r) * c + ch];
        if (v > best) {
          best = v;
          arg = static_cast<std::int32_t>(base + r);
        }
      }
      out[tw * c + ch] = best;
      argmax[tw * c + ch] = arg;
    }
  }
}

// ---- adadelta --------------------------------------------------------------

void adadelta_step_avx2(double* theta, const double* g, double* eg2, double* edx2, std::size_t n,
                        double rho, double lr, double eps) {
  const double om = 1.0 - rho;
  const __m256d vrho = _mm256_set1_pd(rho);
  const __m256d vom = _mm256_set1_pd(om);
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vneglr = _mm256_set1_pd(-lr);
  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    __m256d e = _mm256_loadu_pd(eg2 + i);
    e = madd(vom, _mm256_mul_pd(gv, gv), _mm256_mul_pd(vrho, e));
    _mm256_storeu_pd(eg2 + i, e);
    __m256d ed = _mm256_loadu_pd(edx2 + i);
    const __m256d ratio = _mm256_div_pd(_mm256_sqrt_pd(_mm256_add_pd(ed, veps)),
                                        _mm256_sqrt_pd(_mm256_add_pd(e, veps)));
    const __m256d delta = _mm256_mul_pd(_mm256_mul_pd(vneglr, ratio), gv);
    ed = madd(vom, _mm256_mul_pd(delta, delta), _mm256_mul_pd(vrho, ed));
    _mm256_storeu_pd(edx2 + i, ed);
    _mm256_storeu_pd(theta + i, _mm256_add_pd(_mm256_loadu_pd(theta + i), delta));
  }
  for (std::size_t i = n4; i < n; ++i) {
    const double gi = g[i];
    eg2[i] = rho * eg2[i] + om * (gi * gi);
    const double delta = -lr * (std::sqrt(edx2[i] + eps) / std::sqrt(eg2[i] + eps)) * gi;
    edx2[i] = rho * edx2[i] + om * (delta * delta);
    theta[i] += delta;
  }
}

}  // namespace

const Table& avx2_table() {
  static const Table t{"avx2", conv_forward_avx2, conv_backward_avx2, maxpool_forward_avx2,
                       adadelta_step_avx2};
  return t;
}

}  // namespace psc::kernels

#endif  // x86
