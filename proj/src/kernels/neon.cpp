#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>

#include "psc/kernels.hpp"

// NEON (AArch64) variants, 2-wide doubles. Same vectorization axes and
// accumulation order as the scalar reference and the AVX2 variants; explicit
// mul+add (no FMLA) keeps results bit-identical across ISAs.

namespace psc::kernels {
namespace {

inline float64x2_t madd(float64x2_t a, float64x2_t b, float64x2_t c) {
  return vaddq_f64(vmulq_f64(a, b), c);
}

template <int NV>
void conv_forward_block(const double* x, const double* w, const double* b, double* out,
                        const ConvShape& s, bool relu) {
  const std::size_t T = s.t_out(), K = s.k, CI = s.c_in, CO = s.c_out;
  const float64x2_t zero = vdupq_n_f64(0.0);
  for (std::size_t t = 0; t < T; ++t) {
    float64x2_t acc[NV];
    for (int v = 0; v < NV; ++v) acc[v] = vld1q_f64(b + 2 * v);
    for (std::size_t j = 0; j < K; ++j) {
      const double* xrow = x + (t + j) * CI;
      const double* wrow = w + j * CI * CO;
      for (std::size_t i = 0; i < CI; ++i, wrow += CO) {
        const float64x2_t xv = vdupq_n_f64(xrow[i]);
        for (int v = 0; v < NV; ++v) acc[v] = madd(xv, vld1q_f64(wrow + 2 * v), acc[v]);
      }
    }
    double* orow = out + t * CO;
    for (int v = 0; v < NV; ++v) vst1q_f64(orow + 2 * v, relu ? vmaxq_f64(acc[v], zero) : acc[v]);
  }
}

void conv_forward_generic(const double* x, const double* w, const double* b, double* out,
                          const ConvShape& s, bool relu) {
  const std::size_t T = s.t_out(), K = s.k, CI = s.c_in, CO = s.c_out;
  const std::size_t co2 = CO & ~std::size_t(1);
  const float64x2_t zero = vdupq_n_f64(0.0);
  for (std::size_t t = 0; t < T; ++t) {
    double* orow = out + t * CO;
    for (std::size_t o = 0; o < CO; ++o) orow[o] = b[o];
    for (std::size_t j = 0; j < K; ++j) {
      const double* xrow = x + (t + j) * CI;
      const double* wrow = w + j * CI * CO;
      for (std::size_t i = 0; i < CI; ++i, wrow += CO) {
        const double xs = xrow[i];
        const float64x2_t xv = vdupq_n_f64(xs);
        for (std::size_t o = 0; o < co2; o += 2)
          vst1q_f64(orow + o, madd(xv, vld1q_f64(wrow + o), vld1q_f64(orow + o)));
        for (std::size_t o = co2; o < CO; ++o) orow[o] += xs * wrow[o];
      }
    }
    if (relu) {
      for (std::size_t o = 0; o < co2; o += 2) vst1q_f64(orow + o, vmaxq_f64(vld1q_f64(orow + o), zero));
      for (std::size_t o = co2; o < CO; ++o) orow[o] = orow[o] > 0.0 ? orow[o] : 0.0;
    }
  }
}

void conv_forward_neon(const double* x, const double* w, const double* b, double* out,
                       const ConvShape& s, bool relu) {
  switch (s.c_out) {
    case 32: conv_forward_block<16>(x, w, b, out, s, relu); return;
    case 16: conv_forward_block<8>(x, w, b, out, s, relu); return;
    case 8: conv_forward_block<4>(x, w, b, out, s, relu); return;
    case 4: conv_forward_block<2>(x, w, b, out, s, relu); return;
    case 2: conv_forward_block<1>(x, w, b, out, s, relu); return;
    default: conv_forward_generic(x, w, b, out, s, relu); return;
  }
}

void transpose_kernel(const double* w, double* w_t, const ConvShape& s) {
  const std::size_t K = s.k, CI = s.c_in, CO = s.c_out;
  for (std::size_t j = 0; j < K; ++j)
    for (std::size_t i = 0; i < CI; ++i)
      for (std::size_t o = 0; o < CO; ++o) w_t[(j * CO + o) * CI + i] = w[(j * CI + i) * CO + o];
}

void conv_backward_dx(const double* g, const double* w_t, double* dx, const ConvShape& s) {
  const std::size_t T = s.t_out(), K = s.k, CI = s.c_in, CO = s.c_out;
  const std::size_t ci2 = CI & ~std::size_t(1);
  for (std::size_t t = 0; t < T; ++t) {
    const double* grow = g + t * CO;
    for (std::size_t j = 0; j < K; ++j) {
      double* dxrow = dx + (t + j) * CI;
      const double* wt = w_t + j * CO * CI;
      for (std::size_t o = 0; o < CO; ++o, wt += CI) {
        const double gs = grow[o];
        const float64x2_t gv = vdupq_n_f64(gs);
        for (std::size_t i = 0; i < ci2; i += 2)
          vst1q_f64(dxrow + i, madd(gv, vld1q_f64(wt + i), vld1q_f64(dxrow + i)));
        for (std::size_t i = ci2; i < CI; ++i) dxrow[i] += gs * wt[i];
      }
    }
  }
}

void conv_backward_dw(const double* x, const double* g, double* dw, const ConvShape& s) {
  const std::size_t T = s.t_out(), K = s.k, CI = s.c_in, CO = s.c_out;
  const std::size_t co2 = CO & ~std::size_t(1);
  for (std::size_t j = 0; j < K; ++j) {
    for (std::size_t i = 0; i < CI; ++i) {
      double* dwrow = dw + (j * CI + i) * CO;
      for (std::size_t t = 0; t < T; ++t) {
        const double xs = x[(t + j) * CI + i];
        const float64x2_t xv = vdupq_n_f64(xs);
        const double* grow = g + t * CO;
        for (std::size_t o = 0; o < co2; o += 2)
          vst1q_f64(dwrow + o, madd(xv, vld1q_f64(grow + o), vld1q_f64(dwrow + o)));
        for (std::size_t o = co2; o < CO; ++o) dwrow[o] += xs * grow[o];
      }
    }
  }
}

void conv_backward_neon(const double* x, const double* w, const double* g, double* dx, double* dw,
                        double* db, double* w_t, const ConvShape& s) {
  const std::size_t T = s.t_out(), CI = s.c_in, CO = s.c_out;
  for (std::size_t i = 0; i < s.t_in * CI; ++i) dx[i] = 0.0;
  transpose_kernel(w, w_t, s);
  conv_backward_dx(g, w_t, dx, s);
  conv_backward_dw(x, g, dw, s);
  const std::size_t co2 = CO & ~std::size_t(1);
  for (std::size_t t = 0; t < T; ++t) {
    const double* grow = g + t * CO;
    for (std::size_t o = 0; o < co2; o += 2)
      vst1q_f64(db + o, vaddq_f64(vld1q_f64(db + o), vld1q_f64(grow + o)));
    for (std::size_t o = co2; o < CO; ++o) db[o] += grow[o];
  }
}

void maxpool_forward_neon(const double* x, std::size_t t_in, std::size_t c, std::size_t window,
                          double* out, std::int32_t* argmax) {
  const std::size_t T = t_in / window;
  const std::size_t c2 = c & ~std::size_t(1);
  for (std::size_t tw = 0; tw < T; ++tw) {
    const std::size_t base = tw * window;
    for (std::size_t ch = 0; ch < c2; ch += 2) {
      float64x2_t best = vld1q_f64(x + base * c + ch);
      int64x2_t arg = vdupq_n_s64(static_cast<std::int64_t>(base));
      for (std::size_t r = 1; r < window; ++r) {
        const float64x2_t v = vld1q_f64(x + (base + r) * c + ch);
        const uint64x2_t gt = vcgtq_f64(v, best);  // strict, keeps first max
        best = vbslq_f64(gt, v, best);
        arg = vbslq_s64(gt, vdupq_n_s64(static_cast<std::int64_t>(base + r)), arg);
      }
      vst1q_f64(out + tw * c + ch, best);
      const int32x2_t ai = vmovn_s64(arg);
      vst1_s32(argmax + tw * c + ch, ai);
    }
    for (std::size_t ch = c2; ch < c; ++ch) {
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

void adadelta_step_neon(double* theta, const double* g, double* eg2, double* edx2, std::size_t n,
                        double rho, double lr, double eps) {
  const double om = 1.0 - rho;
  const float64x2_t vrho = vdupq_n_f64(rho);
  const float64x2_t vom = vdupq_n_f64(om);
  const float64x2_t veps = vdupq_n_f64(eps);
  const float64x2_t vneglr = vdupq_n_f64(-lr);
  const std::size_t n2 = n & ~std::size_t(1);
  for (std::size_t i = 0; i < n2; i += 2) {
    const float64x2_t gv = vld1q_f64(g + i);
    float64x2_t e = vld1q_f64(eg2 + i);
    e = madd(vom, vmulq_f64(gv, gv), vmulq_f64(vrho, e));
    vst1q_f64(eg2 + i, e);
    float64x2_t ed = vld1q_f64(edx2 + i);
    const float64x2_t ratio = vdivq_f64(vsqrtq_f64(vaddq_f64(ed, veps)),
                                        vsqrtq_f64(vaddq_f64(e, veps)));
    const float64x2_t delta = vmulq_f64(vmulq_f64(vneglr, ratio), gv);
    ed = madd(vom, vmulq_f64(delta, delta), vmulq_f64(vrho, ed));
    vst1q_f64(edx2 + i, ed);
    vst1q_f64(theta + i, vaddq_f64(vld1q_f64(theta + i), delta));
  }
  for (std::size_t i = n2; i < n; ++i) {
    const double gi = g[i];
    eg2[i] = rho * eg2[i] + om * (gi * gi);
    const double delta = -lr * (std::sqrt(edx2[i] + eps) / std::sqrt(eg2[i] + eps)) * gi;
    edx2[i] = rho * edx2[i] + om * (delta * delta);
    theta[i] += delta;
  }
}

}  // namespace

const Table& neon_table() {
  static const Table t{"neon", conv_forward_neon, conv_backward_neon, maxpool_forward_neon,
                       adadelta_step_neon};
  return t;
}

}  // namespace psc::kernels

#endif  // __aarch64__
