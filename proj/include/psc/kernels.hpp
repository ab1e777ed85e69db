#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace psc::kernels {

// Data-parallel inner loops behind the network engine. Every operation has a
// scalar reference implementation plus SIMD variants selected at runtime.
// All variants accumulate in the same per-element order and avoid FMA
// contraction, so their results are bit-identical; the equivalence suite
// asserts exact equality.

struct ConvShape {
  std::size_t t_in;   // input rows
  std::size_t c_in;   // input channels
  std::size_t c_out;  // output channels (filters)
  std::size_t k;      // kernel width

  std::size_t t_out() const noexcept { return t_in - k + 1; }
};

/// Valid 1D convolution over x (t_in, c_in) with kernels w (k, c_in, c_out)
/// and bias b (c_out): out[t,o] = b[o] + sum_{j,i} x[t+j,i] * w[j,i,o],
/// clamped at zero when relu is set. out has t_out() rows.
using ConvForwardFn = void (*)(const double* x, const double* w, const double* b, double* out,
                               const ConvShape& shape, bool relu);

/// Backward pass for the same convolution. g is dL/d(pre-activation output),
/// shape (t_out, c_out). dx (t_in, c_in) is overwritten; dw (k, c_in, c_out)
/// and db (c_out) are accumulated into. w_t is caller-provided scratch of
/// k * c_out * c_in doubles.
using ConvBackwardFn = void (*)(const double* x, const double* w, const double* g, double* dx,
                                double* dw, double* db, double* w_t, const ConvShape& shape);

/// Window-wise max over x (t_in, c) with stride == window; the trailing
/// remainder is dropped. argmax records the first maximal input row per
/// output element (absolute row index).
using MaxPoolForwardFn = void (*)(const double* x, std::size_t t_in, std::size_t c,
                                  std::size_t window, double* out, std::int32_t* argmax);

/// One Adadelta update over n elements:
///   eg2   <- rho*eg2 + (1-rho)*g^2
///   delta  = -lr * sqrt(edx2+eps)/sqrt(eg2+eps) * g
///   edx2  <- rho*edx2 + (1-rho)*delta^2
///   theta <- theta + delta
using AdadeltaStepFn = void (*)(double* theta, const double* g, double* eg2, double* edx2,
                                std::size_t n, double rho, double lr, double eps);

struct Table {
  const char* name;
  ConvForwardFn conv_forward;
  ConvBackwardFn conv_backward;
  MaxPoolForwardFn maxpool_forward;
  AdadeltaStepFn adadelta_step;
};

enum class Isa { Scalar, Avx2, Neon };

const char* to_string(Isa isa) noexcept;
std::optional<Isa> parse_isa(std::string_view name) noexcept;  // "scalar" | "avx2" | "neon"

/// True when the ISA is both compiled in and supported by this CPU.
bool isa_supported(Isa isa) noexcept;

/// All supported ISAs, scalar first.
std::vector<Isa> supported_isas();

/// Highest-throughput supported ISA.
Isa best_isa() noexcept;

/// Table for a specific ISA; throws BadConfig when unsupported.
const Table& table(Isa isa);

/// Process-global active table. Defaults to best_isa(), or to the ISA named
/// by the PSC_KERNELS environment variable when set. Not thread-safe against
/// concurrent set_active; select once before compute starts.
const Table& active();
void set_active(Isa isa);

}  // namespace psc::kernels
