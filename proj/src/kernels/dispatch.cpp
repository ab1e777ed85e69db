#include <cstdlib>
#include <string>

#include "psc/errors.hpp"
#include "psc/kernels.hpp"

namespace psc::kernels {

const Table& scalar_table();
#if defined(__x86_64__) || defined(__i386__)
const Table& avx2_table();
#endif
#if defined(__aarch64__)
const Table& neon_table();
#endif

const char* to_string(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "?";
}

std::optional<Isa> parse_isa(std::string_view name) noexcept {
  if (name == "scalar") return Isa::Scalar;
  if (name == "avx2") return Isa::Avx2;
  if (name == "neon") return Isa::Neon;
  return std::nullopt;
}

bool isa_supported(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(__i386__)
      return __builtin_cpu_supports("avx2") != 0;
#else
      return false;
#endif
    case Isa::Neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

std::vector<Isa> supported_isas() {
  std::vector<Isa> out{Isa::Scalar};
  if (isa_supported(Isa::Avx2)) out.push_back(Isa::Avx2);
  if (isa_supported(Isa::Neon)) out.push_back(Isa::Neon);
  return out;
}

Isa best_isa() noexcept {
  if (isa_supported(Isa::Avx2)) return Isa::Avx2;
  if (isa_supported(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

const Table& table(Isa isa) {
  if (!isa_supported(isa))
    raise(ErrorKind::BadConfig, std::string("kernel ISA '") + to_string(isa) +
                                    "' not supported on this CPU/build");
  switch (isa) {
    case Isa::Scalar:
      return scalar_table();
#if defined(__x86_64__) || defined(__i386__)
    case Isa::Avx2:
      return avx2_table();
#endif
#if defined(__aarch64__)
    case Isa::Neon:
      return neon_table();
#endif
    default:
      return scalar_table();
  }
}

namespace {

Isa initial_isa() {
  if (const char* env = std::getenv("PSC_KERNELS")) {
    if (auto isa = parse_isa(env); isa && isa_supported(*isa)) return *isa;
  }
  return best_isa();
}

const Table*& active_slot() {
  static const Table* slot = &table(initial_isa());
  return slot;
}

}  // namespace

const Table& active() { return *active_slot(); }

void set_active(Isa isa) { active_slot() = &table(isa); }

}  // namespace psc::kernels
