#include <cassert>
#include <cstdlib>
#include <string_view>

#include "latcompass/kernels.hpp"

namespace latcompass::kernels {
namespace {

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(__i386__)) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Table& select() {
  if (const char* env = std::getenv("LATCOMPASS_KERNELS")) {
    if (std::string_view(env) == "scalar") return detail::kScalarTable;
  }
  if (const Table* t = table_for(Isa::Avx2)) return *t;
  if (const Table* t = table_for(Isa::Neon)) return *t;
  return detail::kScalarTable;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

const Table* table_for(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return &detail::kScalarTable;
    case Isa::Avx2: return cpu_has_avx2() ? detail::avx2_table() : nullptr;
    case Isa::Neon: return detail::neon_table();
  }
  return nullptr;
}

const Table& active() {
  static const Table& table = select();
  return table;
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return active().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

double sum_squares(std::span<const double> x) {
  return active().sum_squares(x.data(), x.size());
}

void clamp(std::span<double> x, double lo, double hi) {
  active().clamp(x.data(), x.size(), lo, hi);
}

}  // namespace latcompass::kernels
