#include "urank/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace urank::kernels {

namespace scalar {

double dot(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

double sum(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

}  // namespace scalar

namespace {

struct Dispatch {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scale)(double, double*, std::size_t);
  double (*sum)(const double*, std::size_t);
};

constexpr Dispatch kScalar{scalar::dot, scalar::axpy, scalar::scale, scalar::sum};

#if URANK_X86_64
constexpr Dispatch kAvx2{avx2::dot, avx2::axpy, avx2::scale, avx2::sum};
#endif

Backend g_backend = Backend::scalar;
Dispatch g_dispatch = kScalar;

void apply(Backend b) {
  g_backend = b;
#if URANK_X86_64
  g_dispatch = (b == Backend::avx2) ? kAvx2 : kScalar;
#else
  g_dispatch = kScalar;
#endif
}

Backend pick_default() {
  if (const char* env = std::getenv("URANK_KERNELS")) {
    const std::string v(env);
    if (v == "scalar") return Backend::scalar;
    if (v == "avx2" && backend_available(Backend::avx2)) return Backend::avx2;
  }
  return backend_available(Backend::avx2) ? Backend::avx2 : Backend::scalar;
}

const bool g_initialized = [] {
  apply(pick_default());
  return true;
}();

}  // namespace

bool backend_available(Backend b) {
  if (b == Backend::scalar) return true;
#if URANK_X86_64
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend active_backend() {
  (void)g_initialized;
  return g_backend;
}

void set_backend(Backend b) {
  if (!backend_available(b)) {
    throw std::invalid_argument("kernel backend not available on this host: " +
                                backend_name(b));
  }
  apply(b);
}

std::string backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

double dot(const double* x, const double* y, std::size_t n) {
  return g_dispatch.dot(x, y, n);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  g_dispatch.axpy(a, x, y, n);
}

void scale(double a, double* x, std::size_t n) { g_dispatch.scale(a, x, n); }

double sum(const double* x, std::size_t n) { return g_dispatch.sum(x, n); }

}  // namespace urank::kernels
