#pragma once

// Dense double-precision kernels used by the model and loss inner loops.
//
// Every kernel exists in a scalar reference form and, on x86-64, an AVX2+FMA
// form. The backend is chosen once at startup (cpuid probe, overridable with
// the URANK_KERNELS environment variable or set_backend) and the two
// implementations are equivalence-tested against each other in the unit
// suite. Reassociation and FMA contraction mean the variants agree to
// rounding error, not bit-exactly; anything that must be byte-reproducible
// is reproducible per backend.

#include <cstddef>
#include <string>

#if defined(__x86_64__) || defined(_M_X64)
#define URANK_X86_64 1
#else
#define URANK_X86_64 0
#endif

namespace urank::kernels {

enum class Backend { scalar, avx2 };

bool backend_available(Backend b);
Backend active_backend();
// Throws std::invalid_argument if the backend is not available on this host.
void set_backend(Backend b);
std::string backend_name(Backend b);

// sum_i x[i] * y[i]
double dot(const double* x, const double* y, std::size_t n);
// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, std::size_t n);
// x[i] *= a
void scale(double a, double* x, std::size_t n);
// sum_i x[i]
double sum(const double* x, std::size_t n);

namespace scalar {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void scale(double a, double* x, std::size_t n);
double sum(const double* x, std::size_t n);
}  // namespace scalar

#if URANK_X86_64
namespace avx2 {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void scale(double a, double* x, std::size_t n);
double sum(const double* x, std::size_t n);
}  // namespace avx2
#endif

}  // namespace urank::kernels
