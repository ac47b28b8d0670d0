#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace forr {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;

namespace detail {
inline int log2_exact(size_t n) {
    if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("length is not a power of two");
    return __builtin_ctzll(n);
}
}  // namespace detail

// In-place (I (x) H (x) I) v with the Hadamard on `qubit`, 1/sqrt(2) normalized.
// Qubit q corresponds to bit q of the array index.
template <class T>
void hadamard_inplace(std::vector<T>& v, int qubit, int total_qubits) {
    if (v.size() != (size_t(1) << total_qubits))
        throw std::invalid_argument("hadamard_inplace: length != 2^total_qubits");
    if (qubit < 0 || qubit >= total_qubits)
        throw std::invalid_argument("hadamard_inplace: qubit out of range");
    const double s = 1.0 / std::sqrt(2.0);
    const size_t stride = size_t(1) << qubit;
    for (size_t base = 0; base < v.size(); base += 2 * stride) {
        for (size_t i = base; i < base + stride; ++i) {
            T a = v[i], b = v[i + stride];
            v[i] = s * (a + b);
            v[i + stride] = s * (a - b);
        }
    }
}

template <class T>
void hadamard_all_inplace(std::vector<T>& v, int total_qubits) {
    for (int q = 0; q < total_qubits; ++q) hadamard_inplace(v, q, total_qubits);
}

inline double norm2(const cvec& v) {
    double s = 0;
    for (const cplx& z : v) s += std::norm(z);
    return std::sqrt(s);
}

}  // namespace forr
