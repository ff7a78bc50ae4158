#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "dsol/errors.hpp"

namespace dsol {

using cplx = std::complex<double>;

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 transform. forward: X_k = sum x_j e^{-2 pi i jk/n}; inverse includes 1/n.
class Fft {
public:
    explicit Fft(std::size_t n) : n_(n) {
        if (!is_power_of_two(n)) throw InvalidArgument("Fft: size must be a power of two");
        rev_.resize(n);
        std::size_t bits = 0;
        while ((std::size_t{1} << bits) < n) ++bits;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < bits; ++b)
                if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
            rev_[i] = r;
        }
        tw_.resize(n / 2 > 0 ? n / 2 : 1);
        for (std::size_t k = 0; k < n / 2; ++k)
            tw_[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
    }

    std::size_t size() const { return n_; }

    void forward(cplx* a) const { transform(a, false); }
    void inverse(cplx* a) const {
        transform(a, true);
        double s = 1.0 / static_cast<double>(n_);
        for (std::size_t i = 0; i < n_; ++i) a[i] *= s;
    }
    void forward(std::vector<cplx>& a) const { forward(a.data()); }
    void inverse(std::vector<cplx>& a) const { inverse(a.data()); }

    // wavenumbers matching the output ordering, for sample spacing dx
    std::vector<double> wavenumbers(double dx) const {
        std::vector<double> k(n_);
        double dk = 2.0 * std::numbers::pi / (static_cast<double>(n_) * dx);
        for (std::size_t j = 0; j < n_; ++j) {
            auto jj = static_cast<double>(j);
            k[j] = (j < n_ / 2 ? jj : jj - static_cast<double>(n_)) * dk;
        }
        return k;
    }

private:
    void transform(cplx* a, bool inv) const {
        for (std::size_t i = 0; i < n_; ++i)
            if (i < rev_[i]) std::swap(a[i], a[rev_[i]]);
        for (std::size_t len = 2; len <= n_; len <<= 1) {
            std::size_t half = len / 2, stride = n_ / len;
            for (std::size_t s = 0; s < n_; s += len) {
                for (std::size_t j = 0; j < half; ++j) {
                    cplx w = tw_[j * stride];
                    if (inv) w = std::conj(w);
                    cplx u = a[s + j], v = a[s + j + half] * w;
                    a[s + j] = u + v;
                    a[s + j + half] = u - v;
                }
            }
        }
    }

    std::size_t n_;
    std::vector<std::size_t> rev_;
    std::vector<cplx> tw_;
};

}  // namespace dsol
