#include "mlqd/banded.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include <lapacke.h>

namespace mlqd {

BandMatrix::BandMatrix(int n, int lower, int upper)
    : n_(n), kl_(lower), ku_(upper), ldab_(2 * lower + upper + 1),
      ab_(static_cast<std::size_t>(ldab_) * n, 0.0) {
  if (n < 1 || lower < 0 || upper < 0) throw std::invalid_argument("BandMatrix: bad shape");
}

void BandMatrix::clear() { std::fill(ab_.begin(), ab_.end(), 0.0); }

// Column-major band storage: A(i, j) lives at ab[kl + ku + i - j + j * ldab].
void BandMatrix::add(int row, int col, double value) {
  if (row - col > kl_ || col - row > ku_) throw std::out_of_range("BandMatrix: outside band");
  ab_[static_cast<std::size_t>(kl_ + ku_ + row - col) + static_cast<std::size_t>(col) * ldab_] += value;
}

double BandMatrix::get(int row, int col) const {
  if (row - col > kl_ || col - row > ku_) return 0.0;
  return ab_[static_cast<std::size_t>(kl_ + ku_ + row - col) + static_cast<std::size_t>(col) * ldab_];
}

void BandMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (int i = 0; i < n_; ++i) {
    double sum = 0.0;
    for (int j = std::max(0, i - kl_); j <= std::min(n_ - 1, i + ku_); ++j) sum += get(i, j) * x[j];
    y[i] = sum;
  }
}

void BandMatrix::solve(std::span<double> rhs) const {
  if (static_cast<int>(rhs.size()) != n_) throw std::invalid_argument("BandMatrix: rhs size");
  std::vector<double> factor = ab_;
  std::vector<lapack_int> pivots(n_);
  const lapack_int info = LAPACKE_dgbsv(LAPACK_COL_MAJOR, n_, kl_, ku_, 1, factor.data(), ldab_,
                                        pivots.data(), rhs.data(), n_);
  if (info != 0)
    throw std::runtime_error("BandMatrix: dgbsv failed with info = " + std::to_string(info));
}

}  // namespace mlqd
