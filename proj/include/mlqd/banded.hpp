#pragma once

#include <span>
#include <vector>

namespace mlqd {

/// Square band matrix in LAPACK general-band storage, solved with dgbsv.
class BandMatrix {
 public:
  BandMatrix(int n, int lower, int upper);

  int size() const { return n_; }
  void clear();
  /// A(row, col) += value; |row - col| must lie within the band.
  void add(int row, int col, double value);
  double get(int row, int col) const;

  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const;

  /// Solves A x = rhs in place (rhs becomes x). The matrix itself is left
  /// intact. Throws std::runtime_error if the matrix is singular.
  void solve(std::span<double> rhs) const;

 private:
  int n_;
  int kl_;
  int ku_;
  int ldab_;
  std::vector<double> ab_;
};

}  // namespace mlqd
