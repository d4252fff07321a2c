#pragma once

#include <bitset>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "flora/types.hpp"

namespace flora {

// The four conditional factors of one candidate, indexed by FieldKind.
// Skipped kinds hold exactly 1.
struct FactorScores {
  int candidate_id = 0;
  Eigen::Array4d factors = Eigen::Array4d::Ones();
  std::bitset<4> skipped;

  double operator[](FieldKind k) const { return factors(static_cast<Eigen::Index>(index_of(k))); }
  void set(FieldKind k, double p) { factors(static_cast<Eigen::Index>(index_of(k))) = p; }
  void skip(FieldKind k) {
    set(k, 1.0);
    skipped.set(index_of(k));
  }
};

struct Posterior {
  int candidate_id = 0;
  double log_score = 0.0;
  int rank = 0;  // 1 is best
};

// Row sums of log factors for an N x 4 table. The log is taken elementwise
// through std::log so equal rows always get bit-identical scores.
template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1> log_scores(
    const Eigen::ArrayBase<Derived>& table) {
  using Scalar = typename Derived::Scalar;
  return table.unaryExpr([](Scalar v) { return Scalar(std::log(v)); }).rowwise().sum();
}

using FactorTable = Eigen::Array<double, Eigen::Dynamic, 4, Eigen::RowMajor>;

// Posteriors in rank order. Ties on log_score fall back to the higher
// type factor, then the lower candidate id. Factors must lie in (0,1].
std::vector<Posterior> fuse(std::span<const FactorScores> factors);

// The first min(k, N) candidate ids by rank; k = 1 is the argmax.
std::vector<int> select(std::span<const Posterior> posteriors, int k);

}  // namespace flora
