#include "flora/fusion.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace flora {

std::vector<Posterior> fuse(std::span<const FactorScores> factors) {
  const auto n = static_cast<Eigen::Index>(factors.size());
  FactorTable table(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& f = factors[static_cast<std::size_t>(i)];
    if (!(f.factors > 0.0).all() || !(f.factors <= 1.0).all())
      throw UsageError("factor of candidate " + std::to_string(f.candidate_id) +
                       " outside (0,1]");
    for (std::size_t k = 0; k < 4; ++k)
      if (f.skipped.test(k) && f.factors(static_cast<Eigen::Index>(k)) != 1.0)
        throw UsageError("skipped factor of candidate " + std::to_string(f.candidate_id) +
                         " must be 1");
    table.row(i) = f.factors.transpose();
  }
  const Eigen::ArrayXd scores = log_scores(table);

  std::vector<std::size_t> order(factors.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  constexpr auto type_col = static_cast<Eigen::Index>(index_of(FieldKind::ObjectType));
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ia = static_cast<Eigen::Index>(a);
    const auto ib = static_cast<Eigen::Index>(b);
    if (scores(ia) != scores(ib)) return scores(ia) > scores(ib);
    if (table(ia, type_col) != table(ib, type_col)) return table(ia, type_col) > table(ib, type_col);
    return factors[a].candidate_id < factors[b].candidate_id;
  });

  std::vector<Posterior> out;
  out.reserve(order.size());
  for (std::size_t r = 0; r < order.size(); ++r)
    out.push_back({factors[order[r]].candidate_id, scores(static_cast<Eigen::Index>(order[r])),
                   static_cast<int>(r) + 1});
  return out;
}

std::vector<int> select(std::span<const Posterior> posteriors, int k) {
  if (k < 1) throw UsageError("select needs k >= 1");
  std::vector<Posterior> ranked(posteriors.begin(), posteriors.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.rank < b.rank; });
  std::vector<int> ids;
  for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(k); ++i)
    ids.push_back(ranked[i].candidate_id);
  return ids;
}

}  // namespace flora
