#pragma once

// Per-candidate probability factors: object type from detection, spatial
// location from box geometry, visual patterns and relations from
// region-text scoring.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "flora/backends.hpp"
#include "flora/grammar.hpp"
#include "flora/prompting.hpp"
#include "flora/types.hpp"

namespace flora {

enum class SigmaKind { Linear, Squared, Cubic, Exponential };

std::string_view sigma_name(SigmaKind k);
std::optional<SigmaKind> sigma_from_name(std::string_view name);

inline constexpr double kDefaultEpsilon = 1e-6;

// (horizontal center, vertical center, size) of a box, all in [0,1].
template <typename Scalar>
using Geometry = Eigen::Matrix<Scalar, 3, 1>;

enum GeometryIndex : Eigen::Index { kHorizontal = 0, kVertical = 1, kSize = 2 };

template <typename Scalar>
Geometry<Scalar> geometry_of(const NormalizedBox<Scalar>& box) {
  Geometry<Scalar> g;
  g.template head<2>() = box.center();
  g(kSize) = std::sqrt(box.sizes().prod());
  return g;
}

// Monotone map [0,1] -> [0,1] with fixed endpoints, applied elementwise.
template <typename Derived>
typename Derived::PlainObject sigma(const Eigen::ArrayBase<Derived>& v, SigmaKind kind) {
  using Scalar = typename Derived::Scalar;
  if ((v < Scalar(0)).any() || (v > Scalar(1)).any())
    throw UsageError("sigma argument outside [0,1]");
  switch (kind) {
    case SigmaKind::Linear: return v;
    case SigmaKind::Squared: return v.square();
    case SigmaKind::Cubic: return v.cube();
    case SigmaKind::Exponential: {
      const Scalar e = std::exp(Scalar(1));
      return (v.unaryExpr([](Scalar x) { return std::exp(x); }) - Scalar(1)) / (e - Scalar(1));
    }
  }
  return v;
}

template <std::floating_point Scalar>
Scalar sigma(Scalar v, SigmaKind kind) {
  const Eigen::Array<Scalar, 1, 1> a = Eigen::Array<Scalar, 1, 1>::Constant(v);
  return sigma(a, kind)(0);
}

// Relevance of one canonical term for a geometry. Positive polarity scores
// sigma(L), negative sigma(1 - L); center terms score sigma(1 - 2|L - 0.5|) on
// the horizontal axis, and "middle" on the vertical axis as well.
template <typename Scalar>
Scalar axis_relevance(std::string_view term, const Geometry<Scalar>& g, SigmaKind kind,
                      const SpatialTermDict& dict) {
  const SpatialEntry& e = dict.entry(term);
  auto polar = [&](Scalar coord) {
    return e.polarity == Polarity::Positive ? sigma(coord, kind) : sigma(Scalar(1) - coord, kind);
  };
  auto centered = [&](Scalar coord) {
    Scalar tri = Scalar(1) - Scalar(2) * std::abs(coord - Scalar(0.5));
    return sigma(std::clamp(tri, Scalar(0), Scalar(1)), kind);
  };
  switch (e.axis) {
    case SpatialAxis::Horizontal: return polar(g(kHorizontal));
    case SpatialAxis::Vertical: return polar(g(kVertical));
    case SpatialAxis::Size: return polar(g(kSize));
    case SpatialAxis::Center: {
      Scalar r = centered(g(kHorizontal));
      if (term == "middle") r *= centered(g(kVertical));
      return r;
    }
  }
  return Scalar(1);
}

// Product of the per-term relevances; axes no term mentions contribute 1.
template <typename Scalar>
Scalar location_relevance(std::span<const std::string> terms, const Geometry<Scalar>& g,
                          SigmaKind kind, const SpatialTermDict& dict,
                          Scalar epsilon = Scalar(kDefaultEpsilon)) {
  if (terms.empty()) throw UsageError("location_relevance needs at least one term");
  Scalar r(1);
  for (const auto& t : terms) r *= axis_relevance(t, g, kind, dict);
  return std::max(r, epsilon);
}

// Column-wise over a 3xN geometry matrix.
template <typename Derived>
Eigen::Array<typename Derived::Scalar, Eigen::Dynamic, 1> location_relevance(
    std::span<const std::string> terms, const Eigen::MatrixBase<Derived>& geometries,
    SigmaKind kind, const SpatialTermDict& dict,
    typename Derived::Scalar epsilon = typename Derived::Scalar(kDefaultEpsilon)) {
  using Scalar = typename Derived::Scalar;
  static_assert(Derived::RowsAtCompileTime == 3 || Derived::RowsAtCompileTime == Eigen::Dynamic);
  Eigen::Array<Scalar, Eigen::Dynamic, 1> out(geometries.cols());
  for (Eigen::Index i = 0; i < geometries.cols(); ++i)
    out(i) = location_relevance<Scalar>(terms, geometries.col(i), kind, dict, epsilon);
  return out;
}

template <typename Derived>
typename Derived::PlainObject softmax(const Eigen::ArrayBase<Derived>& logits,
                                      typename Derived::Scalar temperature = 1) {
  using Scalar = typename Derived::Scalar;
  if (!(temperature > Scalar(0))) throw UsageError("softmax temperature must be positive");
  if (logits.size() == 0) return logits;
  typename Derived::PlainObject z = (logits - logits.maxCoeff()) / temperature;
  // Scalar exp: packet exp rounds differently by lane, which can split exact ties.
  z = z.unaryExpr([](Scalar x) { return std::exp(x); });
  return z / z.sum();
}

// One backend call, recorded for the answer trace.
struct TraceEntry {
  std::string stage;
  std::string request;
  nlohmann::json response;
};
using TraceLog = std::vector<TraceEntry>;

struct TypeOptions {
  int max_candidates = 10;
  double score_threshold = 0.0;
};

// Candidates from the grounding detector; p_type is the detector confidence.
std::vector<std::pair<Candidate, double>> interpret_type(const std::string& object_type,
                                                        const ImageRef& image,
                                                        DetectorBackend& detector,
                                                        const TypeOptions& options = {},
                                                        TraceLog* trace = nullptr);

struct TextFactorOptions {
  double ensemble_weight = 0.05;
  double temperature = 1.0;
  double epsilon = kDefaultEpsilon;
  int max_candidates = 10;
  // IoU a re-scored detection needs to count for a candidate.
  double match_iou = 0.5;
};

struct TextFactor {
  std::string prompt;
  std::map<int, double> p;       // candidate id -> factor in [epsilon, 1]
  std::map<int, double> raw;     // candidate id -> scorer similarity
  std::vector<int> failed;       // candidates whose scorer call failed (factor skipped)
};

// Softmax across candidates of the raw region-text similarities, blended with
// the detector's confidence on the same prompt:
//   p = (1 - w) * softmax + w * detector_score.
// Pass detector = nullptr (or w = 0) for the scorer alone.
TextFactor interpret_text_factor(const std::optional<std::string>& object_type,
                                 std::string_view component, ScoringKind kind,
                                 std::span<const Candidate> candidates, const ImageRef& image,
                                 RegionScorerBackend& scorer, DetectorBackend* detector,
                                 const TextFactorOptions& options = {},
                                 TraceLog* trace = nullptr);

}  // namespace flora
