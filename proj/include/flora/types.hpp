#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Geometry>

namespace flora {

// Boxes live in normalized image coordinates, origin top-left, x to the
// right and y downwards. min() is (x_min, y_min), max() is (x_max, y_max).
template <typename Scalar>
using NormalizedBox = Eigen::AlignedBox<Scalar, 2>;

using Box = NormalizedBox<double>;

template <typename Scalar>
NormalizedBox<Scalar> make_box(Scalar x_min, Scalar y_min, Scalar x_max, Scalar y_max) {
  using Vec = Eigen::Matrix<Scalar, 2, 1>;
  return NormalizedBox<Scalar>(Vec(x_min, y_min), Vec(x_max, y_max));
}

inline Box make_box(double x_min, double y_min, double x_max, double y_max) {
  return make_box<double>(x_min, y_min, x_max, y_max);
}

// 0 <= min < max <= 1 on both axes.
template <typename Scalar>
bool is_valid_box(const NormalizedBox<Scalar>& b) {
  return (b.min().array() >= Scalar(0)).all() && (b.max().array() <= Scalar(1)).all() &&
         (b.min().array() < b.max().array()).all();
}

// Intersection over union; 0 for disjoint or merely touching boxes.
template <typename Scalar>
Scalar iou(const NormalizedBox<Scalar>& a, const NormalizedBox<Scalar>& b) {
  const auto inter = a.intersection(b);
  if (inter.isEmpty()) return Scalar(0);
  const Scalar overlap = inter.sizes().prod();
  const Scalar uni = a.sizes().prod() + b.sizes().prod() - overlap;
  return uni > Scalar(0) ? overlap / uni : Scalar(0);
}

enum class FieldKind { ObjectType = 0, SpatialLocation = 1, VisualPattern = 2, ObjectRelation = 3 };

inline constexpr std::array<FieldKind, 4> kAllFieldKinds = {
    FieldKind::ObjectType, FieldKind::SpatialLocation, FieldKind::VisualPattern,
    FieldKind::ObjectRelation};

constexpr std::size_t index_of(FieldKind k) { return static_cast<std::size_t>(k); }

// Short names used in config files, JSON output and traces.
std::string_view field_name(FieldKind k);
std::optional<FieldKind> field_from_name(std::string_view name);

struct ImageRef {
  std::string uri;
  int width_px = 1;
  int height_px = 1;
};

struct Candidate {
  int id = 0;
  Box box;
  double detector_confidence = 0.0;
};

bool is_valid_candidate(const Candidate& c);

// Thrown for malformed inputs that violate a documented precondition.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace flora
