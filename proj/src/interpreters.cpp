#include "flora/interpreters.hpp"

#include <iostream>

namespace flora {

std::string_view sigma_name(SigmaKind k) {
  switch (k) {
    case SigmaKind::Linear: return "linear";
    case SigmaKind::Squared: return "squared";
    case SigmaKind::Cubic: return "cubic";
    case SigmaKind::Exponential: return "exponential";
  }
  return "squared";
}

std::optional<SigmaKind> sigma_from_name(std::string_view name) {
  for (auto k : {SigmaKind::Linear, SigmaKind::Squared, SigmaKind::Cubic, SigmaKind::Exponential})
    if (sigma_name(k) == name) return k;
  return std::nullopt;
}

namespace {

nlohmann::json candidates_json(std::span<const Candidate> cs) {
  auto arr = nlohmann::json::array();
  for (const auto& c : cs)
    arr.push_back({{"id", c.id},
                   {"box", {c.box.min().x(), c.box.min().y(), c.box.max().x(), c.box.max().y()}},
                   {"score", c.detector_confidence}});
  return arr;
}

}  // namespace

std::vector<std::pair<Candidate, double>> interpret_type(const std::string& object_type,
                                                        const ImageRef& image,
                                                        DetectorBackend& detector,
                                                        const TypeOptions& options,
                                                        TraceLog* trace) {
  auto detections = detector.detect(image, object_type, options.max_candidates);
  if (trace) trace->push_back({"detect.type", object_type, candidates_json(detections)});

  std::vector<std::pair<Candidate, double>> out;
  for (auto& c : detections)
    if (c.detector_confidence >= options.score_threshold) out.emplace_back(c, c.detector_confidence);
  return out;
}

TextFactor interpret_text_factor(const std::optional<std::string>& object_type,
                                 std::string_view component, ScoringKind kind,
                                 std::span<const Candidate> candidates, const ImageRef& image,
                                 RegionScorerBackend& scorer, DetectorBackend* detector,
                                 const TextFactorOptions& options, TraceLog* trace) {
  if (candidates.empty()) throw UsageError("interpret_text_factor needs candidates");
  if (options.ensemble_weight < 0.0 || options.ensemble_weight > 1.0)
    throw UsageError("ensemble weight must lie in [0,1]");

  TextFactor out;
  out.prompt = compose_scoring_prompt(object_type, component, kind);
  const std::string stage = kind == ScoringKind::Visual ? "visual" : "relation";

  std::vector<const Candidate*> scored;
  std::vector<double> raw;
  std::optional<BackendError> last_error;
  for (const auto& c : candidates) {
    try {
      double s = scorer.score_region(image, c.box, out.prompt);
      if (trace)
        trace->push_back({"score." + stage, out.prompt,
                          {{"candidate", c.id}, {"similarity", s}}});
      scored.push_back(&c);
      raw.push_back(s);
      out.raw[c.id] = s;
    } catch (const BackendError& e) {
      std::clog << "warning: " << stage << " scorer failed for candidate " << c.id << ": "
                << e.what() << " (factor skipped)\n";
      if (trace)
        trace->push_back({"score." + stage, out.prompt, {{"candidate", c.id}, {"error", e.what()}}});
      out.failed.push_back(c.id);
      last_error = e;
    }
  }
  if (scored.empty()) throw *last_error;

  const Eigen::ArrayXd logits = Eigen::Map<const Eigen::ArrayXd>(raw.data(), static_cast<Eigen::Index>(raw.size()));
  Eigen::ArrayXd p = softmax(logits, options.temperature);

  const double w = options.ensemble_weight;
  if (detector && w > 0.0) {
    auto dets = detector->detect(image, out.prompt, options.max_candidates);
    if (trace) trace->push_back({"detect." + stage, out.prompt, candidates_json(dets)});
    Eigen::ArrayXd det_score = Eigen::ArrayXd::Zero(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i)
      for (const auto& d : dets)
        if (iou(d.box, scored[static_cast<std::size_t>(i)]->box) >= options.match_iou)
          det_score(i) = std::max(det_score(i), d.detector_confidence);
    p = (1.0 - w) * p + w * det_score;
  }
  p = p.max(options.epsilon).min(1.0);

  for (std::size_t i = 0; i < scored.size(); ++i) out.p[scored[i]->id] = p(static_cast<Eigen::Index>(i));
  return out;
}

}  // namespace flora
