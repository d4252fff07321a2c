#include "flora/grammar.hpp"

#include <fstream>
#include <sstream>

#include "text_util.hpp"

namespace flora {

namespace {

constexpr std::string_view kSegmentTerminators = ".,\n\r";

// Surrounding quotes LLMs like to add around a bare answer.
std::string_view strip_quotes(std::string_view s) {
  constexpr std::string_view quotes = "\"'`";
  while (!s.empty() && quotes.find(s.front()) != std::string_view::npos) s.remove_prefix(1);
  while (!s.empty() && quotes.find(s.back()) != std::string_view::npos) s.remove_suffix(1);
  return text::trim(s);
}

std::string_view cut_explanation(std::string_view s) {
  auto pos = s.find_first_of(kSegmentTerminators);
  if (pos != std::string_view::npos) s = s.substr(0, pos);
  return text::trim(s);
}

bool is_none(std::string_view s) { return text::iequals(text::trim(s), "none"); }

// Lowercase words with hyphens and punctuation treated as separators, so
// "Bottom-Left!" tokenizes to {"bottom", "left"}.
std::vector<std::string> spatial_tokens(std::string_view s) {
  std::string cleaned;
  cleaned.reserve(s.size());
  for (char c : s) {
    auto u = static_cast<unsigned char>(c);
    cleaned.push_back(std::isalnum(u) ? static_cast<char>(std::tolower(u)) : ' ');
  }
  return text::split_words(cleaned);
}

}  // namespace

std::string_view field_name(FieldKind k) {
  switch (k) {
    case FieldKind::ObjectType: return "type";
    case FieldKind::SpatialLocation: return "location";
    case FieldKind::VisualPattern: return "visual";
    case FieldKind::ObjectRelation: return "relation";
  }
  return "type";
}

std::optional<FieldKind> field_from_name(std::string_view name) {
  for (FieldKind k : kAllFieldKinds)
    if (field_name(k) == name) return k;
  return std::nullopt;
}

bool is_valid_candidate(const Candidate& c) {
  return is_valid_box(c.box) && c.detector_confidence >= 0.0 && c.detector_confidence <= 1.0;
}

const std::string& StructuredDescription::operator[](FieldKind k) const {
  switch (k) {
    case FieldKind::ObjectType: return s_type;
    case FieldKind::SpatialLocation: return s_location;
    case FieldKind::VisualPattern: return s_visual;
    case FieldKind::ObjectRelation: return s_relation;
  }
  return s_type;
}

// ---------------------------------------------------------------------------
// SpatialTermDict

SpatialTermDict::SpatialTermDict() {
  using A = SpatialAxis;
  using P = Polarity;
  entries_ = {
      {"left", {A::Horizontal, P::Negative}}, {"right", {A::Horizontal, P::Positive}},
      {"top", {A::Vertical, P::Negative}},    {"bottom", {A::Vertical, P::Positive}},
      {"center", {A::Center, P::Positive}},   {"middle", {A::Center, P::Positive}},
      {"close", {A::Size, P::Positive}},      {"near", {A::Size, P::Positive}},
      {"far", {A::Size, P::Negative}},
  };
  for (const auto& [term, _] : entries_) synonyms_.emplace(term, term);
}

const SpatialTermDict& SpatialTermDict::builtin() {
  static const SpatialTermDict dict = [] {
    SpatialTermDict d;
    const std::pair<const char*, const char*> synonyms[] = {
        {"leftmost", "left"},     {"lefthand", "left"},     {"rightmost", "right"},
        {"righthand", "right"},   {"upper", "top"},         {"topmost", "top"},
        {"above", "top"},         {"lower", "bottom"},      {"bottommost", "bottom"},
        {"below", "bottom"},      {"centre", "center"},     {"central", "center"},
        {"centered", "center"},   {"mid", "middle"},        {"closest", "close"},
        {"closer", "close"},      {"front", "close"},       {"foreground", "close"},
        {"nearest", "near"},      {"nearby", "near"},       {"behind", "far"},
        {"farthest", "far"},      {"furthest", "far"},      {"distant", "far"},
        {"background", "far"},    {"back", "far"},
    };
    for (const auto& [surface, canonical] : synonyms) d.add_synonym(surface, canonical);
    return d;
  }();
  return dict;
}

void SpatialTermDict::add_synonym(std::string surface, std::string canonical) {
  auto tokens = spatial_tokens(surface);
  if (tokens.empty()) throw UsageError("empty spatial surface form");
  if (!is_canonical(canonical))
    throw UsageError("synonym target '" + canonical + "' is not a canonical spatial term");
  max_surface_words_ = std::max(max_surface_words_, tokens.size());
  synonyms_[text::join(tokens, " ")] = std::move(canonical);
}

SpatialTermDict SpatialTermDict::parse(std::string_view content) {
  SpatialTermDict dict = builtin();
  std::istringstream in{std::string(content)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw UsageError("spatial dictionary line " + std::to_string(line_no) +
                       ": expected surface=canonical");
    dict.add_synonym(std::string(text::trim(body.substr(0, eq))),
                     text::to_lower(text::trim(body.substr(eq + 1))));
  }
  return dict;
}

SpatialTermDict SpatialTermDict::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read spatial dictionary " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

bool SpatialTermDict::is_canonical(std::string_view term) const {
  return entries_.find(term) != entries_.end();
}

const SpatialEntry& SpatialTermDict::entry(std::string_view canonical) const {
  auto it = entries_.find(canonical);
  if (it == entries_.end())
    throw UsageError("unknown spatial term '" + std::string(canonical) + "'");
  return it->second;
}

std::optional<std::string> SpatialTermDict::resolve(std::string_view surface) const {
  auto it = synonyms_.find(text::join(spatial_tokens(surface), " "));
  if (it == synonyms_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Parsing

bool ParsedSemantics::has(FieldKind k) const {
  return k == FieldKind::SpatialLocation ? o_location.has_value() : text(k).has_value();
}

const std::optional<std::string>& ParsedSemantics::text(FieldKind k) const {
  switch (k) {
    case FieldKind::ObjectType: return o_type;
    case FieldKind::VisualPattern: return o_visual;
    case FieldKind::ObjectRelation: return o_relation;
    case FieldKind::SpatialLocation: break;
  }
  throw UsageError("location is not a text component");
}

std::vector<std::string> split_hashtag(std::string_view raw) {
  std::vector<std::string> segments;
  auto pos = raw.find('#');
  while (pos != std::string_view::npos) {
    auto next = raw.find('#', pos + 1);
    auto piece = text::trim(raw.substr(pos + 1, next == std::string_view::npos ? next : next - pos - 1));
    if (!piece.empty()) segments.emplace_back(piece);
    pos = next;
  }
  return segments;
}

std::vector<std::string> resolve_spatial_terms(std::string_view segment,
                                               const SpatialTermDict& dict) {
  auto tokens = spatial_tokens(segment);
  std::vector<std::string> terms;
  std::size_t i = 0;
  while (i < tokens.size()) {
    // Greedy longest match so multi-word surface forms win over their parts.
    std::size_t matched = 0;
    for (std::size_t n = std::min(dict.max_surface_words(), tokens.size() - i); n >= 1; --n) {
      std::vector<std::string> window(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
      if (auto canonical = dict.resolve(text::join(window, " "))) {
        if (std::find(terms.begin(), terms.end(), *canonical) == terms.end())
          terms.push_back(*canonical);
        matched = n;
        break;
      }
    }
    i += matched ? matched : 1;
  }
  return terms;
}

std::optional<std::string> filter_segment(std::string_view segment, FieldKind kind,
                                          const SpatialTermDict& dict,
                                          const FilterOptions& options) {
  if (segment.find('#') != std::string_view::npos) return std::nullopt;
  if (is_none(segment)) return std::nullopt;

  auto body = strip_quotes(cut_explanation(text::trim(segment)));
  if (body.empty() || is_none(body)) return std::nullopt;

  if (kind == FieldKind::SpatialLocation) {
    auto terms = resolve_spatial_terms(body, dict);
    if (terms.empty()) return std::nullopt;
    return text::join(terms, " ");
  }

  auto words = text::split_words(text::to_lower(body));
  if (words.empty()) return std::nullopt;
  if (kind != FieldKind::ObjectRelation && words.size() > options.word_cap) return std::nullopt;
  return text::join(words, " ");
}

ParsedSemantics parse_structured(const StructuredDescription& s, const SpatialTermDict& dict,
                                 const FilterOptions& options) {
  ParsedSemantics out;

  std::vector<std::string> terms;
  for (const auto& segment : split_hashtag(s.s_location)) {
    auto valid = filter_segment(segment, FieldKind::SpatialLocation, dict, options);
    if (!valid) continue;
    // Canonical terms are single words.
    for (auto& t : text::split_words(*valid))
      if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(std::move(t));
  }
  if (!terms.empty()) out.o_location = std::move(terms);

  auto first_valid = [&](const std::string& raw, FieldKind kind) -> std::optional<std::string> {
    for (const auto& segment : split_hashtag(raw))
      if (auto v = filter_segment(segment, kind, dict, options)) return v;
    return std::nullopt;
  };
  out.o_type = first_valid(s.s_type, FieldKind::ObjectType);
  out.o_visual = first_valid(s.s_visual, FieldKind::VisualPattern);
  out.o_relation = first_valid(s.s_relation, FieldKind::ObjectRelation);
  return out;
}

StructuredDescription serialize(const ParsedSemantics& o) {
  auto tag = [](const std::optional<std::string>& v) { return v ? "#" + *v : std::string(); };
  StructuredDescription s;
  s.s_type = tag(o.o_type);
  s.s_location = o.o_location ? "#" + text::join(*o.o_location, " ") : std::string();
  s.s_visual = tag(o.o_visual);
  s.s_relation = tag(o.o_relation);
  return s;
}

}  // namespace flora
