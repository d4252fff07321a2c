#pragma once

// Hashtag grammar for object descriptions: `#[object type]`,
// `#[spatial location]`, `#[visual pattern]`, `#[relation]`, plus the
// validity filter that turns raw LLM replies into parsed semantics.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flora/types.hpp"

namespace flora {

// Raw responses, one per instance prompt. Empty strings are allowed.
struct StructuredDescription {
  std::string s_type;
  std::string s_location;
  std::string s_visual;
  std::string s_relation;

  const std::string& operator[](FieldKind k) const;
};

enum class SpatialAxis { Horizontal, Vertical, Size, Center };
enum class Polarity { Positive, Negative };

struct SpatialEntry {
  SpatialAxis axis;
  Polarity polarity;
};

// Closed dictionary of spatial terms. Canonical terms carry an axis and a
// polarity; surface forms (synonyms, possibly multi-word) map onto them.
class SpatialTermDict {
 public:
  // Built-in dictionary: left right top bottom center middle close near far.
  static const SpatialTermDict& builtin();

  // Builtin canonical terms plus the `surface=canonical` lines of `path`.
  // Blank lines and lines starting with '#' are ignored.
  static SpatialTermDict load(const std::filesystem::path& path);
  static SpatialTermDict parse(std::string_view text);

  bool is_canonical(std::string_view term) const;
  const SpatialEntry& entry(std::string_view canonical) const;  // throws UsageError
  std::optional<std::string> resolve(std::string_view surface) const;

  const std::map<std::string, SpatialEntry, std::less<>>& entries() const { return entries_; }
  const std::map<std::string, std::string, std::less<>>& synonyms() const { return synonyms_; }
  std::size_t max_surface_words() const { return max_surface_words_; }

  void add_synonym(std::string surface, std::string canonical);

 private:
  SpatialTermDict();

  std::map<std::string, SpatialEntry, std::less<>> entries_;
  std::map<std::string, std::string, std::less<>> synonyms_;
  std::size_t max_surface_words_ = 1;
};

struct ParsedSemantics {
  std::optional<std::string> o_type;
  std::optional<std::vector<std::string>> o_location;
  std::optional<std::string> o_visual;
  std::optional<std::string> o_relation;

  bool operator==(const ParsedSemantics&) const = default;

  bool has(FieldKind k) const;
  // The text components (not location) by kind.
  const std::optional<std::string>& text(FieldKind k) const;
};

struct FilterOptions {
  // Replies longer than this many words count as excessively verbose. Relations
  // are exempt since they are legitimately phrases.
  std::size_t word_cap = 12;
};

std::vector<std::string> split_hashtag(std::string_view raw);

// Validates one segment. For SpatialLocation the result is the space-joined
// list of canonical terms found in the segment.
std::optional<std::string> filter_segment(std::string_view segment, FieldKind kind,
                                          const SpatialTermDict& dict,
                                          const FilterOptions& options = {});

// Canonical spatial terms in a segment, in order of appearance, without repeats.
std::vector<std::string> resolve_spatial_terms(std::string_view segment,
                                               const SpatialTermDict& dict);

ParsedSemantics parse_structured(const StructuredDescription& s, const SpatialTermDict& dict,
                                 const FilterOptions& options = {});

// "#"-prefixed re-serialization of a parsed description; absent fields
// become empty responses.
StructuredDescription serialize(const ParsedSemantics& o);

}  // namespace flora
