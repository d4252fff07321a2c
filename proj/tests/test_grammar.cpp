#include <fstream>
#include <random>

#include <gtest/gtest.h>
#include <json.hpp>

#include "flora/grammar.hpp"
#include "flora/json_io.hpp"

namespace flora {
namespace {

using nlohmann::json;

const SpatialTermDict& dict() { return SpatialTermDict::builtin(); }

ParsedSemantics parse4(const std::string& t, const std::string& l, const std::string& v,
                       const std::string& r) {
  return parse_structured({t, l, v, r}, dict());
}

TEST(SplitHashtag, DropsPreambleAndEmptySegments) {
  EXPECT_EQ(split_hashtag("noise #a # b ##c"), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(split_hashtag("no tags here").empty());
  EXPECT_TRUE(split_hashtag("").empty());
}

TEST(FilterSegment, WorkedExample) {
  EXPECT_EQ(filter_segment("Car", FieldKind::ObjectType, dict()), "car");
  EXPECT_EQ(filter_segment("left", FieldKind::SpatialLocation, dict()), "left");
  EXPECT_EQ(filter_segment("None", FieldKind::ObjectRelation, dict()), std::nullopt);
}

TEST(FilterSegment, VerboseTailTruncated) {
  EXPECT_EQ(filter_segment("Car. It is a vehicle commonly seen on roads.", FieldKind::ObjectType, dict()),
            "car");
}

TEST(FilterSegment, SpatialMustResolve) {
  EXPECT_EQ(filter_segment("somewhere over there", FieldKind::SpatialLocation, dict()), std::nullopt);
  EXPECT_EQ(filter_segment("top-left corner", FieldKind::SpatialLocation, dict()), "top left");
}

TEST(FilterSegment, WordCapIsConfigurable) {
  FilterOptions tight{2};
  EXPECT_EQ(filter_segment("red shirt", FieldKind::VisualPattern, dict(), tight), "red shirt");
  EXPECT_EQ(filter_segment("bright red shirt", FieldKind::VisualPattern, dict(), tight), std::nullopt);
  EXPECT_EQ(filter_segment("next to the red car", FieldKind::ObjectRelation, dict(), tight),
            "next to the red car");
}

TEST(SpatialTermDict, BuiltinTerms) {
  for (const char* t : {"left", "right", "top", "bottom", "center", "middle", "close", "near", "far"})
    EXPECT_TRUE(dict().is_canonical(t)) << t;
  EXPECT_EQ(dict().entry("left").axis, SpatialAxis::Horizontal);
  EXPECT_EQ(dict().entry("left").polarity, Polarity::Negative);
  EXPECT_EQ(dict().entry("far").polarity, Polarity::Negative);
  EXPECT_EQ(dict().entry("bottom").polarity, Polarity::Positive);
  EXPECT_THROW(dict().entry("diagonal"), UsageError);
}

TEST(SpatialTermDict, FileSynonymsAndMultiWordSurfaces) {
  auto d = SpatialTermDict::parse("# extra forms\nport side = left\nstarboard=right\n\n");
  EXPECT_EQ(d.resolve("Port Side"), "left");
  EXPECT_EQ(resolve_spatial_terms("on the port side, toward starboard", d),
            (std::vector<std::string>{"left", "right"}));
  EXPECT_EQ(d.max_surface_words(), 2u);
  EXPECT_THROW(SpatialTermDict::parse("aft = behind"), UsageError);
  EXPECT_THROW(SpatialTermDict::parse("no equals sign"), UsageError);
}

TEST(ParseStructured, CorpusConformance) {
  std::ifstream in(std::string(FLORA_TEST_DATA) + "/parse_corpus.json");
  ASSERT_TRUE(in);
  const json corpus = json::parse(in);
  ASSERT_EQ(corpus.size(), 50u);
  for (const auto& entry : corpus) {
    const auto& r = entry.at("responses");
    auto parsed = parse4(r[0], r[1], r[2], r[3]);
    EXPECT_EQ(to_json(parsed), entry.at("expected")) << entry.at("name");
  }
}

TEST(ParseStructured, AbsentFieldsStayAbsent) {
  auto p = parse4("#None", "#None", "#None", "#None");
  for (FieldKind k : kAllFieldKinds) EXPECT_FALSE(p.has(k));
}

// ---------------------------------------------------------------------------
// Properties

std::string random_text(std::mt19937& rng, std::size_t max_len) {
  static const std::string alphabet =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 #.,'\"`-\n\r\t!?";
  std::uniform_int_distribution<std::size_t> len(0, max_len), pick(0, alphabet.size() - 1);
  std::string s(len(rng), ' ');
  for (auto& c : s) c = alphabet[pick(rng)];
  return s;
}

TEST(ParseStructuredProperty, ArbitraryTextNeverThrowsAndYieldsCleanFields) {
  std::mt19937 rng(1234);
  for (int i = 0; i < 2000; ++i) {
    StructuredDescription s{random_text(rng, 40), random_text(rng, 40), random_text(rng, 40),
                            random_text(rng, 40)};
    ParsedSemantics p;
    ASSERT_NO_THROW(p = parse_structured(s, dict()));
    for (FieldKind k : {FieldKind::ObjectType, FieldKind::VisualPattern, FieldKind::ObjectRelation}) {
      if (!p.text(k)) continue;
      const auto& v = *p.text(k);
      EXPECT_FALSE(v.empty());
      EXPECT_EQ(v.find_first_of("#.,\n\r"), std::string::npos) << v;
      EXPECT_EQ(v, [&] { std::string l = v; for (auto& c : l) c = static_cast<char>(std::tolower(c)); return l; }());
    }
    if (p.o_location)
      for (const auto& t : *p.o_location) EXPECT_TRUE(dict().is_canonical(t)) << t;
  }
}

TEST(ParseStructuredProperty, SerializeRoundTrips) {
  const std::vector<std::string> words{"car", "red", "striped", "dog", "next", "to", "the", "tree", "big"};
  const std::vector<std::string> terms{"left", "right", "top", "bottom", "center", "middle", "close", "near", "far"};
  std::mt19937 rng(99);
  auto phrase = [&](std::size_t max_words) -> std::optional<std::string> {
    std::size_t n = rng() % (max_words + 1);
    if (n == 0) return std::nullopt;
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + words[rng() % words.size()];
    return s;
  };
  for (int i = 0; i < 1000; ++i) {
    ParsedSemantics p;
    p.o_type = phrase(3);
    p.o_visual = phrase(4);
    p.o_relation = phrase(6);
    std::vector<std::string> loc;
    for (std::size_t n = rng() % 3; n > 0; --n) {
      const auto& t = terms[rng() % terms.size()];
      if (std::find(loc.begin(), loc.end(), t) == loc.end()) loc.push_back(t);
    }
    if (!loc.empty()) p.o_location = loc;
    EXPECT_EQ(parse_structured(serialize(p), dict()), p);
  }
}

TEST(ParseStructuredProperty, TrailingExplanationNeverChangesTheAnswer) {
  const std::vector<std::string> answers{"car", "left", "black shirt", "holding a bag"};
  const std::vector<std::string> tails{". It is visible.", ", obviously", "\nbecause it is", ".."};
  for (const auto& a : answers)
    for (const auto& t : tails)
      EXPECT_EQ(parse4("#" + a + t, "#" + a + t, "#" + a + t, "#" + a + t), parse4("#" + a, "#" + a, "#" + a, "#" + a));
}

}  // namespace
}  // namespace flora
