#include <algorithm>

#include <gtest/gtest.h>

#include "flora/prompting.hpp"

namespace flora {
namespace {

TEST(Prompting, SystemPromptCarriesTheWorkedExample) {
  const auto s = build_system_prompt();
  EXPECT_TRUE(s.starts_with("You are an assistant that helps formulate a formal language model."));
  EXPECT_NE(s.find("'#woman' for the object type"), std::string::npos);
  EXPECT_NE(s.find("'#bottom left' for the spatial location"), std::string::npos);
  EXPECT_NE(s.find("'#sitting on the bench' for its relation"), std::string::npos);
}

TEST(Prompting, TypePromptForWorkedPhrase) {
  EXPECT_EQ(build_instance_prompt(FieldKind::ObjectType, "the black car on the left"),
            "The description of an object in an image is 'the black car on the left'. Tell me the "
            "type of the object described. The answer must start with a #.");
}

TEST(Prompting, EveryInstancePromptEndsWithTheHashInstruction) {
  auto bundle = build_prompt_bundle("a man holding a #1 sign");
  for (FieldKind k : kAllFieldKinds) {
    const auto& p = bundle[k];
    EXPECT_TRUE(p.ends_with(kAnswerInstruction)) << p;
    EXPECT_EQ(std::count(p.begin(), p.end(), '#'), 1) << p;
    EXPECT_NE(p.find("a man holding a 1 sign"), std::string::npos) << p;
  }
}

TEST(Prompting, EmptyPhraseRejected) {
  EXPECT_THROW(build_instance_prompt(FieldKind::ObjectType, ""), UsageError);
  EXPECT_THROW(build_instance_prompt(FieldKind::ObjectType, " # "), UsageError);
}

TEST(Prompting, TemplateOverrides) {
  auto t = PromptTemplates::parse(
      "// custom\n"
      "type = Phrase: {phrase}. Name the object. The answer must start with a #.\n"
      "system = Be brief.\n");
  EXPECT_EQ(build_system_prompt(t), "Be brief.");
  EXPECT_EQ(build_instance_prompt(FieldKind::ObjectType, "a dog", t),
            "Phrase: a dog. Name the object. The answer must start with a #.");
  EXPECT_EQ(t.instance(FieldKind::VisualPattern),
            PromptTemplates::builtin().instance(FieldKind::VisualPattern));
  EXPECT_THROW(PromptTemplates::parse("type = no slot. The answer must start with a #."), UsageError);
  EXPECT_THROW(PromptTemplates::parse("type = {phrase} without instruction"), UsageError);
  EXPECT_THROW(PromptTemplates::parse("color = {phrase}. The answer must start with a #."), UsageError);
}

TEST(Prompting, ScoringPromptComposition) {
  EXPECT_EQ(compose_scoring_prompt(std::string("car"), "black", ScoringKind::Visual), "a black car");
  EXPECT_EQ(compose_scoring_prompt(std::string("Car"), "Next to a  Tree", ScoringKind::Relation),
            "a car next to a tree");
  EXPECT_EQ(compose_scoring_prompt(std::nullopt, "striped", ScoringKind::Visual), "striped");
  EXPECT_THROW(compose_scoring_prompt(std::nullopt, "  ", ScoringKind::Visual), UsageError);
}

}  // namespace
}  // namespace flora
