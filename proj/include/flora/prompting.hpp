#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "flora/types.hpp"

namespace flora {

enum class ScoringKind { Visual, Relation };

// Instance templates per field. `{phrase}` is replaced by the referring
// phrase; every template must end with the "#" answer instruction.
class PromptTemplates {
 public:
  static const PromptTemplates& builtin();

  // Overrides from `field=template` lines (field is type, location, visual,
  // relation or system). Unlisted fields keep the builtin template.
  static PromptTemplates parse(std::string_view text);
  static PromptTemplates load(const std::filesystem::path& path);

  const std::string& system() const { return system_; }
  const std::string& instance(FieldKind k) const { return instance_[index_of(k)]; }

 private:
  PromptTemplates();

  std::string system_;
  std::array<std::string, 4> instance_;
};

struct PromptBundle {
  std::string system;
  std::array<std::string, 4> instance;

  const std::string& operator[](FieldKind k) const { return instance[index_of(k)]; }
};

inline constexpr std::string_view kAnswerInstruction = "The answer must start with a #.";

std::string build_system_prompt(const PromptTemplates& templates = PromptTemplates::builtin());

// Throws UsageError on an empty phrase. '#' characters in the phrase are
// dropped so the answer instruction stays the only hashtag.
std::string build_instance_prompt(FieldKind kind, std::string_view phrase,
                                  const PromptTemplates& templates = PromptTemplates::builtin());

PromptBundle build_prompt_bundle(std::string_view phrase,
                                 const PromptTemplates& templates = PromptTemplates::builtin());

// Region-text prompt: "a {component} {type}" for visual patterns,
// "a {type} {component}" for relations, or just the component without a type.
std::string compose_scoring_prompt(const std::optional<std::string>& object_type,
                                   std::string_view component, ScoringKind kind);

}  // namespace flora
