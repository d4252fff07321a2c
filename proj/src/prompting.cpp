#include "flora/prompting.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "text_util.hpp"

namespace flora {

namespace {

constexpr std::string_view kPhraseSlot = "{phrase}";

constexpr std::string_view kSystemPrompt =
    "You are an assistant that helps formulate a formal language model. This model describes a "
    "referred object based on textual descriptions and a given image. In this model, a referred "
    "object is characterized by its object type, spatial location, visual patterns, and its "
    "relationships with other objects in the scene. For example, for a description like 'a "
    "woman with a red shirt sitting on the bench bottom left,' your responses should be "
    "'#woman' for the object type, '#bottom left' for the spatial location, '#wearing a red "
    "shirt' for visual patterns, and '#sitting on the bench' for its relation with other "
    "objects.";

constexpr std::string_view kLead = "The description of an object in an image is '{phrase}'. ";

void check_template(FieldKind kind, const std::string& t) {
  auto where = std::string(field_name(kind));
  if (t.find(kPhraseSlot) == std::string::npos)
    throw UsageError("template '" + where + "' lacks the {phrase} slot");
  if (!t.ends_with(kAnswerInstruction))
    throw UsageError("template '" + where + "' must end with \"" +
                     std::string(kAnswerInstruction) + "\"");
  if (std::count(t.begin(), t.end(), '#') != 1)
    throw UsageError("template '" + where + "' must contain exactly one '#'");
}

}  // namespace

PromptTemplates::PromptTemplates() : system_(kSystemPrompt) {
  auto make = [](std::string_view question) {
    return std::string(kLead) + std::string(question) + " " + std::string(kAnswerInstruction);
  };
  instance_[index_of(FieldKind::ObjectType)] = make("Tell me the type of the object described.");
  instance_[index_of(FieldKind::SpatialLocation)] = make(
      "Tell me the spatial location of the object described. If it is not mentioned, answer None.");
  instance_[index_of(FieldKind::VisualPattern)] = make(
      "Tell me the visual patterns of the object described. If they are not mentioned, answer "
      "None.");
  instance_[index_of(FieldKind::ObjectRelation)] = make(
      "Tell me its relation to surrounding objects. If it is not mentioned, answer None.");
}

const PromptTemplates& PromptTemplates::builtin() {
  static const PromptTemplates t;
  return t;
}

PromptTemplates PromptTemplates::parse(std::string_view content) {
  PromptTemplates t = builtin();
  std::istringstream in{std::string(content)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto body = text::trim(line);
    if (body.empty() || body.starts_with("//")) continue;
    auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw UsageError("template line " + std::to_string(line_no) + ": expected field=template");
    auto key = text::trim(body.substr(0, eq));
    auto value = std::string(text::trim(body.substr(eq + 1)));
    if (key == "system") {
      t.system_ = value;
      continue;
    }
    auto kind = field_from_name(key);
    if (!kind)
      throw UsageError("template line " + std::to_string(line_no) + ": unknown field '" +
                       std::string(key) + "'");
    check_template(*kind, value);
    t.instance_[index_of(*kind)] = std::move(value);
  }
  return t;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read prompt templates " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string build_system_prompt(const PromptTemplates& templates) { return templates.system(); }

std::string build_instance_prompt(FieldKind kind, std::string_view phrase,
                                  const PromptTemplates& templates) {
  std::string clean(phrase);
  std::replace(clean.begin(), clean.end(), '#', ' ');
  clean = text::squeeze(clean);
  if (clean.empty()) throw UsageError("referring phrase must be non-empty");

  std::string out = templates.instance(kind);
  auto pos = out.find(kPhraseSlot);
  while (pos != std::string::npos) {
    out.replace(pos, kPhraseSlot.size(), clean);
    pos = out.find(kPhraseSlot, pos + clean.size());
  }
  return out;
}

PromptBundle build_prompt_bundle(std::string_view phrase, const PromptTemplates& templates) {
  PromptBundle bundle;
  bundle.system = build_system_prompt(templates);
  for (FieldKind k : kAllFieldKinds)
    bundle.instance[index_of(k)] = build_instance_prompt(k, phrase, templates);
  return bundle;
}

std::string compose_scoring_prompt(const std::optional<std::string>& object_type,
                                   std::string_view component, ScoringKind kind) {
  auto part = text::squeeze(text::to_lower(component));
  if (part.empty()) throw UsageError("scoring prompt needs a non-empty component");
  std::string type = object_type ? text::squeeze(text::to_lower(*object_type)) : std::string();
  if (type.empty()) return part;
  return kind == ScoringKind::Visual ? "a " + part + " " + type : "a " + type + " " + part;
}

}  // namespace flora
