#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace claimforge {

enum class TemplateId {
  kTraceGen,
  kSilverDecompose,
  kAnswerability,
  kAnswerCorrectness,
  kAtomicityChecklist,
  kCoverageVerdict,
};

std::string_view to_string(TemplateId id);

// Throws ConfigError for an unknown name.
TemplateId template_from_name(std::string_view name);

// Template text with {{slot}} markers.
std::string_view template_body(TemplateId id);

// Slot names in order of first appearance.
std::vector<std::string> template_slots(TemplateId id);

using SlotMap = std::map<std::string, std::string, std::less<>>;

// Substitutes every {{slot}}. Throws ConfigError naming the first missing
// slot. Slot values are inserted literally; markers inside values are not
// expanded.
std::string render_prompt(TemplateId id, const SlotMap& slots);
std::string render_prompt(std::string_view template_name, const SlotMap& slots);

}  // namespace claimforge
