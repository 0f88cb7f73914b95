#pragma once

// Random traces carrying scripted-judge markers, with optional structural
// damage, for reward property tests.

#include <string>

#include "claimforge/trace.hpp"
#include "synth.hpp"

namespace claimforge::testing {

inline std::string random_marked_question(Rng& rng) {
  std::string q = "What does the evidence say about the " + rng.pick(filler_words());
  if (rng.chance(0.2)) q += " and the " + rng.pick(filler_words());
  if (rng.chance(0.3)) q += " [atom:" + std::to_string(rng.below(6)) + "]";
  if (rng.chance(0.1)) q += " [unanswerable]";
  if (rng.chance(0.03)) q += " [garble-ans]";
  if (rng.chance(0.03)) q += " [garble-atom]";
  // Occasional exact repeats exercise the diversity penalty.
  if (rng.chance(0.15)) return "Is the claim true?";
  return q + "?";
}

inline std::string random_marked_answer(Rng& rng) {
  if (rng.chance(0.15)) return "I don't know.";
  std::string a = filler_sentence(rng, 4 + rng.below(6));
  const double u = rng.uniform();
  if (u < 0.3) a += " [refutes]";
  else if (u < 0.6) a += " [supports]";
  else if (u < 0.65) a += " [confuse]";
  else if (u < 0.68) a += " [garble-cov]";
  if (rng.chance(0.15)) a += " [wrong]";
  if (rng.chance(0.03)) a += " [garble-corr]";
  return a;
}

inline Trace random_marked_trace(Rng& rng, std::size_t max_cycles = 6) {
  Trace t;
  t.initial_think = filler_sentence(rng, 8);
  const std::size_t n = 1 + rng.below(max_cycles);
  for (std::size_t i = 0; i < n; ++i) {
    Cycle c{random_marked_question(rng), random_marked_answer(rng), std::nullopt};
    if (rng.chance(0.5)) c.post_think = filler_sentence(rng, 5);
    t.cycles.push_back(std::move(c));
  }
  t.verdict = rng.chance(0.5) ? Label::kSupported : Label::kRefuted;
  return t;
}

// Rendered trace, damaged with probability `damage`.
inline std::string random_trace_text(Rng& rng, double damage = 0.3) {
  std::string text = render_trace(random_marked_trace(rng));
  if (!rng.chance(damage)) return text;
  switch (rng.below(6)) {
    case 0: return text + "\nExtra commentary.";
    case 1: return text.substr(0, text.find("<verification>"));
    case 2: return text.substr(text.find("</think>") + 8);
    case 3: return text.substr(0, text.size() / 2);
    case 4: {
      const auto p = text.find("<answer>");
      return text.substr(0, p) + "<question>\nStray?\n</question>\n" + text.substr(p);
    }
    default: return "";
  }
}

}  // namespace claimforge::testing
