#include "claimforge/rewards.hpp"

#include <algorithm>
#include <cmath>

#include "claimforge/error.hpp"
#include "claimforge/hash.hpp"
#include "claimforge/parallel.hpp"
#include "claimforge/prompts.hpp"

namespace claimforge {

using nlohmann::json;

double RewardBreakdown::component_sum() const {
  return fmt + ver + qc + div + cov + nec + joint;
}

json to_json(const RewardBreakdown& b, std::string_view id) {
  json j{{"id", id},
         {"fmt", b.fmt},
         {"ver", b.ver},
         {"qc", b.qc},
         {"div", b.div},
         {"cov", b.cov},
         {"nec", b.nec},
         {"nec_per_question", b.nec_per_question},
         {"joint", b.joint},
         {"joint_per_question", b.joint_per_question},
         {"total", b.total},
         {"mode", b.mode.is_labeled() ? "labeled" : "unlabeled"},
         {"flags", b.flags}};
  if (!b.mode.is_labeled()) {
    j["pseudo_label"] = b.mode.label ? json(to_string(*b.mode.label)) : json(nullptr);
  }
  return j;
}

// ---- deterministic components ----------------------------------------------

double format_reward(const ParseReport& report) {
  return static_cast<double>(report.satisfied()) / static_cast<double>(kFormatConditionCount);
}

double verification_reward(std::optional<Label> verdict, Label gold) {
  return verdict && *verdict == gold ? 1.0 : 0.0;
}

double question_count_reward(int n, int n_star) {
  if (n_star < 1) throw InputError("silver question count must be at least 1");
  if (n < 0) throw InputError("question count must be non-negative");
  const double r = static_cast<double>(n) / static_cast<double>(n_star);
  return std::max(0.0, 1.0 - std::abs(r - 1.0));
}

double diversity_from_embeddings(const std::vector<Embedding>& q) {
  const std::size_t n = q.size();
  if (n < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    double best = 0.0;
    for (std::size_t j = 0; j < i; ++j) best = std::max(best, cosine(q[i], q[j]));
    sum += best;
  }
  // sum == 0 would otherwise yield -0.0.
  return sum == 0.0 ? 0.0 : -sum / static_cast<double>(n);
}

double diversity_reward(const std::vector<std::string>& questions, Embedder& embedder) {
  if (questions.size() < 2) return 0.0;
  return diversity_from_embeddings(embedder.embed(questions));
}

// ---- judge components --------------------------------------------------------

std::string render_answers(const std::vector<std::string>& answers) {
  std::string out;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    if (i) out += '\n';
    out += std::to_string(i + 1) + ". " + answers[i];
  }
  return out;
}

bool VerdictOutcome::matches(Label reference) const {
  if (!verdict) return false;
  return (*verdict == ThreeWayVerdict::kSupported && reference == Label::kSupported) ||
         (*verdict == ThreeWayVerdict::kRefuted && reference == Label::kRefuted);
}

VerdictOutcome coverage_verdict(std::string_view claim, const std::vector<std::string>& answers,
                                JudgeClient& judge) {
  const std::string prompt = render_prompt(
      TemplateId::kCoverageVerdict,
      SlotMap{{"answers", render_answers(answers)}, {"claim", std::string(claim)}});
  const std::string reply = judge.generate(TemplateId::kCoverageVerdict, prompt);
  try {
    return {parse_verdict(reply)};
  } catch (const ParseError&) {
    return {std::nullopt};
  }
}

ComponentResult coverage_reward(std::string_view claim, const std::vector<std::string>& answers,
                                Label reference, JudgeClient& judge) {
  ComponentResult r;
  if (answers.empty()) {
    r.flags.push_back("coverage:no-answers");
    return r;
  }
  const VerdictOutcome v = coverage_verdict(claim, answers, judge);
  if (!v.verdict) r.flags.push_back("coverage:parse-error");
  r.score = v.matches(reference) ? 1.0 : 0.0;
  return r;
}

double necessity_score(bool full_correct, bool loo_correct) {
  if (full_correct) return loo_correct ? 0.5 : 1.0;
  return loo_correct ? -1.0 : 0.0;
}

namespace {

std::vector<std::string> without(const std::vector<std::string>& answers, std::size_t i) {
  std::vector<std::string> out;
  out.reserve(answers.size() - 1);
  for (std::size_t j = 0; j < answers.size(); ++j) {
    if (j != i) out.push_back(answers[j]);
  }
  return out;
}

// Full-set verdict plus one leave-one-out verdict per answer.
std::pair<VerdictOutcome, std::vector<VerdictOutcome>> loo_verdicts(
    std::string_view claim, const std::vector<std::string>& answers, JudgeClient& judge,
    unsigned workers) {
  std::vector<VerdictOutcome> runs(answers.size() + 1);
  parallel_for(runs.size(), workers, [&](std::size_t k) {
    runs[k] = k == 0 ? coverage_verdict(claim, answers, judge)
                     : coverage_verdict(claim, without(answers, k - 1), judge);
  });
  VerdictOutcome full = runs.front();
  runs.erase(runs.begin());
  return {full, std::move(runs)};
}

std::string indexed(std::string_view component, std::size_t i, std::string_view what) {
  return std::string(component) + "[" + std::to_string(i + 1) + "]:" + std::string(what);
}

}  // namespace

ComponentResult necessity_reward(std::string_view claim, const std::vector<std::string>& answers,
                                 Label gold, JudgeClient& judge, unsigned workers) {
  ComponentResult r;
  if (answers.empty()) return r;
  auto [full, loo] = loo_verdicts(claim, answers, judge, workers);
  if (!full.verdict) r.flags.push_back("necessity:full-parse-error");
  const bool full_correct = full.matches(gold);
  for (std::size_t i = 0; i < loo.size(); ++i) {
    if (!loo[i].verdict) r.flags.push_back(indexed("necessity", i, "parse-error"));
    r.per_question.push_back(necessity_score(full_correct, loo[i].matches(gold)));
  }
  r.score = *std::min_element(r.per_question.begin(), r.per_question.end());
  return r;
}

ComponentResult necessity_reward_relative(std::string_view claim,
                                          const std::vector<std::string>& answers,
                                          JudgeClient& judge, unsigned workers) {
  ComponentResult r;
  if (answers.empty()) return r;
  auto [full, loo] = loo_verdicts(claim, answers, judge, workers);
  if (!full.verdict) r.flags.push_back("necessity:full-parse-error");
  for (std::size_t i = 0; i < loo.size(); ++i) {
    if (!loo[i].verdict) r.flags.push_back(indexed("necessity", i, "parse-error"));
    const bool flips = full.verdict && loo[i].verdict && *full.verdict != *loo[i].verdict;
    r.per_question.push_back(flips ? 1.0 : 0.0);
  }
  r.score = *std::min_element(r.per_question.begin(), r.per_question.end());
  return r;
}

double joint_term(double ans, double atom, std::optional<double> corr) {
  return corr ? ans * atom * *corr : ans * atom;
}

ComponentResult joint_quality_reward(std::string_view document, std::string_view claim,
                                     const std::vector<Cycle>& cycles, JudgeClient& judge,
                                     unsigned workers) {
  ComponentResult r;
  const std::size_t n = cycles.size();
  if (n == 0) return r;

  enum Factor { kAns = 0, kAtom = 1, kCorr = 2 };
  static constexpr const char* kNames[] = {"answerability", "atomicity", "correctness"};
  std::vector<double> value(3 * n, 0.0);
  std::vector<bool> parse_failed(3 * n, false);
  std::vector<bool> abstains(n);
  for (std::size_t i = 0; i < n; ++i) abstains[i] = is_abstention(cycles[i].answer);

  parallel_for(3 * n, workers, [&](std::size_t slot) {
    const std::size_t i = slot / 3;
    const auto factor = static_cast<Factor>(slot % 3);
    const Cycle& c = cycles[i];
    try {
      switch (factor) {
        case kAns: {
          const std::string p = render_prompt(
              TemplateId::kAnswerability,
              SlotMap{{"document", std::string(document)}, {"question", c.question}});
          value[slot] = parse_binary_answer(judge.generate(TemplateId::kAnswerability, p));
          break;
        }
        case kAtom: {
          const std::string p = render_prompt(
              TemplateId::kAtomicityChecklist,
              SlotMap{{"claim", std::string(claim)}, {"question", c.question}});
          value[slot] =
              parse_atomicity(judge.generate(TemplateId::kAtomicityChecklist, p)).fraction();
          break;
        }
        case kCorr: {
          if (abstains[i]) return;
          const std::string p = render_prompt(
              TemplateId::kAnswerCorrectness,
              SlotMap{{"document", std::string(document)}, {"sentence", c.answer}});
          value[slot] = parse_binary_answer(judge.generate(TemplateId::kAnswerCorrectness, p));
          break;
        }
      }
    } catch (const ParseError&) {
      value[slot] = 0.0;
      parse_failed[slot] = true;
    }
  });

  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (int f = 0; f < 3; ++f) {
      if (parse_failed[3 * i + f]) {
        r.flags.push_back(indexed("joint", i, std::string(kNames[f]) + "-parse-error"));
      }
    }
    const std::optional<double> corr =
        abstains[i] ? std::nullopt : std::optional<double>(value[3 * i + kCorr]);
    const double term = joint_term(value[3 * i + kAns], value[3 * i + kAtom], corr);
    r.per_question.push_back(term);
    sum += term;
  }
  r.score = sum / static_cast<double>(n);
  return r;
}

// ---- whole trace -------------------------------------------------------------

RewardBreakdown total_reward(const ClaimRecord& record, std::string_view trace_text,
                             const SupervisionMode& mode, RewardBackends& backends) {
  if (!backends.judge || !backends.embedder) {
    throw ConfigError("reward scoring needs a judge and an embedder");
  }
  if (!record.silver_question_count) {
    throw InputError("record \"" + record.id + "\" has no silver_question_count");
  }
  if (mode.is_labeled() && !mode.label) {
    throw InputError("record \"" + record.id + "\" is on the labeled path without a gold label");
  }

  const ParseReport report = parse_trace(trace_text);
  // A malformed trace still gets judged on whatever cycles can be recovered.
  const std::vector<Cycle>& cycles = report.trace ? report.trace->cycles : report.partial_cycles;
  const std::optional<Label> verdict = report.partial_verdict;
  std::vector<std::string> questions, answers;
  for (const auto& c : cycles) {
    questions.push_back(c.question);
    answers.push_back(c.answer);
  }
  const int n = static_cast<int>(cycles.size());

  RewardBreakdown b;
  b.mode = mode;
  b.fmt = format_reward(report);
  b.qc = question_count_reward(n, *record.silver_question_count);
  if (!verdict) b.flags.push_back("verdict:absent");

  struct Failure {
    std::string component;
    ErrorKind kind;
    std::string message;
  };
  std::vector<Failure> failures;
  const auto guarded = [&](const char* component, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      failures.push_back({component, e.kind(), e.what()});
    }
  };
  const auto absorb = [&](double& slot, ComponentResult r, std::vector<double>* per_q) {
    slot = r.score;
    if (per_q) *per_q = std::move(r.per_question);
    b.flags.insert(b.flags.end(), r.flags.begin(), r.flags.end());
  };

  guarded("diversity", [&] { b.div = diversity_reward(questions, *backends.embedder); });

  if (mode.is_labeled()) {
    b.ver = verification_reward(verdict, *mode.label);
    guarded("coverage", [&] {
      absorb(b.cov, coverage_reward(record.claim, answers, *mode.label, *backends.judge), nullptr);
    });
    guarded("necessity", [&] {
      absorb(b.nec,
             necessity_reward(record.claim, answers, *mode.label, *backends.judge,
                              backends.workers),
             &b.nec_per_question);
    });
  } else {
    // Agreement with the group's majority verdict stands in for coverage.
    if (!mode.label) b.flags.push_back("coverage:no-pseudo-label");
    b.cov = mode.label && verdict && *verdict == *mode.label ? 1.0 : 0.0;
    guarded("necessity", [&] {
      absorb(b.nec,
             necessity_reward_relative(record.claim, answers, *backends.judge, backends.workers),
             &b.nec_per_question);
    });
  }

  guarded("joint", [&] {
    absorb(b.joint,
           joint_quality_reward(record.evidence_text(), record.claim, cycles, *backends.judge,
                                backends.workers),
           &b.joint_per_question);
  });

  if (!failures.empty()) {
    std::string message;
    for (const auto& f : failures) {
      if (!message.empty()) message += "; ";
      message += f.component + ": " + f.message;
    }
    throw StageError("reward:" + failures.front().component, failures.front().kind,
                     "record \"" + record.id + "\": " + message);
  }
  b.total = b.component_sum();
  return b;
}

std::optional<Label> pseudo_label(const std::vector<std::optional<Label>>& verdicts) {
  std::size_t supported = 0, refuted = 0;
  for (const auto& v : verdicts) {
    if (!v) continue;
    (*v == Label::kSupported ? supported : refuted) += 1;
  }
  if (supported > refuted) return Label::kSupported;
  if (refuted > supported) return Label::kRefuted;
  return std::nullopt;
}

std::vector<double> group_advantages(const std::vector<double>& totals) {
  if (totals.size() < 2) throw InputError("advantages need a group of at least two rollouts");
  const long double g = static_cast<long double>(totals.size());
  long double sum = 0;
  for (double r : totals) sum += r;
  const long double mean = sum / g;
  long double ss = 0;
  for (double r : totals) ss += (r - mean) * (r - mean);
  const long double denom = std::sqrt(ss / g) + kAdvantageEpsilon;
  std::vector<double> out;
  out.reserve(totals.size());
  for (double r : totals) out.push_back(static_cast<double>((r - mean) / denom));
  return out;
}

GroupResult score_group(const ClaimRecord& record, const std::vector<std::string>& traces,
                        SupervisionMode::Kind kind, RewardBackends& backends) {
  GroupResult out;
  SupervisionMode mode;
  if (kind == SupervisionMode::Kind::kLabeled) {
    if (!record.label) {
      throw InputError("record \"" + record.id + "\" is on the labeled path without a gold label");
    }
    mode = SupervisionMode::labeled(*record.label);
  } else {
    std::vector<std::optional<Label>> verdicts;
    verdicts.reserve(traces.size());
    for (const auto& t : traces) verdicts.push_back(parse_trace(t).partial_verdict);
    out.pseudo_label = pseudo_label(verdicts);
    mode = SupervisionMode::unlabeled(out.pseudo_label);
  }
  out.breakdowns.reserve(traces.size());
  std::vector<double> totals;
  for (const auto& t : traces) {
    out.breakdowns.push_back(total_reward(record, t, mode, backends));
    totals.push_back(out.breakdowns.back().total);
  }
  out.advantages = group_advantages(totals);
  return out;
}

bool is_labeled_claim(std::string_view id, double s, std::uint64_t seed) {
  if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("supervision rate must lie in [0, 1]");
  const std::uint64_t h = hash64(std::string(id) + ":" + std::to_string(seed));
  // 2^-64 scaling is exact in binary floating point.
  const long double u = static_cast<long double>(h) * 0x1p-64L;
  return u < static_cast<long double>(s);
}

std::unordered_map<std::string, bool> partition_supervision(const std::vector<std::string>& ids,
                                                            double s, std::uint64_t seed) {
  std::unordered_map<std::string, bool> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    if (!out.emplace(id, is_labeled_claim(id, s, seed)).second) {
      throw InputError("duplicate claim id \"" + id + "\"");
    }
  }
  return out;
}

}  // namespace claimforge
