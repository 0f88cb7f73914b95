#pragma once

// Seven-signal reward ensemble over verification traces, its label-free
// variants, pseudo-labels from rollout groups, and group-normalized
// advantages for a GRPO trainer.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "claimforge/backends.hpp"
#include "claimforge/corpus.hpp"
#include "claimforge/trace.hpp"
#include "json.hpp"

namespace claimforge {

struct SupervisionMode {
  enum class Kind { kLabeled, kUnlabeled };
  Kind kind = Kind::kLabeled;
  // Gold label on the labeled path; pseudo-label (possibly absent) otherwise.
  std::optional<Label> label;

  static SupervisionMode labeled(Label gold) { return {Kind::kLabeled, gold}; }
  static SupervisionMode unlabeled(std::optional<Label> pseudo) {
    return {Kind::kUnlabeled, pseudo};
  }
  bool is_labeled() const { return kind == Kind::kLabeled; }
};

struct RewardBreakdown {
  double fmt = 0, ver = 0, qc = 0, div = 0, cov = 0, nec = 0, joint = 0;
  double total = 0;
  std::vector<double> nec_per_question;
  std::vector<double> joint_per_question;
  SupervisionMode mode;
  std::vector<std::string> flags;

  // fmt + ver + qc + div + cov + nec + joint, summed left to right.
  double component_sum() const;
};

nlohmann::json to_json(const RewardBreakdown& b, std::string_view id);

// Handles the reward layer needs. `workers` bounds concurrent judge calls
// within one trace.
struct RewardBackends {
  JudgeClient* judge = nullptr;
  Embedder* embedder = nullptr;
  unsigned workers = 1;
};

// ---- deterministic components ----------------------------------------------

double format_reward(const ParseReport& report);
double verification_reward(std::optional<Label> verdict, Label gold);

// max(0, 1 - |n / n_star - 1|). n_star must be >= 1.
double question_count_reward(int n, int n_star);

// -(1/n) * sum_{i>=2} max(0, max_{j<i} cos(q_i, q_j)) over unit vectors.
// Negative similarities count as no redundancy, which keeps the value in
// [-1, 0].
double diversity_from_embeddings(const std::vector<Embedding>& questions);
double diversity_reward(const std::vector<std::string>& questions, Embedder& embedder);

// ---- judge components --------------------------------------------------------

// Answers as the numbered list the coverage judge sees.
std::string render_answers(const std::vector<std::string>& answers);

struct VerdictOutcome {
  std::optional<ThreeWayVerdict> verdict;  // absent on a judge parse error
  bool matches(Label reference) const;
};

VerdictOutcome coverage_verdict(std::string_view claim, const std::vector<std::string>& answers,
                                JudgeClient& judge);

struct ComponentResult {
  double score = 0;
  std::vector<double> per_question;
  std::vector<std::string> flags;
};

ComponentResult coverage_reward(std::string_view claim, const std::vector<std::string>& answers,
                                Label reference, JudgeClient& judge);

// Leave-one-out matrix entry: +1 necessary, +0.5 redundant, 0 neutral,
// -1 harmful.
double necessity_score(bool full_correct, bool loo_correct);

// Per-question matrix scores against `gold`; score is their minimum.
ComponentResult necessity_reward(std::string_view claim, const std::vector<std::string>& answers,
                                 Label gold, JudgeClient& judge, unsigned workers = 1);

// Per-question 1 iff dropping the answer changes the judge's verdict; a
// parse error on either side scores 0. Score is the minimum.
ComponentResult necessity_reward_relative(std::string_view claim,
                                          const std::vector<std::string>& answers,
                                          JudgeClient& judge, unsigned workers = 1);

// ans * atom * corr, or ans * atom for an abstention.
double joint_term(double ans, double atom, std::optional<double> corr);

ComponentResult joint_quality_reward(std::string_view document, std::string_view claim,
                                     const std::vector<Cycle>& cycles, JudgeClient& judge,
                                     unsigned workers = 1);

// ---- whole trace -------------------------------------------------------------

// Parses and scores one trace. Component failures are collected and thrown
// together as a StageError naming each failing component.
RewardBreakdown total_reward(const ClaimRecord& record, std::string_view trace_text,
                             const SupervisionMode& mode, RewardBackends& backends);

// Majority of the present verdicts; none on a tie or when all are absent.
std::optional<Label> pseudo_label(const std::vector<std::optional<Label>>& verdicts);

// (r - mean) / (std + 1e-6) with the population std. Needs at least two.
std::vector<double> group_advantages(const std::vector<double>& totals);

inline constexpr double kAdvantageEpsilon = 1e-6;

struct GroupResult {
  std::vector<RewardBreakdown> breakdowns;
  std::optional<Label> pseudo_label;  // unlabeled path only
  std::vector<double> advantages;
};

// Scores G rollouts of one claim. On the unlabeled path the pseudo-label
// is the majority verdict of the group.
GroupResult score_group(const ClaimRecord& record, const std::vector<std::string>& traces,
                        SupervisionMode::Kind kind, RewardBackends& backends);

// Fixed per-claim assignment: labeled iff hash64(id + ":" + seed) / 2^64 < s.
bool is_labeled_claim(std::string_view id, double s, std::uint64_t seed);

std::unordered_map<std::string, bool> partition_supervision(const std::vector<std::string>& ids,
                                                            double s, std::uint64_t seed);

}  // namespace claimforge
