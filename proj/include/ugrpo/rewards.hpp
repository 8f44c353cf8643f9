#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ugrpo/policy.hpp"

namespace ugrpo {

enum class TaskKind { single_mcq, multi_mcq, true_false, open_ended };

std::string kind_name(TaskKind kind);
TaskKind kind_from_name(const std::string& name);

// Result of matching a response against the tag grammar. well_formed is true
// only on an exact structural match; spans are filled regardless so callers
// can inspect partially tagged output.
struct ParsedResponse {
    std::optional<TokenSeq> caption;
    std::optional<TokenSeq> think;
    std::optional<TokenSeq> answer;
    bool well_formed = false;
};

struct RewardWeights {
    double w_format = 0.5;
    double w_accuracy = 1.0;
};

struct RewardBreakdown {
    double format = 0.0;    // {0,1}
    double accuracy = 0.0;  // [0,1], forced 0 when malformed
    double total = 0.0;
    RewardWeights weights;
};

// Ground truth for one task.
struct AnswerKey {
    TaskKind kind = TaskKind::single_mcq;
    std::set<int> options;        // label token ids (MCQ / true-false kinds)
    std::set<int> truth_labels;   // MCQ / true-false kinds
    TokenSeq reference;           // open_ended
};

// Tag grammar, token level:
//   mcq / true_false:  <think> body </think> <answer> labels </answer>
//   open_ended:        <caption> body </caption> <think> body </think> <answer> body </answer>
// Nothing before, between, or after the blocks; trailing EOS tokens are
// stripped first; tag tokens may not appear inside a body.
ParsedResponse parse_response(const TokenSeq& tokens, TaskKind kind);

// |a ∩ b| / |a ∪ b|; empty predicted set scores 0.
double iou_accuracy(const std::set<int>& predicted, const std::set<int>& truth);

// Geometric mean of clipped n-gram precisions up to min(max_order, |candidate|)
// with brevity penalty; zero precisions floored at 1e-9. Empty candidate -> 0.
double bleu(const TokenSeq& candidate, const TokenSeq& reference, int max_order = 4);

enum class RougeVariant { rouge1, rougeL };

// F1 of clipped unigram overlap (rouge1) or of LCS length (rougeL).
double rouge(const TokenSeq& candidate, const TokenSeq& reference, RougeVariant variant);

// Exact-match unigram alignment with leftmost-greedy chunking;
// F_mean = 10PR/(R+9P), penalty = 0.5*(chunks/matches)^3.
double meteor(const TokenSeq& candidate, const TokenSeq& reference);

// Per candidate: mean(bleu, mean(rouge1, rougeL), meteor); uniform mean over
// up to 5 candidates.
double open_ended_accuracy(const std::vector<TokenSeq>& candidates, const TokenSeq& reference);

// Predicted labels outside key.options are dropped before scoring.
RewardBreakdown compute_reward(const ParsedResponse& parsed, const AnswerKey& key,
                               const RewardWeights& weights = {});

}  // namespace ugrpo
