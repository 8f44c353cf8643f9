#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ugrpo/rng.hpp"

namespace ugrpo {

using TokenSeq = std::vector<int>;

// Next-token distribution at one decoding position.
struct TokenDistribution {
    std::vector<double> probs;
    std::vector<double> logprobs;
    double entropy = 0.0;  // nats
};

struct ParsedResponse;   // rewards.hpp
struct RewardBreakdown;  // rewards.hpp

// One sampled output sequence together with everything recorded under the
// sampling policy.
struct Rollout {
    TokenSeq tokens;
    std::vector<double> per_token_logprob;
    std::vector<double> per_token_entropy;
    double seq_entropy = 0.0;  // mean of per_token_entropy
    bool truncated = false;    // hit max_len before EOS
    double reward_total = 0.0;
    double reward_format = 0.0;
    double reward_accuracy = 0.0;
    double advantage = 0.0;
    double shaped_advantage = 0.0;
};

// Small autoregressive categorical policy:
//   context tokens -> mean-pooled embedding, concatenated with the previous
//   token's embedding, one tanh hidden layer, linear output projection.
// Parameters live in one flat vector so gradient code, optimizers, and
// checkpoints all see the same layout.
class PolicySnapshot {
public:
    PolicySnapshot() = default;
    PolicySnapshot(int vocab_size, int context_dim, int hidden_dim);

    // uniform init in [-0.05, 0.05]
    static PolicySnapshot random_init(int vocab_size, int context_dim, int hidden_dim,
                                      std::uint64_t seed);

    int vocab_size() const { return vocab_size_; }
    int context_dim() const { return context_dim_; }
    int hidden_dim() const { return hidden_dim_; }

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    std::size_t num_params() const { return params_.size(); }

    // named blocks of the flat parameter vector: name -> (offset, length)
    std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> param_layout() const;

    // block offsets
    std::size_t off_embedding() const { return 0; }
    std::size_t off_start() const;
    std::size_t off_w1() const;
    std::size_t off_b1() const;
    std::size_t off_w2() const;
    std::size_t off_b2() const;

private:
    int vocab_size_ = 0;
    int context_dim_ = 0;
    int hidden_dim_ = 0;
    std::vector<double> params_;
};

inline constexpr int kEosToken = 0;

// Exact next-token distribution conditioned on (context, prefix).
TokenDistribution forward_step(const PolicySnapshot& policy, const TokenSeq& context,
                               const TokenSeq& prefix);

// Autoregressive sampling until EOS or max_len; records per-token log-probs
// and entropies under the sampling policy. Deterministic in (policy, context,
// seed).
Rollout sample_rollout(const PolicySnapshot& policy, const TokenSeq& context,
                       std::uint64_t rng_seed, int max_len);

// Greedy argmax decode, for evaluation.
TokenSeq greedy_decode(const PolicySnapshot& policy, const TokenSeq& context, int max_len);

// Teacher-forced per-token log-probs and entropies of `tokens` given
// `context`.
std::pair<std::vector<double>, std::vector<double>> logprob_and_entropy(
    const PolicySnapshot& policy, const TokenSeq& context, const TokenSeq& tokens);

// Gradient of sum_t log pi(tokens[t] | context, tokens[<t]) w.r.t. params.
std::vector<double> grad_logprob(const PolicySnapshot& policy, const TokenSeq& context,
                                 const TokenSeq& tokens);

// Shared backward pass: accumulates sum_t weight[t] * grad log pi(tokens[t]|.)
// into `grad` (which must be num_params() long, preallocated).
void accumulate_weighted_logprob_grad(const PolicySnapshot& policy, const TokenSeq& context,
                                      const TokenSeq& tokens, const std::vector<double>& weights,
                                      std::vector<double>& grad);

// Checkpoint I/O: structured text, hex-float values, round-trip exact.
void save_checkpoint(const PolicySnapshot& policy, const std::string& path);
PolicySnapshot load_checkpoint(const std::string& path);

}  // namespace ugrpo
