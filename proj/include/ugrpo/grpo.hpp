#pragma once

#include <utility>
#include <vector>

#include "ugrpo/policy.hpp"
#include "ugrpo/tasks.hpp"

namespace ugrpo {

// G rollouts for one task instance plus group reward statistics.
struct GroupBatch {
    TaskInstance task;
    std::vector<Rollout> rollouts;
    double reward_mean = 0.0;
    double reward_std = 0.0;  // population std

    void refresh_stats();
};

struct GrpoConfig {
    int group_size = 8;
    double clip_eps = 0.2;
    double kl_beta = 0.04;
    double learning_rate = 1e-2;
    int epochs_per_batch = 1;

    void validate() const;
};

// A_i = (r_i - mean) / (std + 1e-8); all-equal rewards give all zeros.
std::vector<double> group_advantages(const std::vector<double>& rewards);

// Per-token estimator k = exp(ref - pol) - (ref - pol) - 1, token-averaged.
double token_kl(const std::vector<double>& policy_logprobs,
                const std::vector<double>& ref_logprobs);

// Clipped surrogate with KL penalty: per-token ratio against `old`, the
// rollout's shaped advantage broadcast to its tokens, token-mean within each
// rollout, mean over the group, minus kl_beta times the token_kl estimator.
// Returns (objective value, exact gradient w.r.t. `policy` params). Shaped
// advantages are constants: no gradient flows through them.
std::pair<double, std::vector<double>> grpo_objective(
    const PolicySnapshot& policy, const PolicySnapshot& old_policy,
    const PolicySnapshot& ref_policy, const GroupBatch& group,
    const std::vector<double>& shaped_advantages, const GrpoConfig& cfg);

// Negative mean token log-likelihood of `target` and its exact gradient.
std::pair<double, std::vector<double>> sft_objective(const PolicySnapshot& policy,
                                                     const TokenSeq& context,
                                                     const TokenSeq& target);

// Decoupled-weight-decay adaptive moment estimation.
class AdamW {
public:
    AdamW(std::size_t num_params, double lr, double beta1 = 0.9, double beta2 = 0.999,
          double eps = 1e-8, double weight_decay = 0.0);

    // Applies one descent step along `grad` (pass the gradient of a loss).
    void step(std::vector<double>& params, const std::vector<double>& grad);

private:
    double lr_, beta1_, beta2_, eps_, weight_decay_;
    long t_ = 0;
    std::vector<double> m_, v_;
};

}  // namespace ugrpo
