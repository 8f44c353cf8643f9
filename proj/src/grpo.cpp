#include "ugrpo/grpo.hpp"

#include <algorithm>
#include <cmath>

#include "ugrpo/errors.hpp"

namespace ugrpo {

void GroupBatch::refresh_stats() {
    double sum = 0.0;
    for (const Rollout& r : rollouts) sum += r.reward_total;
    reward_mean = sum / static_cast<double>(rollouts.size());
    double var = 0.0;
    for (const Rollout& r : rollouts) {
        const double d = r.reward_total - reward_mean;
        var += d * d;
    }
    reward_std = std::sqrt(var / static_cast<double>(rollouts.size()));
}

void GrpoConfig::validate() const {
    if (group_size < 2) throw ConfigError("GrpoConfig: group_size must be >= 2");
    if (clip_eps <= 0.0 || clip_eps >= 1.0)
        throw ConfigError("GrpoConfig: clip_eps must be in (0,1)");
    if (kl_beta < 0.0) throw ConfigError("GrpoConfig: kl_beta must be >= 0");
    if (learning_rate <= 0.0) throw ConfigError("GrpoConfig: learning_rate must be > 0");
    if (epochs_per_batch < 1) throw ConfigError("GrpoConfig: epochs_per_batch must be >= 1");
}

std::vector<double> group_advantages(const std::vector<double>& rewards) {
    if (rewards.size() < 2) throw DomainError("group_advantages: need G >= 2");
    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double std_dev = std::sqrt(var / n);
    std::vector<double> adv(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i)
        adv[i] = (rewards[i] - mean) / (std_dev + 1e-8);
    return adv;
}

double token_kl(const std::vector<double>& policy_logprobs,
                const std::vector<double>& ref_logprobs) {
    if (policy_logprobs.size() != ref_logprobs.size())
        throw DomainError("token_kl: length mismatch");
    if (policy_logprobs.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t t = 0; t < policy_logprobs.size(); ++t) {
        const double d = ref_logprobs[t] - policy_logprobs[t];
        sum += std::exp(d) - d - 1.0;
    }
    return sum / static_cast<double>(policy_logprobs.size());
}

std::pair<double, std::vector<double>> grpo_objective(
    const PolicySnapshot& policy, const PolicySnapshot& old_policy,
    const PolicySnapshot& ref_policy, const GroupBatch& group,
    const std::vector<double>& shaped_advantages, const GrpoConfig& cfg) {
    const std::size_t g = group.rollouts.size();
    if (shaped_advantages.size() != g)
        throw DomainError("grpo_objective: shaped_advantages length != G");

    double objective = 0.0;
    std::vector<double> grad(policy.num_params(), 0.0);
    const double inv_g = 1.0 / static_cast<double>(g);

    for (std::size_t i = 0; i < g; ++i) {
        const Rollout& ro = group.rollouts[i];
        const double a = shaped_advantages[i];
        auto [pol_lp, pol_ent] = logprob_and_entropy(policy, group.task.context, ro.tokens);
        auto [old_lp, old_ent] = logprob_and_entropy(old_policy, group.task.context, ro.tokens);
        auto [ref_lp, ref_ent] = logprob_and_entropy(ref_policy, group.task.context, ro.tokens);
        (void)pol_ent;
        (void)old_ent;
        (void)ref_ent;

        const std::size_t len = ro.tokens.size();
        const double inv_t = 1.0 / static_cast<double>(len);
        double surr_sum = 0.0, kl_sum = 0.0;
        std::vector<double> weights(len, 0.0);
        for (std::size_t t = 0; t < len; ++t) {
            const double ratio = std::exp(pol_lp[t] - old_lp[t]);
            const double unclipped = ratio * a;
            const double clipped =
                std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * a;
            const double surr = std::min(unclipped, clipped);
            surr_sum += surr;
            // gradient flows only through the unclipped branch when it is the min
            double coeff = unclipped <= clipped ? ratio * a : 0.0;

            const double delta = ref_lp[t] - pol_lp[t];
            kl_sum += std::exp(delta) - delta - 1.0;
            coeff += cfg.kl_beta * (std::exp(delta) - 1.0);

            weights[t] = coeff * inv_t * inv_g;
            if (!std::isfinite(surr) || !std::isfinite(weights[t])) {
                throw NumericalError("grpo_objective: non-finite value at rollout " +
                                     std::to_string(i) + " token " + std::to_string(t) +
                                     " (task " + group.task.id + ")");
            }
        }
        objective += inv_g * (surr_sum * inv_t - cfg.kl_beta * kl_sum * inv_t);
        accumulate_weighted_logprob_grad(policy, group.task.context, ro.tokens, weights, grad);
    }
    if (!std::isfinite(objective))
        throw NumericalError("grpo_objective: non-finite objective (task " + group.task.id + ")");
    return {objective, std::move(grad)};
}

std::pair<double, std::vector<double>> sft_objective(const PolicySnapshot& policy,
                                                     const TokenSeq& context,
                                                     const TokenSeq& target) {
    if (target.empty()) throw DomainError("sft_objective: target must be nonempty");
    auto [lp, ent] = logprob_and_entropy(policy, context, target);
    (void)ent;
    const double inv_t = 1.0 / static_cast<double>(target.size());
    double loss = 0.0;
    for (double v : lp) loss -= v;
    loss *= inv_t;

    std::vector<double> grad(policy.num_params(), 0.0);
    std::vector<double> weights(target.size(), -inv_t);
    accumulate_weighted_logprob_grad(policy, context, target, weights, grad);
    return {loss, std::move(grad)};
}

AdamW::AdamW(std::size_t num_params, double lr, double beta1, double beta2, double eps,
             double weight_decay)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay),
      m_(num_params, 0.0), v_(num_params, 0.0) {}

void AdamW::step(std::vector<double>& params, const std::vector<double>& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size())
        throw DomainError("AdamW::step: size mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
        const double mhat = m_[i] / bc1;
        const double vhat = v_[i] / bc2;
        params[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + weight_decay_ * params[i]);
    }
}

}  // namespace ugrpo
