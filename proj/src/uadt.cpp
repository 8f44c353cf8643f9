#include "ugrpo/uadt.hpp"

#include <algorithm>
#include <cmath>

#include "ugrpo/errors.hpp"
#include "ugrpo/rng.hpp"

namespace ugrpo {

void UadtState::validate() const {
    if (!std::isfinite(tau)) throw ConfigError("UadtState: tau must be finite");
    if (alpha <= 0.0 || alpha >= 1.0) throw ConfigError("UadtState: alpha must be in (0,1)");
    if (gamma <= 0.0) throw ConfigError("UadtState: gamma must be > 0");
    if (lambda_ < 0.0) throw ConfigError("UadtState: lambda must be >= 0");
}

double median(std::vector<double> values) {
    if (values.empty()) throw DomainError("median: empty input");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double init_threshold(const PolicySnapshot& policy, const std::vector<TaskInstance>& tasks,
                      int rollouts_per_task, std::uint64_t seed, int max_len) {
    if (tasks.empty()) throw DomainError("init_threshold: tasks must be nonempty");
    if (rollouts_per_task < 1) throw DomainError("init_threshold: rollouts_per_task must be >= 1");
    std::vector<double> entropies;
    entropies.reserve(tasks.size() * static_cast<std::size_t>(rollouts_per_task));
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        for (int k = 0; k < rollouts_per_task; ++k) {
            Rollout r = sample_rollout(policy, tasks[i].context,
                                       mix_seed(seed, 0x746175, i, static_cast<std::uint64_t>(k)),
                                       max_len);
            entropies.push_back(r.seq_entropy);
        }
    }
    return median(std::move(entropies));
}

UadtState update_threshold(const UadtState& state, const std::vector<double>& batch_entropies) {
    if (batch_entropies.empty()) throw DomainError("update_threshold: empty batch");
    double mean = 0.0;
    for (double h : batch_entropies) mean += h;
    mean /= static_cast<double>(batch_entropies.size());
    UadtState next = state;
    next.tau = state.alpha * state.tau + (1.0 - state.alpha) * mean;
    next.step = state.step + 1;
    return next;
}

double uncertainty_factor(const UadtState& state, double seq_entropy) {
    return std::tanh(state.gamma * (seq_entropy - state.tau));
}

double shape_advantage(const UadtState& state, double advantage, double seq_entropy) {
    return advantage + state.lambda_ * uncertainty_factor(state, seq_entropy) * seq_entropy;
}

}  // namespace ugrpo
