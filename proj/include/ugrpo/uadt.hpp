#pragma once

#include <cstdint>
#include <vector>

#include "ugrpo/policy.hpp"
#include "ugrpo/tasks.hpp"

namespace ugrpo {

// Adaptive entropy threshold plus the shaping constants.
struct UadtState {
    double tau = 0.0;      // adaptive threshold, nats
    double alpha = 0.99;   // EMA decay, in (0,1)
    double gamma = 0.5;    // tanh steepness
    double lambda_ = 1.0;  // shaping scale, >= 0
    long step = 0;

    void validate() const;
};

// Median of a sample (even count: mean of the two middle values).
double median(std::vector<double> values);

// tau_0 = median sequence entropy of rollouts sampled from `policy` over the
// given tasks, the base model in inference mode.
double init_threshold(const PolicySnapshot& policy, const std::vector<TaskInstance>& tasks,
                      int rollouts_per_task, std::uint64_t seed, int max_len);

// tau_s = alpha * tau_{s-1} + (1 - alpha) * mean(batch_entropies); bumps step.
UadtState update_threshold(const UadtState& state, const std::vector<double>& batch_entropies);

// omega = tanh(gamma * (H_seq - tau)), in (-1, 1).
double uncertainty_factor(const UadtState& state, double seq_entropy);

// A_uadt = A + lambda * omega * H_seq.
double shape_advantage(const UadtState& state, double advantage, double seq_entropy);

}  // namespace ugrpo
