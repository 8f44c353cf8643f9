#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ugrpo/grpo.hpp"
#include "ugrpo/policy.hpp"
#include "ugrpo/tasks.hpp"
#include "ugrpo/uadt.hpp"

namespace ugrpo {

enum class Stage { sft, rl };
enum class EntropySource { sampling_time, rescored };

struct TrainConfig {
    Stage stage = Stage::sft;
    std::vector<std::string> train_suites;
    std::string eval_suite;        // optional
    std::string init_checkpoint;   // optional RL starting point
    std::string checkpoint_out = "policy.ckpt";
    std::string metrics_out = "metrics.csv";
    std::string rollouts_out = "rollouts.csv";
    std::string ablation_out = "ablation_report.txt";

    GrpoConfig grpo;
    double alpha = 0.99;
    double gamma = 0.5;
    double lambda = 1.0;
    bool uadt_enabled = true;
    EntropySource entropy_source = EntropySource::sampling_time;

    RewardWeights reward_weights;
    std::uint64_t seed = 0;
    int max_len = 24;
    int epochs = 30;        // SFT passes over the training set
    int rl_steps = 300;
    int batch_size = 8;     // questions per optimizer step
    int eval_every = 50;
    int context_dim = 8;
    int hidden_dim = 16;
    double weight_decay = 0.0;
    int threshold_rollouts = 2;   // rollouts per task for threshold init
    int threshold_sample = 64;    // training instances sampled for threshold init

    void validate() const;
};

// key = value text, '#' comments, unknown keys rejected.
TrainConfig load_config(const std::string& path);

struct StepMetrics {
    long step = 0;
    double mean_reward = 0.0;
    double mean_format_rate = 0.0;
    double mean_seq_entropy = 0.0;
    double tau = 0.0;
    double mean_advantage = 0.0;
    double mean_shaped_advantage = 0.0;
    double kl = 0.0;
    double objective = 0.0;
    double wall_time = 0.0;  // seconds, the one nondeterministic column
};

struct RolloutTriple {
    long step = 0;
    double seq_entropy = 0.0;
    double advantage = 0.0;
    double shaped_advantage = 0.0;
};

struct TrainResult {
    PolicySnapshot policy;
    std::vector<StepMetrics> metrics;
    std::vector<RolloutTriple> triples;  // empty for SFT
};

// CoT supervised fine-tuning over shuffled batches. Writes per-step loss to
// cfg.metrics_out and the final checkpoint to cfg.checkpoint_out.
TrainResult run_sft(const TrainConfig& cfg);

// UADT-GRPO reinforcement learning starting from `init`; the reference
// policy is frozen at `init`. Emits StepMetrics plus per-rollout
// (entropy, advantage, shaped_advantage) triples.
TrainResult run_rl(const TrainConfig& cfg, const PolicySnapshot& init);

struct Heatmap {
    int bins_x = 0, bins_y = 0;
    std::vector<double> x_edges;  // bins_x + 1
    std::vector<double> y_edges;  // bins_y + 1
    std::vector<long> counts;        // bins_x * bins_y, row-major in x
    std::vector<double> mean_shaped;

    long total_count() const;
};

Heatmap build_heatmap(const std::vector<RolloutTriple>& triples, int bins_x, int bins_y);
void write_heatmap(const Heatmap& hm, const std::string& path);

// Reads a rollout-triple stream and writes the 2-D (entropy x advantage)
// histogram table; empty log yields a header-only table.
void export_heatmap(const std::string& log_path, int bins_x, int bins_y,
                    const std::string& out_path);
std::vector<RolloutTriple> load_triples(const std::string& path);

struct AblationArm {
    double final_eval_reward = 0.0;
    double median_final_entropy = 0.0;
    std::vector<long> first_epoch_hist;   // sequence-entropy histogram, early steps
    std::vector<long> final_epoch_hist;   // late steps
    Heatmap heatmap;
    std::size_t rollout_count = 0;
};

struct AblationReport {
    std::vector<std::uint64_t> seeds;
    std::vector<AblationArm> vanilla;  // one per seed
    std::vector<AblationArm> uadt;
};

// Matched vanilla-GRPO vs UADT-GRPO over the same suites, one pair of runs
// per seed; writes the comparison report to cfg.ablation_out and per-arm
// heatmap tables alongside it.
AblationReport run_ablation(const TrainConfig& cfg, const std::vector<std::uint64_t>& seeds);

void write_metrics(const std::vector<StepMetrics>& metrics, const std::string& path);
void write_triples(const std::vector<RolloutTriple>& triples, const std::string& path);
std::vector<StepMetrics> load_metrics(const std::string& path);

}  // namespace ugrpo
