#include "ugrpo/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "ugrpo/errors.hpp"
#include "ugrpo/eval.hpp"
#include "ugrpo/rewards.hpp"
#include "ugrpo/rng.hpp"
#include "ugrpo/vocab.hpp"

namespace ugrpo {

namespace {

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: bad boolean for '" + key + "': " + v);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

struct LoadedData {
    std::vector<TaskSuite> train;
    TaskSuite eval;
    bool has_eval = false;
    std::size_t train_total = 0;
};

LoadedData load_data(const TrainConfig& cfg) {
    LoadedData d;
    std::unordered_set<std::string> train_ids;
    for (const std::string& path : cfg.train_suites) {
        TaskSuite s = load_suite(path, Split::train);
        if (s.instances.empty()) throw ConfigError("train suite '" + path + "' is empty");
        for (const TaskInstance& t : s.instances) {
            if (!train_ids.insert(t.id).second)
                throw ConfigError("duplicate task id across train suites: " + t.id);
        }
        d.train_total += s.instances.size();
        d.train.push_back(std::move(s));
    }
    if (!cfg.eval_suite.empty()) {
        d.eval = load_suite(cfg.eval_suite, Split::eval);
        d.has_eval = true;
        for (const TaskInstance& t : d.eval.instances) {
            if (train_ids.count(t.id))
                throw ConfigError("eval instance '" + t.id + "' also appears in training data");
        }
    }
    return d;
}

double csv_num(const std::string& field, const std::string& path) {
    try {
        return std::stod(field);
    } catch (const std::exception&) {
        throw IoError("bad numeric field '" + field + "' in " + path);
    }
}

// Deterministic round-robin question source over several suites, each walked
// in a reshuffled order per pass.
class QuestionStream {
public:
    QuestionStream(const std::vector<TaskSuite>& suites, std::uint64_t seed)
        : suites_(suites), rng_(mix_seed(seed, 0x71737472)) {
        perms_.resize(suites.size());
        cursors_.assign(suites.size(), 0);
        for (std::size_t i = 0; i < suites.size(); ++i) reshuffle(i);
        next_suite_ = 0;
    }

    const TaskInstance& next() {
        const std::size_t s = next_suite_;
        next_suite_ = (next_suite_ + 1) % suites_.size();
        if (cursors_[s] >= perms_[s].size()) {
            reshuffle(s);
            cursors_[s] = 0;
        }
        return suites_[s].instances[perms_[s][cursors_[s]++]];
    }

private:
    void reshuffle(std::size_t s) {
        auto& perm = perms_[s];
        perm.resize(suites_[s].instances.size());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        for (std::size_t i = perm.size(); i > 1; --i)
            std::swap(perm[i - 1], perm[rng_.next_index(i)]);
    }

    const std::vector<TaskSuite>& suites_;
    Rng rng_;
    std::vector<std::vector<std::size_t>> perms_;
    std::vector<std::size_t> cursors_;
    std::size_t next_suite_;
};

double mean_greedy_reward(const PolicySnapshot& policy, const TaskSuite& suite,
                          const RewardWeights& weights, int max_len) {
    if (suite.instances.empty()) return 0.0;
    double sum = 0.0;
    for (const TaskInstance& t : suite.instances) {
        TokenSeq out = greedy_decode(policy, t.context, max_len);
        sum += compute_reward(parse_response(out, t.kind), t.key, weights).total;
    }
    return sum / static_cast<double>(suite.instances.size());
}

}  // namespace

void TrainConfig::validate() const {
    grpo.validate();
    if (train_suites.empty()) throw ConfigError("config: at least one train_suite required");
    for (const std::string& p : train_suites) {
        if (!std::filesystem::exists(p)) throw ConfigError("config: train suite not found: " + p);
    }
    if (!eval_suite.empty() && !std::filesystem::exists(eval_suite))
        throw ConfigError("config: eval suite not found: " + eval_suite);
    if (!init_checkpoint.empty() && !std::filesystem::exists(init_checkpoint))
        throw ConfigError("config: init checkpoint not found: " + init_checkpoint);
    if (alpha <= 0.0 || alpha >= 1.0) throw ConfigError("config: alpha must be in (0,1)");
    if (gamma <= 0.0) throw ConfigError("config: gamma must be > 0");
    if (lambda < 0.0) throw ConfigError("config: lambda must be >= 0");
    if (reward_weights.w_format < 0.0 || reward_weights.w_accuracy < 0.0)
        throw ConfigError("config: reward weights must be >= 0");
    if (max_len < 1) throw ConfigError("config: max_len must be >= 1");
    if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
    if (rl_steps < 1) throw ConfigError("config: rl_steps must be >= 1");
    if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    if (eval_every < 1) throw ConfigError("config: eval_every must be >= 1");
    if (context_dim < 1 || hidden_dim < 1) throw ConfigError("config: bad policy dimensions");
    if (weight_decay < 0.0) throw ConfigError("config: weight_decay must be >= 0");
    if (threshold_rollouts < 1 || threshold_sample < 1)
        throw ConfigError("config: threshold sampling knobs must be >= 1");
}

TrainConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_config: cannot open " + path);

    TrainConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        try {
            if (key == "stage") {
                if (value == "sft") cfg.stage = Stage::sft;
                else if (value == "rl") cfg.stage = Stage::rl;
                else throw ConfigError("stage must be sft or rl");
            } else if (key == "train_suite") cfg.train_suites = split_list(value);
            else if (key == "eval_suite") cfg.eval_suite = value;
            else if (key == "init_checkpoint") cfg.init_checkpoint = value;
            else if (key == "checkpoint_out") cfg.checkpoint_out = value;
            else if (key == "metrics_out") cfg.metrics_out = value;
            else if (key == "rollouts_out") cfg.rollouts_out = value;
            else if (key == "ablation_out") cfg.ablation_out = value;
            else if (key == "group_size") cfg.grpo.group_size = std::stoi(value);
            else if (key == "clip_eps") cfg.grpo.clip_eps = std::stod(value);
            else if (key == "kl_beta") cfg.grpo.kl_beta = std::stod(value);
            else if (key == "learning_rate") cfg.grpo.learning_rate = std::stod(value);
            else if (key == "epochs_per_batch") cfg.grpo.epochs_per_batch = std::stoi(value);
            else if (key == "alpha") cfg.alpha = std::stod(value);
            else if (key == "gamma") cfg.gamma = std::stod(value);
            else if (key == "lambda") cfg.lambda = std::stod(value);
            else if (key == "uadt_enabled") cfg.uadt_enabled = parse_bool(value, key);
            else if (key == "entropy_source") {
                if (value == "sampling_time") cfg.entropy_source = EntropySource::sampling_time;
                else if (value == "rescored") cfg.entropy_source = EntropySource::rescored;
                else throw ConfigError("entropy_source must be sampling_time or rescored");
            } else if (key == "w_format") cfg.reward_weights.w_format = std::stod(value);
            else if (key == "w_accuracy") cfg.reward_weights.w_accuracy = std::stod(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "max_len") cfg.max_len = std::stoi(value);
            else if (key == "epochs") cfg.epochs = std::stoi(value);
            else if (key == "rl_steps") cfg.rl_steps = std::stoi(value);
            else if (key == "batch_size") cfg.batch_size = std::stoi(value);
            else if (key == "eval_every") cfg.eval_every = std::stoi(value);
            else if (key == "context_dim") cfg.context_dim = std::stoi(value);
            else if (key == "hidden_dim") cfg.hidden_dim = std::stoi(value);
            else if (key == "weight_decay") cfg.weight_decay = std::stod(value);
            else if (key == "threshold_rollouts") cfg.threshold_rollouts = std::stoi(value);
            else if (key == "threshold_sample") cfg.threshold_sample = std::stoi(value);
            else throw ConfigError("unknown key '" + key + "'");
        } catch (const ConfigError& e) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const std::exception& e) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": bad value for '" + key +
                              "': " + e.what());
        }
    }
    return cfg;
}

void write_metrics(const std::vector<StepMetrics>& metrics, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_metrics: cannot open " + path);
    out.precision(17);
    out << "step,mean_reward,mean_format_rate,mean_seq_entropy,tau,mean_advantage,"
           "mean_shaped_advantage,kl,objective,wall_time\n";
    for (const StepMetrics& m : metrics) {
        out << m.step << "," << m.mean_reward << "," << m.mean_format_rate << ","
            << m.mean_seq_entropy << "," << m.tau << "," << m.mean_advantage << ","
            << m.mean_shaped_advantage << "," << m.kl << "," << m.objective << "," << m.wall_time
            << "\n";
    }
}

std::vector<StepMetrics> load_metrics(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_metrics: cannot open " + path);
    std::vector<StepMetrics> out;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 10) throw IoError("bad metrics row in " + path);
        StepMetrics m;
        m.step = static_cast<long>(csv_num(fields[0], path));
        m.mean_reward = csv_num(fields[1], path);
        m.mean_format_rate = csv_num(fields[2], path);
        m.mean_seq_entropy = csv_num(fields[3], path);
        m.tau = csv_num(fields[4], path);
        m.mean_advantage = csv_num(fields[5], path);
        m.mean_shaped_advantage = csv_num(fields[6], path);
        m.kl = csv_num(fields[7], path);
        m.objective = csv_num(fields[8], path);
        m.wall_time = csv_num(fields[9], path);
        out.push_back(m);
    }
    return out;
}

void write_triples(const std::vector<RolloutTriple>& triples, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_triples: cannot open " + path);
    out.precision(17);
    out << "step,seq_entropy,advantage,shaped_advantage\n";
    for (const RolloutTriple& t : triples) {
        out << t.step << "," << t.seq_entropy << "," << t.advantage << ","
            << t.shaped_advantage << "\n";
    }
}

std::vector<RolloutTriple> load_triples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_triples: cannot open " + path);
    std::vector<RolloutTriple> out;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        if (fields.size() != 4) throw IoError("bad triple row in " + path);
        RolloutTriple t;
        t.step = static_cast<long>(csv_num(fields[0], path));
        t.seq_entropy = csv_num(fields[1], path);
        t.advantage = csv_num(fields[2], path);
        t.shaped_advantage = csv_num(fields[3], path);
        out.push_back(t);
    }
    return out;
}

TrainResult run_sft(const TrainConfig& cfg) {
    cfg.validate();
    LoadedData data = load_data(cfg);
    for (const TaskSuite& s : data.train) {
        for (const TaskInstance& t : s.instances) {
            if (!t.cot_target)
                throw ConfigError("run_sft: instance '" + t.id + "' has no cot_target");
        }
    }

    TrainResult res;
    res.policy = cfg.init_checkpoint.empty()
                     ? PolicySnapshot::random_init(vocab::kSize, cfg.context_dim, cfg.hidden_dim,
                                                   mix_seed(cfg.seed, 0x696e6974))
                     : load_checkpoint(cfg.init_checkpoint);

    AdamW opt(res.policy.num_params(), cfg.grpo.learning_rate, 0.9, 0.999, 1e-8,
              cfg.weight_decay);

    // flat view of (suite, instance) pairs for shuffling
    std::vector<std::pair<std::size_t, std::size_t>> order;
    for (std::size_t s = 0; s < data.train.size(); ++s)
        for (std::size_t i = 0; i < data.train[s].instances.size(); ++i) order.push_back({s, i});

    const auto t0 = std::chrono::steady_clock::now();
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(cfg.seed, 0x73667465, static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.next_index(i)]);

        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const double inv_b = 1.0 / static_cast<double>(end - start);
            std::vector<double> grad(res.policy.num_params(), 0.0);
            double loss = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                const TaskInstance& t = data.train[order[k].first].instances[order[k].second];
                auto [l, g] = sft_objective(res.policy, t.context, *t.cot_target);
                loss += l * inv_b;
                for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += g[j] * inv_b;
            }
            opt.step(res.policy.params(), grad);
            ++step;
            StepMetrics m;
            m.step = step;
            m.objective = loss;
            m.wall_time =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            res.metrics.push_back(m);
        }
    }

    write_metrics(res.metrics, cfg.metrics_out);
    save_checkpoint(res.policy, cfg.checkpoint_out);
    return res;
}

TrainResult run_rl(const TrainConfig& cfg, const PolicySnapshot& init) {
    cfg.validate();
    LoadedData data = load_data(cfg);

    TrainResult res;
    res.policy = init;
    const PolicySnapshot& ref = init;

    // Threshold initialization runs on its own derived seed in every mode so
    // that uadt_enabled=false and lambda=0 runs share identical streams.
    std::vector<TaskInstance> tau_tasks;
    {
        QuestionStream qs(data.train, mix_seed(cfg.seed, 0x74617573));
        const std::size_t count =
            std::min<std::size_t>(cfg.threshold_sample, data.train_total);
        for (std::size_t i = 0; i < count; ++i) tau_tasks.push_back(qs.next());
    }
    UadtState uadt;
    uadt.alpha = cfg.alpha;
    uadt.gamma = cfg.gamma;
    uadt.lambda_ = cfg.lambda;
    uadt.tau = init_threshold(init, tau_tasks, cfg.threshold_rollouts,
                              mix_seed(cfg.seed, 0x74617530), cfg.max_len);
    uadt.validate();

    // Shaping (and with it the EMA threshold walk) is active only when UADT is
    // on with a nonzero scale; a lambda=0 run is numerically the vanilla run.
    const bool shaping_active = cfg.uadt_enabled && cfg.lambda != 0.0;

    QuestionStream questions(data.train, mix_seed(cfg.seed, 0x71756573));
    AdamW opt(res.policy.num_params(), cfg.grpo.learning_rate, 0.9, 0.999, 1e-8,
              cfg.weight_decay);

    std::ofstream eval_log;
    if (data.has_eval) {
        eval_log.open(cfg.metrics_out + ".eval");
        if (!eval_log) throw IoError("run_rl: cannot open " + cfg.metrics_out + ".eval");
        eval_log << "step," << EvalReport::row_header() << "\n";
    }

    const auto t0 = std::chrono::steady_clock::now();
    for (long step = 1; step <= cfg.rl_steps; ++step) {
        const PolicySnapshot old_policy = res.policy;  // rollout policy for this step

        std::vector<GroupBatch> groups;
        std::vector<double> batch_entropies;
        double reward_sum = 0.0, format_sum = 0.0, adv_sum = 0.0, shaped_sum = 0.0;
        std::size_t rollout_count = 0;

        for (int q = 0; q < cfg.batch_size; ++q) {
            GroupBatch group;
            group.task = questions.next();
            std::vector<double> rewards;
            for (int g = 0; g < cfg.grpo.group_size; ++g) {
                Rollout r = sample_rollout(
                    old_policy, group.task.context,
                    mix_seed(cfg.seed, static_cast<std::uint64_t>(step), fnv1a(group.task.id),
                             static_cast<std::uint64_t>(g)),
                    cfg.max_len);
                RewardBreakdown rb = compute_reward(parse_response(r.tokens, group.task.kind),
                                                    group.task.key, cfg.reward_weights);
                r.reward_total = rb.total;
                r.reward_format = rb.format;
                r.reward_accuracy = rb.accuracy;
                rewards.push_back(rb.total);
                group.rollouts.push_back(std::move(r));
            }
            std::vector<double> advs = group_advantages(rewards);
            for (std::size_t g = 0; g < group.rollouts.size(); ++g) {
                Rollout& r = group.rollouts[g];
                r.advantage = advs[g];
                if (cfg.entropy_source == EntropySource::rescored) {
                    auto [lp, ent] =
                        logprob_and_entropy(res.policy, group.task.context, r.tokens);
                    (void)lp;
                    double sum = 0.0;
                    for (double e : ent) sum += e;
                    r.seq_entropy = sum / static_cast<double>(ent.size());
                }
                batch_entropies.push_back(r.seq_entropy);
            }
            group.refresh_stats();
            groups.push_back(std::move(group));
        }

        // moving-average threshold for this step, then per-rollout shaping against it
        if (shaping_active) uadt = update_threshold(uadt, batch_entropies);
        for (GroupBatch& group : groups) {
            for (Rollout& r : group.rollouts) {
                r.shaped_advantage =
                    shaping_active ? shape_advantage(uadt, r.advantage, r.seq_entropy)
                                   : r.advantage;
                res.triples.push_back({step, r.seq_entropy, r.advantage, r.shaped_advantage});
                reward_sum += r.reward_total;
                format_sum += r.reward_format;
                adv_sum += r.advantage;
                shaped_sum += r.shaped_advantage;
                ++rollout_count;
            }
        }

        double objective_at_start = 0.0;
        double kl_mean = 0.0;
        try {
            for (int e = 0; e < cfg.grpo.epochs_per_batch; ++e) {
                std::vector<double> grad(res.policy.num_params(), 0.0);
                double obj = 0.0;
                const double inv_q = 1.0 / static_cast<double>(groups.size());
                for (const GroupBatch& group : groups) {
                    std::vector<double> shaped;
                    for (const Rollout& r : group.rollouts) shaped.push_back(r.shaped_advantage);
                    auto [v, g] =
                        grpo_objective(res.policy, old_policy, ref, group, shaped, cfg.grpo);
                    obj += v * inv_q;
                    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] -= g[j] * inv_q;
                }
                if (e == 0) {
                    objective_at_start = obj;
                    // KL to the frozen reference at the pre-update policy
                    double klsum = 0.0;
                    std::size_t n = 0;
                    for (const GroupBatch& group : groups) {
                        for (const Rollout& r : group.rollouts) {
                            auto [pol_lp, e1] =
                                logprob_and_entropy(res.policy, group.task.context, r.tokens);
                            auto [ref_lp, e2] =
                                logprob_and_entropy(ref, group.task.context, r.tokens);
                            (void)e1;
                            (void)e2;
                            klsum += token_kl(pol_lp, ref_lp);
                            ++n;
                        }
                    }
                    kl_mean = klsum / static_cast<double>(n);
                }
                opt.step(res.policy.params(), grad);  // grad holds the negated objective
            }
        } catch (const NumericalError& e) {
            // retain the last good parameters, flush what we have, then abort
            save_checkpoint(old_policy, cfg.checkpoint_out);
            write_metrics(res.metrics, cfg.metrics_out);
            write_triples(res.triples, cfg.rollouts_out);
            throw NumericalError("run_rl: step " + std::to_string(step) + ": " + e.what());
        }

        double entropy_mean = 0.0;
        for (double h : batch_entropies) entropy_mean += h;
        entropy_mean /= static_cast<double>(batch_entropies.size());

        StepMetrics m;
        m.step = step;
        m.mean_reward = reward_sum / static_cast<double>(rollout_count);
        m.mean_format_rate = format_sum / static_cast<double>(rollout_count);
        m.mean_seq_entropy = entropy_mean;
        m.tau = uadt.tau;
        m.mean_advantage = adv_sum / static_cast<double>(rollout_count);
        m.mean_shaped_advantage = shaped_sum / static_cast<double>(rollout_count);
        m.kl = kl_mean;
        m.objective = objective_at_start;
        m.wall_time =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.metrics.push_back(m);

        if (step % cfg.eval_every == 0 || step == cfg.rl_steps) {
            save_checkpoint(res.policy, cfg.checkpoint_out);
            if (data.has_eval) {
                EvalReport rep = evaluate(res.policy, data.eval, {}, cfg.max_len);
                eval_log << step << "," << rep.to_row() << "\n";
                eval_log.flush();
            }
        }
    }

    write_metrics(res.metrics, cfg.metrics_out);
    write_triples(res.triples, cfg.rollouts_out);
    save_checkpoint(res.policy, cfg.checkpoint_out);
    return res;
}

long Heatmap::total_count() const {
    long sum = 0;
    for (long c : counts) sum += c;
    return sum;
}

Heatmap build_heatmap(const std::vector<RolloutTriple>& triples, int bins_x, int bins_y) {
    if (bins_x < 1 || bins_y < 1) throw DomainError("build_heatmap: bins must be >= 1");
    Heatmap hm;
    hm.bins_x = bins_x;
    hm.bins_y = bins_y;
    if (triples.empty()) return hm;

    double x_lo = triples[0].seq_entropy, x_hi = x_lo;
    double y_lo = triples[0].advantage, y_hi = y_lo;
    for (const RolloutTriple& t : triples) {
        x_lo = std::min(x_lo, t.seq_entropy);
        x_hi = std::max(x_hi, t.seq_entropy);
        y_lo = std::min(y_lo, t.advantage);
        y_hi = std::max(y_hi, t.advantage);
    }
    if (x_hi == x_lo) x_hi = x_lo + 1.0;  // degenerate range: one occupied column
    if (y_hi == y_lo) y_hi = y_lo + 1.0;

    hm.x_edges.resize(bins_x + 1);
    hm.y_edges.resize(bins_y + 1);
    for (int i = 0; i <= bins_x; ++i) hm.x_edges[i] = x_lo + (x_hi - x_lo) * i / bins_x;
    for (int j = 0; j <= bins_y; ++j) hm.y_edges[j] = y_lo + (y_hi - y_lo) * j / bins_y;

    hm.counts.assign(static_cast<std::size_t>(bins_x) * bins_y, 0);
    std::vector<double> shaped_sum(hm.counts.size(), 0.0);
    for (const RolloutTriple& t : triples) {
        int bx = std::min(bins_x - 1,
                          static_cast<int>((t.seq_entropy - x_lo) / (x_hi - x_lo) * bins_x));
        int by = std::min(bins_y - 1,
                          static_cast<int>((t.advantage - y_lo) / (y_hi - y_lo) * bins_y));
        const std::size_t idx = static_cast<std::size_t>(bx) * bins_y + by;
        hm.counts[idx]++;
        shaped_sum[idx] += t.shaped_advantage;
    }
    hm.mean_shaped.assign(hm.counts.size(), 0.0);
    for (std::size_t i = 0; i < hm.counts.size(); ++i) {
        if (hm.counts[i] > 0) hm.mean_shaped[i] = shaped_sum[i] / hm.counts[i];
    }
    return hm;
}

void write_heatmap(const Heatmap& hm, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("write_heatmap: cannot open " + path);
    out.precision(17);
    out << "x_bin,y_bin,x_lo,x_hi,y_lo,y_hi,count,mean_shaped_advantage\n";
    if (hm.counts.empty()) return;
    for (int bx = 0; bx < hm.bins_x; ++bx) {
        for (int by = 0; by < hm.bins_y; ++by) {
            const std::size_t idx = static_cast<std::size_t>(bx) * hm.bins_y + by;
            out << bx << "," << by << "," << hm.x_edges[bx] << "," << hm.x_edges[bx + 1] << ","
                << hm.y_edges[by] << "," << hm.y_edges[by + 1] << "," << hm.counts[idx] << ","
                << hm.mean_shaped[idx] << "\n";
        }
    }
}

void export_heatmap(const std::string& log_path, int bins_x, int bins_y,
                    const std::string& out_path) {
    write_heatmap(build_heatmap(load_triples(log_path), bins_x, bins_y), out_path);
}

namespace {

std::vector<long> entropy_histogram(const std::vector<RolloutTriple>& triples, long step_lo,
                                    long step_hi, int bins, double range_hi) {
    std::vector<long> hist(bins, 0);
    for (const RolloutTriple& t : triples) {
        if (t.step < step_lo || t.step > step_hi) continue;
        int b = static_cast<int>(t.seq_entropy / range_hi * bins);
        b = std::clamp(b, 0, bins - 1);
        hist[b]++;
    }
    return hist;
}

double median_entropy_in_window(const std::vector<RolloutTriple>& triples, long step_lo,
                                long step_hi) {
    std::vector<double> vals;
    for (const RolloutTriple& t : triples) {
        if (t.step >= step_lo && t.step <= step_hi) vals.push_back(t.seq_entropy);
    }
    return vals.empty() ? 0.0 : median(std::move(vals));
}

}  // namespace

AblationReport run_ablation(const TrainConfig& cfg, const std::vector<std::uint64_t>& seeds) {
    if (seeds.size() < 2) throw ConfigError("run_ablation: need at least 2 seeds");
    cfg.validate();

    AblationReport report;
    report.seeds = seeds;

    const int hist_bins = 20;
    const double hist_hi = std::log(static_cast<double>(vocab::kSize));
    const long window = std::max<long>(1, cfg.rl_steps / 10);
    const std::string prefix = cfg.ablation_out;

    for (std::size_t si = 0; si < seeds.size(); ++si) {
        const std::string seed_tag = prefix + ".seed" + std::to_string(seeds[si]);

        TrainConfig sft_cfg = cfg;
        sft_cfg.seed = seeds[si];
        sft_cfg.checkpoint_out = seed_tag + ".sft.ckpt";
        sft_cfg.metrics_out = seed_tag + ".sft.csv";
        PolicySnapshot start = run_sft(sft_cfg).policy;

        for (bool enable_uadt : {false, true}) {
            TrainConfig rl_cfg = cfg;
            rl_cfg.seed = seeds[si];
            rl_cfg.uadt_enabled = enable_uadt;
            const std::string arm_tag = seed_tag + (enable_uadt ? ".uadt" : ".vanilla");
            rl_cfg.checkpoint_out = arm_tag + ".ckpt";
            rl_cfg.metrics_out = arm_tag + ".csv";
            rl_cfg.rollouts_out = arm_tag + ".rollouts.csv";

            TrainResult run = run_rl(rl_cfg, start);

            AblationArm arm;
            arm.rollout_count = run.triples.size();
            arm.first_epoch_hist = entropy_histogram(run.triples, 1, window, hist_bins, hist_hi);
            arm.final_epoch_hist = entropy_histogram(run.triples, cfg.rl_steps - window + 1,
                                                     cfg.rl_steps, hist_bins, hist_hi);
            arm.median_final_entropy =
                median_entropy_in_window(run.triples, cfg.rl_steps - window + 1, cfg.rl_steps);
            arm.heatmap = build_heatmap(run.triples, 20, 20);
            write_heatmap(arm.heatmap, arm_tag + ".heatmap.csv");

            if (!cfg.eval_suite.empty()) {
                TaskSuite eval = load_suite(cfg.eval_suite, Split::eval);
                arm.final_eval_reward =
                    mean_greedy_reward(run.policy, eval, cfg.reward_weights, cfg.max_len);
            } else {
                TaskSuite train = load_suite(cfg.train_suites[0], Split::train);
                arm.final_eval_reward =
                    mean_greedy_reward(run.policy, train, cfg.reward_weights, cfg.max_len);
            }

            (enable_uadt ? report.uadt : report.vanilla).push_back(std::move(arm));
        }
    }

    std::ofstream out(cfg.ablation_out);
    if (!out) throw IoError("run_ablation: cannot open " + cfg.ablation_out);
    out.precision(6);
    out << "ablation: vanilla GRPO vs UADT-GRPO\n";
    out << "rl_steps: " << cfg.rl_steps << "  window: " << window << " steps\n\n";
    for (std::size_t si = 0; si < seeds.size(); ++si) {
        const AblationArm& v = report.vanilla[si];
        const AblationArm& u = report.uadt[si];
        out << "seed " << seeds[si] << "\n";
        out << "  final eval reward     vanilla: " << v.final_eval_reward
            << "  uadt: " << u.final_eval_reward << "\n";
        out << "  median final entropy  vanilla: " << v.median_final_entropy
            << "  uadt: " << u.median_final_entropy << "\n";
        out << "  rollouts              vanilla: " << v.rollout_count
            << "  uadt: " << u.rollout_count << "\n";
        for (const auto* arm : {&v, &u}) {
            out << "  " << (arm == &v ? "vanilla" : "uadt   ") << " entropy hist first-epoch:";
            for (long c : arm->first_epoch_hist) out << " " << c;
            out << "\n  " << (arm == &v ? "vanilla" : "uadt   ") << " entropy hist final-epoch:";
            for (long c : arm->final_epoch_hist) out << " " << c;
            out << "\n";
        }
        out << "\n";
    }
    int uadt_lower = 0;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
        if (report.uadt[si].median_final_entropy <= report.vanilla[si].median_final_entropy)
            ++uadt_lower;
    }
    out << "seeds where uadt median final entropy <= vanilla: " << uadt_lower << "/"
        << seeds.size() << "\n";
    return report;
}

}  // namespace ugrpo
