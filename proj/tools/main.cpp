#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ugrpo/errors.hpp"
#include "ugrpo/eval.hpp"
#include "ugrpo/rng.hpp"
#include "ugrpo/tasks.hpp"
#include "ugrpo/trainer.hpp"
#include "ugrpo/vocab.hpp"

using namespace ugrpo;

int main(int argc, char** argv) {
    CLI::App app{"GRPO policy-optimization toolkit with uncertainty-aware advantage shaping"};
    app.require_subcommand(1);

    std::string config_path, checkpoint_path, suite_path, log_path, out_path, seeds_str;
    int bins_x = 20, bins_y = 20;

    auto* train = app.add_subcommand("train", "run the stage given in the config (sft or rl)");
    train->add_option("--config", config_path, "config file")->required();

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a suite");
    eval_cmd->add_option("--checkpoint", checkpoint_path, "policy checkpoint")->required();
    eval_cmd->add_option("--suite", suite_path, "eval suite file")->required();
    int sample_k = 0;
    std::uint64_t sample_seed = 0;
    int max_len = 32;
    eval_cmd->add_option("--sample-k", sample_k, "sample k candidates instead of greedy decode");
    eval_cmd->add_option("--sample-seed", sample_seed, "seed for sampled decoding");
    eval_cmd->add_option("--max-len", max_len, "decode length cap");

    auto* ablate = app.add_subcommand("ablate", "matched vanilla vs UADT runs over several seeds");
    ablate->add_option("--config", config_path, "config file")->required();
    ablate->add_option("--seeds", seeds_str, "comma-separated seed list")->required();

    auto* heat = app.add_subcommand("export-heatmap", "entropy x advantage histogram from a rollout log");
    heat->add_option("--log", log_path, "rollout-triple log file")->required();
    heat->add_option("--bins-x", bins_x, "entropy bins");
    heat->add_option("--bins-y", bins_y, "advantage bins");
    heat->add_option("--out", out_path, "output table path (default <log>.heatmap.csv)");

    auto* gen = app.add_subcommand("gen-suite", "generate a synthetic task suite file");
    std::string gen_kind = "mcq";
    int gen_n = 100, gen_options = 4, gen_shift = 2;
    double gen_noise = 0.0;
    bool gen_multi = false;
    std::uint64_t gen_seed = 0;
    gen->add_option("--kind", gen_kind, "mcq or open");
    gen->add_option("--n", gen_n, "instance count");
    gen->add_option("--options", gen_options, "MCQ option count");
    gen->add_option("--noise", gen_noise, "MCQ evidence noise in [0,1]");
    gen->add_flag("--multi", gen_multi, "multi-answer MCQ");
    gen->add_option("--shift", gen_shift, "open-ended transform length");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", out_path, "output suite path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            TrainConfig cfg = load_config(config_path);
            if (cfg.stage == Stage::sft) {
                run_sft(cfg);
            } else {
                PolicySnapshot init =
                    cfg.init_checkpoint.empty()
                        ? PolicySnapshot::random_init(vocab::kSize, cfg.context_dim,
                                                      cfg.hidden_dim, mix_seed(cfg.seed, 0x696e6974))
                        : load_checkpoint(cfg.init_checkpoint);
                run_rl(cfg, init);
            }
        } else if (*eval_cmd) {
            PolicySnapshot policy = load_checkpoint(checkpoint_path);
            TaskSuite suite = load_suite(suite_path, Split::eval);
            DecodeSpec decode;
            if (sample_k > 0) {
                decode.greedy = false;
                decode.sample_k = sample_k;
                decode.seed = sample_seed;
            }
            EvalReport rep = evaluate(policy, suite, decode, max_len);
            std::cout << rep.to_text();
            std::cout << EvalReport::row_header() << "\n" << rep.to_row() << "\n";
        } else if (*ablate) {
            TrainConfig cfg = load_config(config_path);
            std::vector<std::uint64_t> seeds;
            std::stringstream ss(seeds_str);
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (!item.empty()) seeds.push_back(std::stoull(item));
            }
            run_ablation(cfg, seeds);
            std::cout << "report written to " << cfg.ablation_out << "\n";
        } else if (*heat) {
            if (out_path.empty()) out_path = log_path + ".heatmap.csv";
            export_heatmap(log_path, bins_x, bins_y, out_path);
            std::cout << "heatmap written to " << out_path << "\n";
        } else if (*gen) {
            TaskSuite suite;
            if (gen_kind == "mcq") {
                suite = gen_mcq_suite(gen_n, gen_options, gen_noise, gen_multi, gen_seed);
            } else if (gen_kind == "open") {
                suite = gen_open_suite(gen_n, gen_shift, gen_seed);
            } else {
                throw ConfigError("gen-suite: kind must be mcq or open");
            }
            save_suite(suite, out_path);
            std::cout << suite.instances.size() << " tasks written to " << out_path << "\n";
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const DomainError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
