#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include "ugrpo/policy.hpp"
#include "ugrpo/tasks.hpp"

namespace ugrpo {

struct MultiLabelMetrics {
    double acc = 0.0;       // exact set match
    double jaccard = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvalReport {
    std::string suite_name;
    std::size_t n = 0;
    double format_rate = 0.0;

    std::size_t n_single = 0;
    double single_acc = 0.0;
    std::size_t n_true_false = 0;
    double true_false_acc = 0.0;

    std::size_t n_multi = 0;
    MultiLabelMetrics multi;

    std::size_t n_open = 0;
    double open_bleu = 0.0;
    double open_rouge1 = 0.0;
    double open_rougeL = 0.0;
    double open_meteor = 0.0;
    double open_mean = 0.0;

    std::string to_text() const;
    std::string to_row() const;          // flat delimiter-separated values
    static std::string row_header();
};

struct DecodeSpec {
    bool greedy = true;
    int sample_k = 1;            // candidates per instance when sampling
    std::uint64_t seed = 0;
};

MultiLabelMetrics multi_label_metrics(const std::set<int>& predicted, const std::set<int>& truth);

// Greedy decode by default; sample(k) feeds k candidates to the open-ended
// Top-k aggregator. Malformed outputs count 0 toward accuracy metrics and
// lower format_rate.
EvalReport evaluate(const PolicySnapshot& checkpoint, const TaskSuite& suite,
                    const DecodeSpec& decode = {}, int max_len = 32);

}  // namespace ugrpo
