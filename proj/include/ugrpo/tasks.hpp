#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ugrpo/rewards.hpp"

namespace ugrpo {

// Synthetic task: the context token sequence stands in for the image set and
// question; the answer key carries ground truth.
struct TaskInstance {
    std::string id;
    TaskKind kind = TaskKind::single_mcq;
    TokenSeq context;
    AnswerKey key;
    double difficulty = 0.0;               // [0,1]
    std::optional<TokenSeq> cot_target;    // reasoning trace + answer, for SFT
};

enum class Split { train, eval };

struct TaskSuite {
    std::string name;
    std::vector<TaskInstance> instances;
    Split split = Split::train;
};

inline constexpr int kEvidenceSlots = 8;  // evidence tokens per MCQ context
inline constexpr int kOpenSpanLen = 4;    // payload span length for open-ended tasks

// MCQ generator: each instance encodes its truth labels into evidence tokens
// through a noisy channel. Slot j carries truth[j % |truth|] with probability
// (1 - noise), else a uniformly random option. difficulty = noise.
TaskSuite gen_mcq_suite(int n, int num_options, double noise, bool multi, std::uint64_t seed,
                        Split split = Split::train);

// Open-ended generator: the reference answer is the designated context span
// with each payload symbol cyclically shifted by transform_len; the CoT think
// block spells the intermediate shifts.
TaskSuite gen_open_suite(int n, int transform_len, std::uint64_t seed,
                         Split split = Split::train);

// Line-delimited JSON records, one task per line; unknown fields rejected.
TaskSuite load_suite(const std::string& path, Split split = Split::train);
void save_suite(const TaskSuite& suite, const std::string& path);

// Answer token applying the open-ended cyclic payload shift.
int shift_payload(int token, int transform_len);

}  // namespace ugrpo
