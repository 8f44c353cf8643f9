#include "ugrpo/tasks.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "ugrpo/errors.hpp"
#include "ugrpo/rng.hpp"
#include "ugrpo/vocab.hpp"

namespace ugrpo {

using nlohmann::json;

int shift_payload(int token, int transform_len) {
    if (!vocab::is_payload(token)) throw DomainError("shift_payload: not a payload token");
    const int idx = token - vocab::kPayloadBase;
    return vocab::payload_token((idx + transform_len) % vocab::kNumPayload);
}

namespace {

TokenSeq mcq_cot(const std::vector<int>& truth) {
    TokenSeq cot;
    cot.push_back(vocab::kThinkOpen);
    // evidence restated as payload symbols so the think block never collides
    // with the answer block in the previous-token channel
    for (int tok : truth) cot.push_back(vocab::payload_token(tok - vocab::kOptionBase));
    cot.push_back(vocab::kThinkClose);
    cot.push_back(vocab::kAnswerOpen);
    cot.insert(cot.end(), truth.begin(), truth.end());
    cot.push_back(vocab::kAnswerClose);
    cot.push_back(vocab::kEos);
    return cot;
}

void validate_instance(const TaskInstance& t, const std::string& where) {
    if (t.context.empty()) throw ConfigError(where + ": context must be nonempty");
    if (t.difficulty < 0.0 || t.difficulty > 1.0)
        throw ConfigError(where + ": difficulty outside [0,1]");
    switch (t.kind) {
        case TaskKind::single_mcq:
        case TaskKind::true_false:
            if (t.key.truth_labels.size() != 1)
                throw ConfigError(where + ": kind requires exactly one truth label");
            break;
        case TaskKind::multi_mcq:
            if (t.key.truth_labels.empty())
                throw ConfigError(where + ": multi_mcq requires >= 1 truth label");
            break;
        case TaskKind::open_ended:
            if (t.key.reference.empty())
                throw ConfigError(where + ": open_ended requires nonempty reference");
            break;
    }
    if (t.cot_target) {
        ParsedResponse parsed = parse_response(*t.cot_target, t.kind);
        if (!parsed.well_formed)
            throw ConfigError(where + ": cot_target does not parse as well_formed");
    }
}

}  // namespace

TaskSuite gen_mcq_suite(int n, int num_options, double noise, bool multi, std::uint64_t seed,
                        Split split) {
    if (n < 1) throw DomainError("gen_mcq_suite: n must be >= 1");
    if (num_options < 2 || num_options > vocab::kNumOptions)
        throw DomainError("gen_mcq_suite: num_options must be in [2," +
                          std::to_string(vocab::kNumOptions) + "]");

    Rng rng(mix_seed(seed, 0x6d6371));
    TaskSuite suite;
    suite.name = (multi ? "mcq_multi" : "mcq_single");
    suite.split = split;
    suite.instances.reserve(n);

    std::set<int> options;
    for (int k = 0; k < num_options; ++k) options.insert(vocab::option_token(k));

    for (int i = 0; i < n; ++i) {
        TaskInstance t;
        t.id = suite.name + "_" + std::to_string(seed) + "_" + std::to_string(i);
        t.kind = multi ? TaskKind::multi_mcq : TaskKind::single_mcq;
        t.difficulty = noise;
        t.key.kind = t.kind;
        t.key.options = options;

        const int truth_count =
            multi ? 1 + static_cast<int>(rng.next_index(std::min(3, num_options))) : 1;
        std::vector<int> pool;
        for (int k = 0; k < num_options; ++k) pool.push_back(vocab::option_token(k));
        // truth labels drawn uniformly without replacement (partial shuffle)
        for (int k = 0; k < truth_count; ++k) {
            std::size_t j = k + rng.next_index(pool.size() - k);
            std::swap(pool[k], pool[j]);
        }
        std::vector<int> truth(pool.begin(), pool.begin() + truth_count);
        std::sort(truth.begin(), truth.end());
        t.key.truth_labels.insert(truth.begin(), truth.end());

        t.context.push_back(multi ? vocab::kMarkMulti : vocab::kMarkSingle);
        for (int slot = 0; slot < kEvidenceSlots; ++slot) {
            const int intended = truth[slot % truth.size()];
            if (rng.next_double() < noise) {
                t.context.push_back(vocab::option_token(
                    static_cast<int>(rng.next_index(num_options))));
            } else {
                t.context.push_back(intended);
            }
        }
        t.cot_target = mcq_cot(truth);
        validate_instance(t, "gen_mcq_suite");
        suite.instances.push_back(std::move(t));
    }
    return suite;
}

TaskSuite gen_open_suite(int n, int transform_len, std::uint64_t seed, Split split) {
    if (n < 1) throw DomainError("gen_open_suite: n must be >= 1");
    if (transform_len < 1) throw DomainError("gen_open_suite: transform_len must be >= 1");

    Rng rng(mix_seed(seed, 0x6f70656e));
    TaskSuite suite;
    suite.name = "open_shift" + std::to_string(transform_len);
    suite.split = split;
    suite.instances.reserve(n);

    for (int i = 0; i < n; ++i) {
        TaskInstance t;
        t.id = suite.name + "_" + std::to_string(seed) + "_" + std::to_string(i);
        t.kind = TaskKind::open_ended;
        t.difficulty = std::min(1.0, static_cast<double>(transform_len) / vocab::kNumPayload);
        t.key.kind = TaskKind::open_ended;

        TokenSeq span;
        for (int j = 0; j < kOpenSpanLen; ++j)
            span.push_back(vocab::payload_token(static_cast<int>(rng.next_index(vocab::kNumPayload))));
        t.context.push_back(vocab::kMarkOpen);
        t.context.insert(t.context.end(), span.begin(), span.end());

        for (int tok : span) t.key.reference.push_back(shift_payload(tok, transform_len));

        TokenSeq cot;
        cot.push_back(vocab::kCaptionOpen);
        cot.insert(cot.end(), span.begin(), span.end());
        cot.push_back(vocab::kCaptionClose);
        cot.push_back(vocab::kThinkOpen);
        for (int s = 1; s <= transform_len; ++s) {
            for (int tok : span) cot.push_back(shift_payload(tok, s));
        }
        cot.push_back(vocab::kThinkClose);
        cot.push_back(vocab::kAnswerOpen);
        cot.insert(cot.end(), t.key.reference.begin(), t.key.reference.end());
        cot.push_back(vocab::kAnswerClose);
        cot.push_back(vocab::kEos);
        t.cot_target = cot;

        validate_instance(t, "gen_open_suite");
        suite.instances.push_back(std::move(t));
    }
    return suite;
}

namespace {

const std::set<std::string> kKnownFields = {"id",      "kind",       "context", "options",
                                            "truth",   "difficulty", "cot_target"};

std::string line_err(const std::string& path, std::size_t line, const std::string& msg) {
    return path + ":" + std::to_string(line) + ": " + msg;
}

}  // namespace

TaskSuite load_suite(const std::string& path, Split split) {
    std::ifstream in(path);
    if (!in) throw IoError("load_suite: cannot open " + path);

    TaskSuite suite;
    suite.name = std::filesystem::path(path).stem().string();
    suite.split = split;

    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ConfigError(line_err(path, lineno, std::string("invalid JSON: ") + e.what()));
        }
        if (!rec.is_object()) throw ConfigError(line_err(path, lineno, "record must be an object"));
        for (const auto& [key, _] : rec.items()) {
            if (!kKnownFields.count(key))
                throw ConfigError(line_err(path, lineno, "unknown field '" + key + "'"));
        }
        for (const char* field : {"id", "kind", "context", "truth", "difficulty"}) {
            if (!rec.contains(field))
                throw ConfigError(line_err(path, lineno, std::string("missing field '") + field + "'"));
        }

        TaskInstance t;
        try {
            t.id = rec.at("id").get<std::string>();
            t.kind = kind_from_name(rec.at("kind").get<std::string>());
            t.key.kind = t.kind;
            t.context = vocab::parse(rec.at("context").get<std::string>());
            t.difficulty = rec.at("difficulty").get<double>();
            if (t.kind == TaskKind::open_ended) {
                t.key.reference = vocab::parse(rec.at("truth").get<std::string>());
            } else {
                if (!rec.contains("options"))
                    throw ConfigError("missing field 'options'");
                for (const auto& name : rec.at("options"))
                    t.key.options.insert(vocab::token_id(name.get<std::string>()));
                for (const auto& name : rec.at("truth"))
                    t.key.truth_labels.insert(vocab::token_id(name.get<std::string>()));
            }
            if (rec.contains("cot_target"))
                t.cot_target = vocab::parse(rec.at("cot_target").get<std::string>());
        } catch (const ConfigError& e) {
            throw ConfigError(line_err(path, lineno, e.what()));
        } catch (const std::exception& e) {
            throw ConfigError(line_err(path, lineno, std::string("bad record: ") + e.what()));
        }

        if (!seen_ids.insert(t.id).second)
            throw ConfigError(line_err(path, lineno, "duplicate id '" + t.id + "'"));
        try {
            validate_instance(t, "record");
        } catch (const ConfigError& e) {
            throw ConfigError(line_err(path, lineno, e.what()));
        }
        suite.instances.push_back(std::move(t));
    }
    return suite;
}

void save_suite(const TaskSuite& suite, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_suite: cannot open " + path);
    for (const TaskInstance& t : suite.instances) {
        json rec;
        rec["id"] = t.id;
        rec["kind"] = kind_name(t.kind);
        rec["context"] = vocab::render(t.context);
        rec["difficulty"] = t.difficulty;
        if (t.kind == TaskKind::open_ended) {
            rec["truth"] = vocab::render(t.key.reference);
        } else {
            json opts = json::array(), truth = json::array();
            for (int tok : t.key.options) opts.push_back(vocab::token_name(tok));
            for (int tok : t.key.truth_labels) truth.push_back(vocab::token_name(tok));
            rec["options"] = opts;
            rec["truth"] = truth;
        }
        if (t.cot_target) rec["cot_target"] = vocab::render(*t.cot_target);
        out << rec.dump() << "\n";
    }
    if (!out) throw IoError("save_suite: write failed for " + path);
}

}  // namespace ugrpo
