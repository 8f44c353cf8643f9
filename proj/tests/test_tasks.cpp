#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "test_support.hpp"
#include "ugrpo/errors.hpp"
#include "ugrpo/tasks.hpp"
#include "ugrpo/vocab.hpp"

using namespace ugrpo;
namespace v = ugrpo::vocab;
namespace fs = std::filesystem;

namespace {

// frequency decoder over the evidence slots, blind to the generator internals
std::set<int> decode_evidence(const TaskInstance& t) {
    std::map<int, int> counts;
    for (std::size_t i = 1; i < t.context.size(); ++i) counts[t.context[i]]++;
    if (t.kind == TaskKind::single_mcq || t.kind == TaskKind::true_false) {
        int best = -1, best_count = -1;
        for (auto [tok, c] : counts) {
            if (c > best_count) { best = tok; best_count = c; }
        }
        return {best};
    }
    std::set<int> all;
    for (auto [tok, c] : counts) all.insert(tok);
    return all;
}

double decoder_accuracy(const TaskSuite& suite) {
    double sum = 0.0;
    for (const TaskInstance& t : suite.instances) {
        sum += iou_accuracy(decode_evidence(t), t.key.truth_labels);
    }
    return sum / static_cast<double>(suite.instances.size());
}

std::string temp_file(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("suite generation is deterministic in the seed") {
    TaskSuite a = gen_mcq_suite(20, 4, 0.3, true, 111);
    TaskSuite b = gen_mcq_suite(20, 4, 0.3, true, 111);
    TaskSuite c = gen_mcq_suite(20, 4, 0.3, true, 112);
    REQUIRE(a.instances.size() == 20);
    bool same = true, diff = false;
    for (int i = 0; i < 20; ++i) {
        same = same && a.instances[i].context == b.instances[i].context &&
               a.instances[i].key.truth_labels == b.instances[i].key.truth_labels;
        diff = diff || a.instances[i].context != c.instances[i].context;
    }
    CHECK(same);
    CHECK(diff);
}

TEST_CASE("noiseless evidence is perfectly decodable") {
    for (bool multi : {false, true}) {
        TaskSuite suite = gen_mcq_suite(200, 4, 0.0, multi, 2024);
        CHECK(decoder_accuracy(suite) == 1.0);
    }
}

TEST_CASE("full noise drives the single-choice decoder to chance") {
    TaskSuite suite = gen_mcq_suite(10000, 4, 1.0, false, 31337);
    const double acc = decoder_accuracy(suite);
    CHECK(acc > 0.25 - 0.05);
    CHECK(acc < 0.25 + 0.05);
}

TEST_CASE("decoder accuracy decreases as channel noise rises") {
    double prev = 2.0;
    for (double noise : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        TaskSuite suite = gen_mcq_suite(4000, 4, noise, false, 555);
        const double acc = decoder_accuracy(suite);
        CHECK(acc < prev);
        prev = acc;
        for (const TaskInstance& t : suite.instances) CHECK(t.difficulty == noise);
    }
}

TEST_CASE("generated reasoning targets are well formed and score full accuracy") {
    TaskSuite mcq = gen_mcq_suite(30, 5, 0.4, true, 77);
    for (const TaskInstance& t : mcq.instances) {
        REQUIRE(t.cot_target.has_value());
        ParsedResponse p = parse_response(*t.cot_target, t.kind);
        REQUIRE(p.well_formed);
        RewardBreakdown rb = compute_reward(p, t.key);
        CHECK(rb.accuracy == 1.0);
        CHECK(rb.format == 1.0);
    }
    TaskSuite open = gen_open_suite(30, 3, 78);
    for (const TaskInstance& t : open.instances) {
        REQUIRE(t.cot_target.has_value());
        ParsedResponse p = parse_response(*t.cot_target, t.kind);
        REQUIRE(p.well_formed);
        CHECK(*p.answer == t.key.reference);
        RewardBreakdown rb = compute_reward(p, t.key);
        CHECK(rb.accuracy > 0.99);
    }
}

TEST_CASE("open-ended references apply the cyclic payload shift to the context span") {
    const int len = 5;
    TaskSuite suite = gen_open_suite(25, len, 99);
    for (const TaskInstance& t : suite.instances) {
        REQUIRE(t.context.size() == 1 + kOpenSpanLen);
        REQUIRE(t.key.reference.size() == kOpenSpanLen);
        CHECK(t.context[0] == v::kMarkOpen);
        for (int j = 0; j < kOpenSpanLen; ++j) {
            CHECK(t.key.reference[j] == shift_payload(t.context[1 + j], len));
        }
        CHECK(t.difficulty == doctest::Approx(std::min(1.0, len / 8.0)).epsilon(1e-12));
    }
}

TEST_CASE("payload shift wraps around the payload alphabet") {
    CHECK(shift_payload(v::payload_token(0), 1) == v::payload_token(1));
    CHECK(shift_payload(v::payload_token(7), 1) == v::payload_token(0));
    CHECK(shift_payload(v::payload_token(3), 8) == v::payload_token(3));
    CHECK_THROWS_AS(shift_payload(v::kEos, 1), DomainError);
}

TEST_CASE("suite save and load round trip") {
    TaskSuite mcq = gen_mcq_suite(12, 4, 0.5, true, 808);
    TaskSuite open = gen_open_suite(8, 2, 809);
    mcq.instances.insert(mcq.instances.end(), open.instances.begin(), open.instances.end());
    const std::string path = temp_file("ugrpo_suite_rt.jsonl");
    save_suite(mcq, path);
    TaskSuite back = load_suite(path, Split::train);
    REQUIRE(back.instances.size() == mcq.instances.size());
    for (std::size_t i = 0; i < mcq.instances.size(); ++i) {
        const TaskInstance& a = mcq.instances[i];
        const TaskInstance& b = back.instances[i];
        CHECK(a.id == b.id);
        CHECK(a.kind == b.kind);
        CHECK(a.context == b.context);
        CHECK(a.key.options == b.key.options);
        CHECK(a.key.truth_labels == b.key.truth_labels);
        CHECK(a.key.reference == b.key.reference);
        CHECK(a.difficulty == b.difficulty);
        CHECK(a.cot_target == b.cot_target);
    }
    fs::remove(path);
}

TEST_CASE("load errors name the offending path and line") {
    const std::string path = temp_file("ugrpo_suite_bad.jsonl");
    TaskSuite good = gen_mcq_suite(1, 4, 0.0, false, 1);

    auto expect_error_at = [&](const std::string& body, const std::string& needle) {
        std::ofstream out(path);
        out << body;
        out.close();
        try {
            load_suite(path);
            FAIL("expected ConfigError for: " << needle);
        } catch (const ConfigError& e) {
            const std::string msg = e.what();
            CHECK(msg.find(needle) != std::string::npos);
            CHECK(msg.find(path) != std::string::npos);
        }
    };

    std::string ok_line;
    {
        save_suite(good, path);
        std::ifstream in(path);
        std::getline(in, ok_line);
    }

    expect_error_at(ok_line + "\nnot json\n", ":2:");
    expect_error_at("{\"id\":\"x\",\"kind\":\"single_mcq\",\"context\":\"<single>\",\"options\":[\"A\"],"
                    "\"truth\":[\"A\"],\"difficulty\":0.0,\"bogus\":1}\n",
                    "unknown field");
    expect_error_at(ok_line + "\n" + ok_line + "\n", "duplicate id");
    expect_error_at("{\"id\":\"x\",\"kind\":\"single_mcq\",\"context\":\"<single>\",\"options\":[\"A\"],"
                    "\"difficulty\":0.0}\n",
                    "missing field 'truth'");
    fs::remove(path);
    CHECK_THROWS_AS(load_suite(temp_file("ugrpo_no_such_suite.jsonl")), IoError);
}

TEST_CASE("an empty file loads as an empty suite") {
    const std::string path = temp_file("ugrpo_suite_empty.jsonl");
    std::ofstream(path).close();
    TaskSuite suite = load_suite(path, Split::eval);
    CHECK(suite.instances.empty());
    CHECK(suite.split == Split::eval);
    fs::remove(path);
}

TEST_CASE("generator argument validation") {
    CHECK_THROWS_AS(gen_mcq_suite(0, 4, 0.0, false, 1), DomainError);
    CHECK_THROWS_AS(gen_mcq_suite(5, 1, 0.0, false, 1), DomainError);
    CHECK_THROWS_AS(gen_open_suite(5, 0, 1), DomainError);
}
