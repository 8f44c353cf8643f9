#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "test_support.hpp"
#include "ugrpo/errors.hpp"
#include "ugrpo/policy.hpp"

using namespace ugrpo;

TEST_CASE("zero params give the uniform distribution") {
    PolicySnapshot p(5, 3, 4);
    TokenDistribution d = forward_step(p, {1, 2}, {});
    for (double pr : d.probs) CHECK(pr == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(d.entropy == doctest::Approx(std::log(5.0)).epsilon(1e-12));
}

TEST_CASE("saturated logits give near-zero entropy") {
    PolicySnapshot p(2, 1, 1);
    // all weights zero except the output bias: logits are exactly (+20, -20)
    p.params()[p.off_b2()] = 20.0;
    p.params()[p.off_b2() + 1] = -20.0;
    TokenDistribution d = forward_step(p, {1}, {});
    CHECK(d.entropy < 1e-6);
    CHECK(d.probs[0] > 0.999999);
}

TEST_CASE("probabilities sum to one for random params") {
    for (int trial = 0; trial < 20; ++trial) {
        PolicySnapshot p = PolicySnapshot::random_init(5, 4, 6, 100 + trial);
        TokenDistribution d = forward_step(p, {0, 3, 4}, {1, 2});
        double sum = 0.0;
        for (double pr : d.probs) {
            CHECK(pr >= 0.0);
            sum += pr;
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
        CHECK(d.entropy >= 0.0);
        CHECK(d.entropy <= std::log(5.0) + 1e-12);
    }
}

TEST_CASE("token ids out of range are rejected") {
    PolicySnapshot p(4, 2, 2);
    CHECK_THROWS_AS(forward_step(p, {7}, {}), DomainError);
    CHECK_THROWS_AS(forward_step(p, {1}, {4}), DomainError);
    CHECK_THROWS_AS(logprob_and_entropy(p, {1}, {9}), DomainError);
    CHECK_THROWS_AS(forward_step(p, {}, {}), DomainError);
}

TEST_CASE("hand-built two-token policy matches frozen softmax values") {
    PolicySnapshot p(2, 1, 1);
    auto& w = p.params();
    w[p.off_embedding()] = 0.0;      // token 0
    w[p.off_embedding() + 1] = 1.0;  // token 1
    w[p.off_start()] = 0.5;
    w[p.off_w1()] = 1.0;
    w[p.off_w1() + 1] = 2.0;
    w[p.off_b1()] = 0.25;
    w[p.off_w2()] = 2.0;
    w[p.off_w2() + 1] = -1.0;
    w[p.off_b2()] = 0.1;
    w[p.off_b2() + 1] = -0.2;

    auto [lp, ent] = logprob_and_entropy(p, {1}, {0, 1});
    // frozen by independent evaluation of the affine stack + softmax
    CHECK(lp[0] == doctest::Approx(-0.03864025454960318).epsilon(1e-12));
    CHECK(lp[1] == doctest::Approx(-2.901366342529398).epsilon(1e-12));
    CHECK(ent.size() == 2);
}

TEST_CASE("sampling is deterministic for a fixed seed") {
    PolicySnapshot p = PolicySnapshot::random_init(6, 3, 4, 42);
    Rollout a = sample_rollout(p, {1, 2, 3}, 77, 12);
    Rollout b = sample_rollout(p, {1, 2, 3}, 77, 12);
    CHECK(a.tokens == b.tokens);
    CHECK(a.per_token_logprob == b.per_token_logprob);
    CHECK(a.per_token_entropy == b.per_token_entropy);
    CHECK(a.seq_entropy == b.seq_entropy);
}

TEST_CASE("near-one-hot policy emits its favored token then EOS") {
    // token 2 favored from the start state; once the previous token is 2,
    // EOS is favored. Built from a prev-token detector on one hidden unit.
    PolicySnapshot p(4, 1, 1);
    auto& w = p.params();
    w[p.off_embedding() + 2] = 1.0;  // emb(2) = 1, all others 0
    w[p.off_w1() + 1] = 20.0;        // hidden reads the prev embedding
    w[p.off_w2() + 0] = 40.0;        // EOS logit: 40*h - 20
    w[p.off_b2() + 0] = -20.0;
    w[p.off_w2() + 2] = -40.0;       // token-2 logit: 20 - 40*h
    w[p.off_b2() + 2] = 20.0;
    w[p.off_b2() + 1] = -50.0;
    w[p.off_b2() + 3] = -50.0;

    Rollout r = sample_rollout(p, {1}, 5, 10);
    CHECK(r.tokens == TokenSeq{2, kEosToken});
    CHECK_FALSE(r.truncated);
}

TEST_CASE("uniform policy sample frequencies match 1/4 within 1 percent") {
    PolicySnapshot p(4, 2, 2);  // all-zero params: exactly uniform
    long counts[4] = {0, 0, 0, 0};
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        Rollout r = sample_rollout(p, {1}, 900000 + i, 3);
        counts[r.tokens[0]]++;
    }
    for (long c : counts) {
        CHECK(std::abs(static_cast<double>(c) / n - 0.25) < 0.01);
    }
}

TEST_CASE("rescoring a rollout under its sampling policy reproduces the stored log-probs") {
    PolicySnapshot p = PolicySnapshot::random_init(8, 4, 5, 7);
    Rollout r = sample_rollout(p, {2, 5, 7}, 13, 10);
    auto [lp, ent] = logprob_and_entropy(p, {2, 5, 7}, r.tokens);
    for (std::size_t t = 0; t < r.tokens.size(); ++t) {
        CHECK(std::abs(lp[t] - r.per_token_logprob[t]) < 1e-9);
        CHECK(std::abs(ent[t] - r.per_token_entropy[t]) < 1e-9);
    }
    double mean = 0.0;
    for (double e : ent) mean += e;
    mean /= static_cast<double>(ent.size());
    CHECK(std::abs(mean - r.seq_entropy) < 1e-9);
}

TEST_CASE("all-zero params score every token at -log(vocab)") {
    PolicySnapshot p(6, 2, 3);
    auto [lp, ent] = logprob_and_entropy(p, {1, 2}, {3, 4, 5});
    for (double v : lp) CHECK(v == doctest::Approx(-std::log(6.0)).epsilon(1e-12));
}

TEST_CASE("analytic gradient matches finite differences on random policies") {
    for (int trial = 0; trial < 10; ++trial) {
        PolicySnapshot p = PolicySnapshot::random_init(5, 2, 3, 300 + trial);
        Rng rng(500 + trial);
        TokenSeq ctx = {1 + static_cast<int>(rng.next_index(4)),
                        1 + static_cast<int>(rng.next_index(4))};
        TokenSeq toks;
        for (int t = 0; t < 4; ++t) toks.push_back(static_cast<int>(rng.next_index(5)));

        std::vector<double> analytic = grad_logprob(p, ctx, toks);
        std::vector<double> numeric = oracle::finite_diff_grad(p, [&](const PolicySnapshot& q) {
            auto [lp, ent] = logprob_and_entropy(q, ctx, toks);
            double sum = 0.0;
            for (double v : lp) sum += v;
            return sum;
        });
        CHECK(oracle::max_rel_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("gradient vanishes for a probability-one sequence") {
    PolicySnapshot p(2, 1, 1);
    p.params()[p.off_b2()] = 40.0;
    p.params()[p.off_b2() + 1] = -40.0;
    std::vector<double> g = grad_logprob(p, {1}, {0, 0, 0});
    double norm = 0.0;
    for (double v : g) norm += v * v;
    CHECK(std::sqrt(norm) < 1e-6);
}

TEST_CASE("tokens with identical embeddings and roles get identical gradient blocks") {
    PolicySnapshot p = PolicySnapshot::random_init(6, 3, 4, 11);
    const int a = 3, b = 4;
    for (int j = 0; j < 3; ++j) {
        p.params()[p.off_embedding() + b * 3 + j] = p.params()[p.off_embedding() + a * 3 + j];
    }
    // both appear exactly once in the context and nowhere else
    std::vector<double> g = grad_logprob(p, {a, b, 1}, {2, 5});
    for (int j = 0; j < 3; ++j) {
        CHECK(g[p.off_embedding() + a * 3 + j] ==
              doctest::Approx(g[p.off_embedding() + b * 3 + j]).epsilon(1e-12));
    }
}

TEST_CASE("checkpoint round trip is bit exact") {
    PolicySnapshot p = PolicySnapshot::random_init(9, 3, 5, 123);
    const std::string path = (std::filesystem::temp_directory_path() / "ugrpo_ckpt_test").string();
    save_checkpoint(p, path);
    PolicySnapshot q = load_checkpoint(path);
    CHECK(q.vocab_size() == p.vocab_size());
    CHECK(q.context_dim() == p.context_dim());
    CHECK(q.hidden_dim() == p.hidden_dim());
    REQUIRE(q.params().size() == p.params().size());
    for (std::size_t i = 0; i < p.params().size(); ++i) CHECK(q.params()[i] == p.params()[i]);
    std::filesystem::remove(path);
}

TEST_CASE("truncation at max_len is flagged") {
    PolicySnapshot p(3, 1, 1);
    p.params()[p.off_b2() + 2] = 30.0;  // token 2 nearly always, never EOS
    Rollout r = sample_rollout(p, {1}, 3, 5);
    CHECK(r.tokens.size() == 5);
    CHECK(r.truncated);
}
