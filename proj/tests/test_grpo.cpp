#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "ugrpo/errors.hpp"
#include "ugrpo/grpo.hpp"

using namespace ugrpo;

namespace {

GroupBatch make_group(const PolicySnapshot& sampler, int g, std::uint64_t seed) {
    GroupBatch group;
    group.task.id = "t0";
    group.task.context = {1, 2};
    for (int i = 0; i < g; ++i) {
        Rollout r = sample_rollout(sampler, group.task.context, seed + i, 6);
        r.reward_total = 0.25 * static_cast<double>(i % 4);
        group.rollouts.push_back(std::move(r));
    }
    group.refresh_stats();
    return group;
}

}  // namespace

TEST_CASE("group advantages for rewards (1,0)") {
    std::vector<double> adv = group_advantages({1.0, 0.0});
    CHECK(adv[0] == doctest::Approx(0.5 / (0.5 + 1e-8)).epsilon(1e-12));
    CHECK(adv[1] == doctest::Approx(-0.5 / (0.5 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("identical rewards give zero advantages") {
    for (double a : group_advantages({0.75, 0.75, 0.75, 0.75})) CHECK(a == 0.0);
    CHECK_THROWS_AS(group_advantages({1.0}), DomainError);
}

TEST_CASE("advantages have near-zero mean and near-unit variance when rewards spread") {
    Rng rng(66);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> rewards(8);
        for (double& r : rewards) r = 0.25 * static_cast<double>(rng.next_index(5));
        std::vector<double> adv = group_advantages(rewards);
        double mean = 0.0, var = 0.0;
        for (double a : adv) mean += a;
        mean /= 8.0;
        for (double a : adv) var += (a - mean) * (a - mean);
        var /= 8.0;
        CHECK(std::abs(mean) < 1e-9);
        bool all_equal = true;
        for (double r : rewards) all_equal = all_equal && (r == rewards[0]);
        if (!all_equal) CHECK(std::abs(var - 1.0) < 1e-6);
    }
}

TEST_CASE("token kl is zero for identical log-probs and matches the one-token example") {
    std::vector<double> lp = {-0.5, -1.25, -0.1};
    CHECK(token_kl(lp, lp) == 0.0);
    // pol = log 0.5, ref = log 0.5 + 1: k = e - 1 - 1
    CHECK(token_kl({std::log(0.5)}, {std::log(0.5) + 1.0}) ==
          doctest::Approx(std::exp(1.0) - 2.0).epsilon(1e-12));
    CHECK_THROWS_AS(token_kl({-1.0}, {-1.0, -2.0}), DomainError);
}

TEST_CASE("token kl is nonnegative for random inputs") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> a(5), b(5);
        for (int t = 0; t < 5; ++t) {
            a[t] = -3.0 * rng.next_double();
            b[t] = -3.0 * rng.next_double();
        }
        CHECK(token_kl(a, b) >= 0.0);
    }
}

TEST_CASE("at the old policy with zero kl weight the objective is the mean shaped advantage") {
    PolicySnapshot p = PolicySnapshot::random_init(5, 2, 3, 21);
    GroupBatch group = make_group(p, 4, 400);
    std::vector<double> shaped = {0.8, -0.3, 1.5, -2.0};
    GrpoConfig cfg;
    cfg.kl_beta = 0.0;
    auto [val, grad] = grpo_objective(p, p, p, group, shaped, cfg);
    double mean = 0.0;
    for (double a : shaped) mean += a;
    mean /= 4.0;
    CHECK(val == doctest::Approx(mean).epsilon(1e-12));

    // at ratio 1 the clip window never binds, so clip_eps is irrelevant
    cfg.clip_eps = 0.01;
    auto [val2, grad2] = grpo_objective(p, p, p, group, shaped, cfg);
    CHECK(val2 == doctest::Approx(val).epsilon(1e-12));
    for (std::size_t i = 0; i < grad.size(); ++i) {
        CHECK(grad2[i] == doctest::Approx(grad[i]).epsilon(1e-12));
    }
}

TEST_CASE("objective gradient matches finite differences away from the old policy") {
    PolicySnapshot old_policy = PolicySnapshot::random_init(5, 2, 3, 31);
    PolicySnapshot ref_policy = PolicySnapshot::random_init(5, 2, 3, 32);
    GroupBatch group = make_group(old_policy, 4, 4100);
    GrpoConfig cfg;
    std::vector<double> shaped = {1.2, -0.9, 0.4, -0.1};

    for (int trial = 0; trial < 5; ++trial) {
        // large perturbation so some ratios leave the clip window
        PolicySnapshot policy = old_policy;
        Rng rng(800 + trial);
        for (double& w : policy.params()) w += 0.4 * (rng.next_double() - 0.5);

        auto [val, analytic] = grpo_objective(policy, old_policy, ref_policy, group, shaped, cfg);
        std::vector<double> numeric = oracle::finite_diff_grad(policy, [&](const PolicySnapshot& q) {
            return grpo_objective(q, old_policy, ref_policy, group, shaped, cfg).first;
        });
        CHECK(oracle::max_rel_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("clipping actually engages for a large policy shift") {
    PolicySnapshot old_policy = PolicySnapshot::random_init(5, 2, 3, 51);
    PolicySnapshot policy = old_policy;
    Rng shift_rng(52);
    for (double& w : policy.params()) w += 1.5 * (shift_rng.next_double() - 0.5);
    GroupBatch group = make_group(old_policy, 4, 5100);
    GrpoConfig tight, loose;
    tight.kl_beta = 0.0;
    loose.kl_beta = 0.0;
    tight.clip_eps = 0.05;
    loose.clip_eps = 0.9;
    std::vector<double> shaped = {1.0, 1.0, 1.0, 1.0};
    auto [vt, gt] = grpo_objective(policy, old_policy, old_policy, group, shaped, tight);
    auto [vl, gl] = grpo_objective(policy, old_policy, old_policy, group, shaped, loose);
    // a tighter window can only lower the clipped surrogate
    CHECK(vt <= vl + 1e-12);
    CHECK(vt != doctest::Approx(vl).epsilon(1e-9));
}

TEST_CASE("scaling all shaped advantages scales the kl-free objective exactly") {
    PolicySnapshot old_policy = PolicySnapshot::random_init(5, 2, 3, 61);
    PolicySnapshot policy = old_policy;
    Rng rng(62);
    for (double& w : policy.params()) w += 0.2 * (rng.next_double() - 0.5);
    GroupBatch group = make_group(old_policy, 4, 6100);
    GrpoConfig cfg;
    cfg.kl_beta = 0.0;
    std::vector<double> shaped = {0.7, -0.2, 1.1, 0.3};
    auto [v1, g1] = grpo_objective(policy, old_policy, old_policy, group, shaped, cfg);
    const double c = 3.0;
    for (double& a : shaped) a *= c;
    auto [v2, g2] = grpo_objective(policy, old_policy, old_policy, group, shaped, cfg);
    CHECK(v2 == doctest::Approx(c * v1).epsilon(1e-12));
    for (std::size_t i = 0; i < g1.size(); ++i) {
        CHECK(g2[i] == doctest::Approx(c * g1[i]).epsilon(1e-10));
    }
}

TEST_CASE("sft loss is log vocab for the uniform policy") {
    PolicySnapshot p(27, 4, 8);
    auto [loss, grad] = sft_objective(p, {1, 2, 3}, {5, 6, 0});
    CHECK(loss == doctest::Approx(std::log(27.0)).epsilon(1e-12));
}

TEST_CASE("sft loss is tiny for a saturated policy on its own target") {
    PolicySnapshot p(2, 1, 1);
    p.params()[p.off_b2()] = 40.0;
    p.params()[p.off_b2() + 1] = -40.0;
    auto [loss, grad] = sft_objective(p, {1}, {0, 0});
    CHECK(loss < 1e-6);
    CHECK_THROWS_AS(sft_objective(p, {1}, {}), DomainError);
}

TEST_CASE("sft gradient matches finite differences") {
    for (int trial = 0; trial < 5; ++trial) {
        PolicySnapshot p = PolicySnapshot::random_init(6, 3, 4, 700 + trial);
        TokenSeq ctx = {1, 4};
        TokenSeq target = {2, 5, 3, 0};
        auto [loss, analytic] = sft_objective(p, ctx, target);
        std::vector<double> numeric = oracle::finite_diff_grad(p, [&](const PolicySnapshot& q) {
            return sft_objective(q, ctx, target).first;
        });
        CHECK(oracle::max_rel_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("adamw first step moves each param by about lr against the gradient sign") {
    std::vector<double> params = {1.0, -2.0, 0.5};
    std::vector<double> grad = {3.0, -0.4, 0.0};
    AdamW opt(3, 0.01);
    opt.step(params, grad);
    CHECK(params[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
    CHECK(params[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
    CHECK(params[2] == 0.5);
}

TEST_CASE("adamw minimizes a quadratic") {
    std::vector<double> params = {4.0, -3.0};
    AdamW opt(2, 0.1);
    for (int i = 0; i < 500; ++i) {
        std::vector<double> grad = {2.0 * params[0], 2.0 * params[1]};
        opt.step(params, grad);
    }
    CHECK(std::abs(params[0]) < 1e-2);
    CHECK(std::abs(params[1]) < 1e-2);
}

TEST_CASE("weight decay pulls parameters toward zero even with zero gradient") {
    std::vector<double> params = {2.0};
    AdamW opt(1, 0.1, 0.9, 0.999, 1e-8, 0.1);
    std::vector<double> zero = {0.0};
    for (int i = 0; i < 10; ++i) opt.step(params, zero);
    CHECK(params[0] < 2.0);
    CHECK(params[0] > 0.0);
}

TEST_CASE("config validation rejects out-of-range values") {
    GrpoConfig cfg;
    cfg.validate();
    cfg.clip_eps = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = GrpoConfig{};
    cfg.group_size = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = GrpoConfig{};
    cfg.kl_beta = -0.1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
