#include "ugrpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ugrpo/errors.hpp"

namespace ugrpo {

namespace {

void check_tokens(const TokenSeq& toks, int vocab_size, const char* what) {
    for (int t : toks) {
        if (t < 0 || t >= vocab_size) {
            throw DomainError(std::string(what) + ": token id " + std::to_string(t) +
                              " out of range [0," + std::to_string(vocab_size) + ")");
        }
    }
}

}  // namespace

PolicySnapshot::PolicySnapshot(int vocab_size, int context_dim, int hidden_dim)
    : vocab_size_(vocab_size), context_dim_(context_dim), hidden_dim_(hidden_dim) {
    if (vocab_size < 1 || context_dim < 1 || hidden_dim < 1) {
        throw DomainError("PolicySnapshot: dimensions must be positive");
    }
    std::size_t v = static_cast<std::size_t>(vocab_size);
    std::size_t e = static_cast<std::size_t>(context_dim);
    std::size_t h = static_cast<std::size_t>(hidden_dim);
    params_.assign(v * e + e + h * 2 * e + h + v * h + v, 0.0);
}

PolicySnapshot PolicySnapshot::random_init(int vocab_size, int context_dim, int hidden_dim,
                                           std::uint64_t seed) {
    PolicySnapshot p(vocab_size, context_dim, hidden_dim);
    Rng rng(seed);
    for (double& w : p.params_) w = rng.next_range(-0.05, 0.05);
    return p;
}

std::size_t PolicySnapshot::off_start() const {
    return static_cast<std::size_t>(vocab_size_) * context_dim_;
}
std::size_t PolicySnapshot::off_w1() const { return off_start() + context_dim_; }
std::size_t PolicySnapshot::off_b1() const {
    return off_w1() + static_cast<std::size_t>(hidden_dim_) * 2 * context_dim_;
}
std::size_t PolicySnapshot::off_w2() const { return off_b1() + hidden_dim_; }
std::size_t PolicySnapshot::off_b2() const {
    return off_w2() + static_cast<std::size_t>(vocab_size_) * hidden_dim_;
}

std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>>
PolicySnapshot::param_layout() const {
    std::size_t v = static_cast<std::size_t>(vocab_size_);
    std::size_t e = static_cast<std::size_t>(context_dim_);
    std::size_t h = static_cast<std::size_t>(hidden_dim_);
    return {
        {"embedding", {off_embedding(), v * e}}, {"start", {off_start(), e}},
        {"w1", {off_w1(), h * 2 * e}},           {"b1", {off_b1(), h}},
        {"w2", {off_w2(), v * h}},               {"b2", {off_b2(), v}},
    };
}

namespace {

// One forward evaluation; keeps the intermediates needed for backprop.
struct StepState {
    std::vector<double> x;  // [context mean ; prev embedding], 2E
    std::vector<double> h;  // tanh hidden, H
    TokenDistribution dist;
};

StepState forward_internal(const PolicySnapshot& p, const TokenSeq& context,
                           const TokenSeq& prefix) {
    const int V = p.vocab_size(), E = p.context_dim(), H = p.hidden_dim();
    const auto& w = p.params();

    StepState s;
    s.x.assign(2 * static_cast<std::size_t>(E), 0.0);
    for (int tok : context) {
        const double* emb = w.data() + p.off_embedding() + static_cast<std::size_t>(tok) * E;
        for (int j = 0; j < E; ++j) s.x[j] += emb[j];
    }
    const double inv_ctx = 1.0 / static_cast<double>(context.size());
    for (int j = 0; j < E; ++j) s.x[j] *= inv_ctx;

    const double* prev = prefix.empty()
                             ? w.data() + p.off_start()
                             : w.data() + p.off_embedding() +
                                   static_cast<std::size_t>(prefix.back()) * E;
    for (int j = 0; j < E; ++j) s.x[E + j] = prev[j];

    s.h.assign(H, 0.0);
    const double* w1 = w.data() + p.off_w1();
    const double* b1 = w.data() + p.off_b1();
    for (int i = 0; i < H; ++i) {
        double a = b1[i];
        const double* row = w1 + static_cast<std::size_t>(i) * 2 * E;
        for (int j = 0; j < 2 * E; ++j) a += row[j] * s.x[j];
        s.h[i] = std::tanh(a);
    }

    std::vector<double> z(V);
    const double* w2 = w.data() + p.off_w2();
    const double* b2 = w.data() + p.off_b2();
    for (int v = 0; v < V; ++v) {
        double acc = b2[v];
        const double* row = w2 + static_cast<std::size_t>(v) * H;
        for (int i = 0; i < H; ++i) acc += row[i] * s.h[i];
        z[v] = acc;
    }

    // stable softmax
    double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    s.dist.probs.resize(V);
    for (int v = 0; v < V; ++v) {
        s.dist.probs[v] = std::exp(z[v] - zmax);
        sum += s.dist.probs[v];
    }
    const double logsum = zmax + std::log(sum);
    s.dist.logprobs.resize(V);
    double ent = 0.0;
    for (int v = 0; v < V; ++v) {
        s.dist.probs[v] /= sum;
        s.dist.logprobs[v] = z[v] - logsum;
        if (s.dist.probs[v] > 0.0) ent -= s.dist.probs[v] * s.dist.logprobs[v];
    }
    s.dist.entropy = std::max(0.0, ent);
    return s;
}

}  // namespace

TokenDistribution forward_step(const PolicySnapshot& policy, const TokenSeq& context,
                               const TokenSeq& prefix) {
    if (context.empty()) throw DomainError("forward_step: context must be nonempty");
    check_tokens(context, policy.vocab_size(), "forward_step context");
    check_tokens(prefix, policy.vocab_size(), "forward_step prefix");
    return forward_internal(policy, context, prefix).dist;
}

Rollout sample_rollout(const PolicySnapshot& policy, const TokenSeq& context,
                       std::uint64_t rng_seed, int max_len) {
    if (max_len < 1) throw DomainError("sample_rollout: max_len must be >= 1");
    check_tokens(context, policy.vocab_size(), "sample_rollout context");

    Rng rng(rng_seed);
    Rollout r;
    r.truncated = true;
    for (int step = 0; step < max_len; ++step) {
        StepState s = forward_internal(policy, context, r.tokens);
        const double u = rng.next_double();
        double cum = 0.0;
        int tok = policy.vocab_size() - 1;
        for (int v = 0; v < policy.vocab_size(); ++v) {
            cum += s.dist.probs[v];
            if (u < cum) {
                tok = v;
                break;
            }
        }
        r.tokens.push_back(tok);
        r.per_token_logprob.push_back(s.dist.logprobs[tok]);
        r.per_token_entropy.push_back(s.dist.entropy);
        if (tok == kEosToken) {
            r.truncated = false;
            break;
        }
    }
    double sum = 0.0;
    for (double e : r.per_token_entropy) sum += e;
    r.seq_entropy = sum / static_cast<double>(r.per_token_entropy.size());
    return r;
}

TokenSeq greedy_decode(const PolicySnapshot& policy, const TokenSeq& context, int max_len) {
    check_tokens(context, policy.vocab_size(), "greedy_decode context");
    TokenSeq out;
    for (int step = 0; step < max_len; ++step) {
        StepState s = forward_internal(policy, context, out);
        int tok = static_cast<int>(
            std::max_element(s.dist.probs.begin(), s.dist.probs.end()) - s.dist.probs.begin());
        out.push_back(tok);
        if (tok == kEosToken) break;
    }
    return out;
}

std::pair<std::vector<double>, std::vector<double>> logprob_and_entropy(
    const PolicySnapshot& policy, const TokenSeq& context, const TokenSeq& tokens) {
    if (tokens.empty()) throw DomainError("logprob_and_entropy: tokens must be nonempty");
    check_tokens(context, policy.vocab_size(), "logprob_and_entropy context");
    check_tokens(tokens, policy.vocab_size(), "logprob_and_entropy tokens");

    std::vector<double> lps, ents;
    lps.reserve(tokens.size());
    ents.reserve(tokens.size());
    TokenSeq prefix;
    prefix.reserve(tokens.size());
    for (int tok : tokens) {
        StepState s = forward_internal(policy, context, prefix);
        lps.push_back(s.dist.logprobs[tok]);
        ents.push_back(s.dist.entropy);
        prefix.push_back(tok);
    }
    return {std::move(lps), std::move(ents)};
}

void accumulate_weighted_logprob_grad(const PolicySnapshot& p, const TokenSeq& context,
                                      const TokenSeq& tokens, const std::vector<double>& weights,
                                      std::vector<double>& grad) {
    const int V = p.vocab_size(), E = p.context_dim(), H = p.hidden_dim();
    const auto& w = p.params();
    const double inv_ctx = 1.0 / static_cast<double>(context.size());

    TokenSeq prefix;
    prefix.reserve(tokens.size());
    std::vector<double> dz(V), dh(H), da(H), dx(2 * static_cast<std::size_t>(E));

    for (std::size_t t = 0; t < tokens.size(); ++t) {
        StepState s = forward_internal(p, context, prefix);
        const int y = tokens[t];
        const double wt = weights[t];

        // d logp / d z = onehot(y) - probs
        for (int v = 0; v < V; ++v) dz[v] = wt * ((v == y ? 1.0 : 0.0) - s.dist.probs[v]);

        double* gw2 = grad.data() + p.off_w2();
        double* gb2 = grad.data() + p.off_b2();
        const double* w2 = w.data() + p.off_w2();
        std::fill(dh.begin(), dh.end(), 0.0);
        for (int v = 0; v < V; ++v) {
            double* grow = gw2 + static_cast<std::size_t>(v) * H;
            const double* wrow = w2 + static_cast<std::size_t>(v) * H;
            for (int i = 0; i < H; ++i) {
                grow[i] += dz[v] * s.h[i];
                dh[i] += wrow[i] * dz[v];
            }
            gb2[v] += dz[v];
        }

        for (int i = 0; i < H; ++i) da[i] = dh[i] * (1.0 - s.h[i] * s.h[i]);

        double* gw1 = grad.data() + p.off_w1();
        double* gb1 = grad.data() + p.off_b1();
        const double* w1 = w.data() + p.off_w1();
        std::fill(dx.begin(), dx.end(), 0.0);
        for (int i = 0; i < H; ++i) {
            double* grow = gw1 + static_cast<std::size_t>(i) * 2 * E;
            const double* wrow = w1 + static_cast<std::size_t>(i) * 2 * E;
            for (int j = 0; j < 2 * E; ++j) {
                grow[j] += da[i] * s.x[j];
                dx[j] += wrow[j] * da[i];
            }
            gb1[i] += da[i];
        }

        // context mean distributes evenly over context tokens
        double* gemb = grad.data() + p.off_embedding();
        for (int tok : context) {
            double* row = gemb + static_cast<std::size_t>(tok) * E;
            for (int j = 0; j < E; ++j) row[j] += dx[j] * inv_ctx;
        }
        // previous-token embedding (start vector for the first position)
        if (prefix.empty()) {
            double* gstart = grad.data() + p.off_start();
            for (int j = 0; j < E; ++j) gstart[j] += dx[E + j];
        } else {
            double* row = gemb + static_cast<std::size_t>(prefix.back()) * E;
            for (int j = 0; j < E; ++j) row[j] += dx[E + j];
        }

        prefix.push_back(y);
    }
}

std::vector<double> grad_logprob(const PolicySnapshot& policy, const TokenSeq& context,
                                 const TokenSeq& tokens) {
    if (tokens.empty()) throw DomainError("grad_logprob: tokens must be nonempty");
    check_tokens(context, policy.vocab_size(), "grad_logprob context");
    check_tokens(tokens, policy.vocab_size(), "grad_logprob tokens");
    std::vector<double> grad(policy.num_params(), 0.0);
    std::vector<double> weights(tokens.size(), 1.0);
    accumulate_weighted_logprob_grad(policy, context, tokens, weights, grad);
    return grad;
}

void save_checkpoint(const PolicySnapshot& policy, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_checkpoint: cannot open " + path);
    out << "ugrpo-checkpoint v1\n";
    out << "vocab_size " << policy.vocab_size() << "\n";
    out << "context_dim " << policy.context_dim() << "\n";
    out << "hidden_dim " << policy.hidden_dim() << "\n";
    for (const auto& [name, span] : policy.param_layout()) {
        out << "block " << name << " " << span.first << " " << span.second << "\n";
    }
    out << "params " << policy.num_params() << "\n";
    char buf[40];
    for (double v : policy.params()) {
        std::snprintf(buf, sizeof(buf), "%a", v);  // hex float: exact round trip
        out << buf << "\n";
    }
    if (!out) throw IoError("save_checkpoint: write failed for " + path);
}

PolicySnapshot load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_checkpoint: cannot open " + path);
    std::string magic, version;
    in >> magic >> version;
    if (magic != "ugrpo-checkpoint" || version != "v1") {
        throw IoError("load_checkpoint: unrecognized header in " + path);
    }
    std::string key;
    int vocab = 0, ctx = 0, hidden = 0;
    in >> key >> vocab >> key >> ctx >> key >> hidden;
    PolicySnapshot p(vocab, ctx, hidden);
    std::string tok;
    while (in >> tok && tok == "block") {
        std::string name;
        std::size_t off, len;
        in >> name >> off >> len;
    }
    // tok == "params" here
    std::size_t n = 0;
    in >> n;
    if (n != p.num_params()) throw IoError("load_checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        std::string s;
        if (!(in >> s)) throw IoError("load_checkpoint: truncated parameter list");
        p.params()[i] = std::strtod(s.c_str(), nullptr);
    }
    return p;
}

}  // namespace ugrpo
