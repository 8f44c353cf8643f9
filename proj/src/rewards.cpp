#include "ugrpo/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ugrpo/errors.hpp"
#include "ugrpo/vocab.hpp"

namespace ugrpo {

std::string kind_name(TaskKind kind) {
    switch (kind) {
        case TaskKind::single_mcq: return "single_mcq";
        case TaskKind::multi_mcq: return "multi_mcq";
        case TaskKind::true_false: return "true_false";
        case TaskKind::open_ended: return "open_ended";
    }
    return "?";
}

TaskKind kind_from_name(const std::string& name) {
    if (name == "single_mcq") return TaskKind::single_mcq;
    if (name == "multi_mcq") return TaskKind::multi_mcq;
    if (name == "true_false") return TaskKind::true_false;
    if (name == "open_ended") return TaskKind::open_ended;
    throw DomainError("kind_from_name: unknown task kind '" + name + "'");
}

namespace {

// Consumes OPEN body CLOSE at position i. Body tokens must be plain (no tag,
// no EOS). Returns false on any mismatch.
bool take_block(const TokenSeq& toks, std::size_t& i, int open_tag, int close_tag,
                TokenSeq& body) {
    if (i >= toks.size() || toks[i] != open_tag) return false;
    ++i;
    body.clear();
    while (i < toks.size() && !vocab::is_tag_or_eos(toks[i])) body.push_back(toks[i++]);
    if (i >= toks.size() || toks[i] != close_tag) return false;
    ++i;
    return true;
}

}  // namespace

ParsedResponse parse_response(const TokenSeq& tokens, TaskKind kind) {
    TokenSeq toks = tokens;
    while (!toks.empty() && toks.back() == vocab::kEos) toks.pop_back();

    ParsedResponse out;
    std::size_t i = 0;
    TokenSeq body;
    if (kind == TaskKind::open_ended) {
        if (!take_block(toks, i, vocab::kCaptionOpen, vocab::kCaptionClose, body)) return out;
        out.caption = body;
    }
    if (!take_block(toks, i, vocab::kThinkOpen, vocab::kThinkClose, body)) return out;
    out.think = body;
    if (!take_block(toks, i, vocab::kAnswerOpen, vocab::kAnswerClose, body)) return out;
    out.answer = body;
    out.well_formed = (i == toks.size());
    return out;
}

double iou_accuracy(const std::set<int>& predicted, const std::set<int>& truth) {
    if (predicted.empty()) return 0.0;
    std::size_t inter = 0;
    for (int p : predicted) inter += truth.count(p);
    const std::size_t uni = predicted.size() + truth.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double bleu(const TokenSeq& candidate, const TokenSeq& reference, int max_order) {
    if (max_order < 1) throw DomainError("bleu: max_order must be >= 1");
    if (candidate.empty()) return 0.0;

    const int orders = std::min<int>(max_order, static_cast<int>(candidate.size()));
    double log_sum = 0.0;
    for (int n = 1; n <= orders; ++n) {
        std::map<TokenSeq, int> cand_counts, ref_counts;
        for (std::size_t i = 0; i + n <= candidate.size(); ++i)
            cand_counts[TokenSeq(candidate.begin() + i, candidate.begin() + i + n)]++;
        for (std::size_t i = 0; i + n <= reference.size(); ++i)
            ref_counts[TokenSeq(reference.begin() + i, reference.begin() + i + n)]++;
        int matched = 0, total = 0;
        for (const auto& [gram, c] : cand_counts) {
            auto it = ref_counts.find(gram);
            matched += std::min(c, it == ref_counts.end() ? 0 : it->second);
            total += c;
        }
        double p = static_cast<double>(matched) / static_cast<double>(total);
        if (p == 0.0) p = 1e-9;
        log_sum += std::log(p);
    }
    const double geo = std::exp(log_sum / orders);

    const double clen = static_cast<double>(candidate.size());
    const double rlen = static_cast<double>(reference.size());
    const double bp = clen >= rlen ? 1.0 : std::exp(1.0 - rlen / clen);
    return geo * bp;
}

namespace {

double f1(double p, double r) { return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

std::size_t lcs_length(const TokenSeq& a, const TokenSeq& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace

double rouge(const TokenSeq& candidate, const TokenSeq& reference, RougeVariant variant) {
    if (candidate.empty() || reference.empty()) return 0.0;
    double overlap = 0.0;
    if (variant == RougeVariant::rouge1) {
        std::map<int, int> cc, rc;
        for (int t : candidate) cc[t]++;
        for (int t : reference) rc[t]++;
        for (const auto& [tok, c] : cc) {
            auto it = rc.find(tok);
            if (it != rc.end()) overlap += std::min(c, it->second);
        }
    } else {
        overlap = static_cast<double>(lcs_length(candidate, reference));
    }
    const double p = overlap / static_cast<double>(candidate.size());
    const double r = overlap / static_cast<double>(reference.size());
    return f1(p, r);
}

double meteor(const TokenSeq& candidate, const TokenSeq& reference) {
    if (candidate.empty() || reference.empty()) return 0.0;

    // Leftmost-greedy alignment: each candidate token takes the reference
    // position that continues the current chunk if possible, else the leftmost
    // unused match.
    std::vector<bool> used(reference.size(), false);
    int matches = 0, chunks = 0;
    long prev_ref = -2;  // sentinel: nothing aligned yet
    for (int tok : candidate) {
        long pick = -1;
        const long cont = prev_ref + 1;
        if (cont >= 0 && cont < static_cast<long>(reference.size()) && !used[cont] &&
            reference[cont] == tok) {
            pick = cont;
        } else {
            for (std::size_t j = 0; j < reference.size(); ++j) {
                if (!used[j] && reference[j] == tok) {
                    pick = static_cast<long>(j);
                    break;
                }
            }
        }
        if (pick < 0) {
            prev_ref = -2;
            continue;
        }
        used[pick] = true;
        ++matches;
        if (pick != prev_ref + 1) ++chunks;
        prev_ref = pick;
    }
    if (matches == 0) return 0.0;

    const double p = static_cast<double>(matches) / static_cast<double>(candidate.size());
    const double r = static_cast<double>(matches) / static_cast<double>(reference.size());
    const double f_mean = 10.0 * p * r / (r + 9.0 * p);
    const double frag = static_cast<double>(chunks) / static_cast<double>(matches);
    const double penalty = 0.5 * frag * frag * frag;
    return f_mean * (1.0 - penalty);
}

double open_ended_accuracy(const std::vector<TokenSeq>& candidates, const TokenSeq& reference) {
    if (candidates.empty()) throw DomainError("open_ended_accuracy: need at least one candidate");
    double sum = 0.0;
    for (const TokenSeq& c : candidates) {
        const double b = bleu(c, reference);
        const double rg = 0.5 * (rouge(c, reference, RougeVariant::rouge1) +
                                 rouge(c, reference, RougeVariant::rougeL));
        const double m = meteor(c, reference);
        sum += (b + rg + m) / 3.0;
    }
    return sum / static_cast<double>(candidates.size());
}

RewardBreakdown compute_reward(const ParsedResponse& parsed, const AnswerKey& key,
                               const RewardWeights& weights) {
    RewardBreakdown out;
    out.weights = weights;
    out.format = parsed.well_formed ? 1.0 : 0.0;
    if (parsed.well_formed) {
        switch (key.kind) {
            case TaskKind::single_mcq:
            case TaskKind::true_false:
            case TaskKind::multi_mcq: {
                std::set<int> predicted;
                for (int tok : *parsed.answer) {
                    if (key.options.count(tok)) predicted.insert(tok);
                }
                out.accuracy = iou_accuracy(predicted, key.truth_labels);
                break;
            }
            case TaskKind::open_ended:
                out.accuracy = open_ended_accuracy({*parsed.answer}, key.reference);
                break;
        }
    }
    out.total = weights.w_format * out.format + weights.w_accuracy * out.accuracy;
    return out;
}

}  // namespace ugrpo
