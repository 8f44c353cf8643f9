#include "ugrpo/eval.hpp"

#include <cmath>
#include <sstream>

#include "ugrpo/errors.hpp"
#include "ugrpo/rewards.hpp"
#include "ugrpo/rng.hpp"
#include "ugrpo/vocab.hpp"

namespace ugrpo {

MultiLabelMetrics multi_label_metrics(const std::set<int>& predicted, const std::set<int>& truth) {
    if (truth.empty()) throw DomainError("multi_label_metrics: truth must be nonempty");
    MultiLabelMetrics m;
    std::size_t inter = 0;
    for (int p : predicted) inter += truth.count(p);
    m.acc = predicted == truth ? 1.0 : 0.0;
    m.jaccard = iou_accuracy(predicted, truth);
    m.precision = predicted.empty() ? 0.0
                                    : static_cast<double>(inter) / static_cast<double>(predicted.size());
    m.recall = static_cast<double>(inter) / static_cast<double>(truth.size());
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

namespace {

std::set<int> predicted_labels(const ParsedResponse& parsed, const AnswerKey& key) {
    std::set<int> out;
    if (parsed.well_formed) {
        for (int tok : *parsed.answer) {
            if (key.options.count(tok)) out.insert(tok);
        }
    }
    return out;
}

double safe_div(double num, std::size_t den) {
    return den == 0 ? 0.0 : num / static_cast<double>(den);
}

}  // namespace

EvalReport evaluate(const PolicySnapshot& checkpoint, const TaskSuite& suite,
                    const DecodeSpec& decode, int max_len) {
    if (suite.split != Split::eval)
        throw ConfigError("evaluate: suite '" + suite.name + "' is not an eval split");
    if (checkpoint.vocab_size() < vocab::kSize)
        throw ConfigError("evaluate: checkpoint vocabulary smaller than the task vocabulary");
    if (!decode.greedy && decode.sample_k < 1)
        throw ConfigError("evaluate: sample_k must be >= 1");

    EvalReport rep;
    rep.suite_name = suite.name;
    rep.n = suite.instances.size();

    double format_sum = 0.0;
    double single_sum = 0.0, tf_sum = 0.0;
    MultiLabelMetrics multi_sum;
    double bleu_sum = 0.0, r1_sum = 0.0, rl_sum = 0.0, met_sum = 0.0, mean_sum = 0.0;

    for (std::size_t idx = 0; idx < suite.instances.size(); ++idx) {
        const TaskInstance& task = suite.instances[idx];
        std::vector<ParsedResponse> parses;
        const int k = decode.greedy ? 1 : decode.sample_k;
        for (int c = 0; c < k; ++c) {
            TokenSeq out = decode.greedy
                               ? greedy_decode(checkpoint, task.context, max_len)
                               : sample_rollout(checkpoint, task.context,
                                                mix_seed(decode.seed, idx, c), max_len)
                                     .tokens;
            parses.push_back(parse_response(out, task.kind));
        }
        double inst_format = 0.0;
        for (const auto& p : parses) inst_format += p.well_formed ? 1.0 : 0.0;
        format_sum += inst_format / k;

        switch (task.kind) {
            case TaskKind::single_mcq:
            case TaskKind::true_false: {
                double acc = 0.0;
                for (const auto& p : parses) {
                    const std::set<int> pred = predicted_labels(p, task.key);
                    acc += pred == task.key.truth_labels ? 1.0 : 0.0;
                }
                acc /= k;
                if (task.kind == TaskKind::single_mcq) {
                    ++rep.n_single;
                    single_sum += acc;
                } else {
                    ++rep.n_true_false;
                    tf_sum += acc;
                }
                break;
            }
            case TaskKind::multi_mcq: {
                MultiLabelMetrics acc;
                for (const auto& p : parses) {
                    MultiLabelMetrics m = multi_label_metrics(predicted_labels(p, task.key),
                                                              task.key.truth_labels);
                    acc.acc += m.acc;
                    acc.jaccard += m.jaccard;
                    acc.precision += m.precision;
                    acc.recall += m.recall;
                    acc.f1 += m.f1;
                }
                ++rep.n_multi;
                multi_sum.acc += acc.acc / k;
                multi_sum.jaccard += acc.jaccard / k;
                multi_sum.precision += acc.precision / k;
                multi_sum.recall += acc.recall / k;
                multi_sum.f1 += acc.f1 / k;
                break;
            }
            case TaskKind::open_ended: {
                // all k candidates feed the Top-k aggregator; malformed ones
                // contribute empty answers (score 0)
                std::vector<TokenSeq> candidates;
                double b = 0.0, r1 = 0.0, rl = 0.0, met = 0.0;
                for (const auto& p : parses) {
                    const TokenSeq ans = p.well_formed ? *p.answer : TokenSeq{};
                    candidates.push_back(ans);
                    b += bleu(ans, task.key.reference);
                    r1 += rouge(ans, task.key.reference, RougeVariant::rouge1);
                    rl += rouge(ans, task.key.reference, RougeVariant::rougeL);
                    met += meteor(ans, task.key.reference);
                }
                ++rep.n_open;
                bleu_sum += b / k;
                r1_sum += r1 / k;
                rl_sum += rl / k;
                met_sum += met / k;
                mean_sum += open_ended_accuracy(candidates, task.key.reference);
                break;
            }
        }
    }

    rep.format_rate = safe_div(format_sum, rep.n);
    rep.single_acc = safe_div(single_sum, rep.n_single);
    rep.true_false_acc = safe_div(tf_sum, rep.n_true_false);
    rep.multi.acc = safe_div(multi_sum.acc, rep.n_multi);
    rep.multi.jaccard = safe_div(multi_sum.jaccard, rep.n_multi);
    rep.multi.precision = safe_div(multi_sum.precision, rep.n_multi);
    rep.multi.recall = safe_div(multi_sum.recall, rep.n_multi);
    rep.multi.f1 = safe_div(multi_sum.f1, rep.n_multi);
    rep.open_bleu = safe_div(bleu_sum, rep.n_open);
    rep.open_rouge1 = safe_div(r1_sum, rep.n_open);
    rep.open_rougeL = safe_div(rl_sum, rep.n_open);
    rep.open_meteor = safe_div(met_sum, rep.n_open);
    rep.open_mean = safe_div(mean_sum, rep.n_open);
    return rep;
}

std::string EvalReport::to_text() const {
    std::ostringstream out;
    out.precision(6);
    out << "suite: " << suite_name << "\n";
    out << "n: " << n << "\n";
    out << "format_rate: " << format_rate << "\n";
    if (n_single) out << "single_mcq (n=" << n_single << ") acc: " << single_acc << "\n";
    if (n_true_false)
        out << "true_false (n=" << n_true_false << ") acc: " << true_false_acc << "\n";
    if (n_multi) {
        out << "multi_mcq (n=" << n_multi << ") acc: " << multi.acc
            << " jaccard: " << multi.jaccard << " precision: " << multi.precision
            << " recall: " << multi.recall << " f1: " << multi.f1 << "\n";
    }
    if (n_open) {
        out << "open_ended (n=" << n_open << ") bleu: " << open_bleu
            << " rouge1: " << open_rouge1 << " rougeL: " << open_rougeL
            << " meteor: " << open_meteor << " mean: " << open_mean << "\n";
    }
    return out.str();
}

std::string EvalReport::row_header() {
    return "suite,n,format_rate,single_acc,true_false_acc,multi_acc,multi_jaccard,"
           "multi_precision,multi_recall,multi_f1,open_bleu,open_rouge1,open_rougeL,"
           "open_meteor,open_mean";
}

std::string EvalReport::to_row() const {
    std::ostringstream out;
    out.precision(17);
    out << suite_name << "," << n << "," << format_rate << "," << single_acc << ","
        << true_false_acc << "," << multi.acc << "," << multi.jaccard << ","
        << multi.precision << "," << multi.recall << "," << multi.f1 << "," << open_bleu << ","
        << open_rouge1 << "," << open_rougeL << "," << open_meteor << "," << open_mean;
    return out.str();
}

}  // namespace ugrpo
