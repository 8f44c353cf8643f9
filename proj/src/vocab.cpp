#include "ugrpo/vocab.hpp"

#include <sstream>
#include <unordered_map>

#include "ugrpo/errors.hpp"

namespace ugrpo::vocab {

namespace {

const std::unordered_map<std::string, int>& name_table() {
    static const std::unordered_map<std::string, int> table = [] {
        std::unordered_map<std::string, int> t;
        for (int id = 0; id < kSize; ++id) t[token_name(id)] = id;
        return t;
    }();
    return table;
}

}  // namespace

std::string token_name(int tok) {
    switch (tok) {
        case kEos: return "<eos>";
        case kThinkOpen: return "<think>";
        case kThinkClose: return "</think>";
        case kAnswerOpen: return "<answer>";
        case kAnswerClose: return "</answer>";
        case kCaptionOpen: return "<caption>";
        case kCaptionClose: return "</caption>";
        case kMarkSingle: return "q_single";
        case kMarkMulti: return "q_multi";
        case kMarkTrueFalse: return "q_tf";
        case kMarkOpen: return "q_open";
        default: break;
    }
    if (is_option(tok)) return std::string(1, static_cast<char>('A' + tok - kOptionBase));
    if (is_payload(tok)) return "p" + std::to_string(tok - kPayloadBase);
    throw DomainError("token_name: id " + std::to_string(tok) + " outside vocabulary");
}

int token_id(const std::string& name) {
    auto it = name_table().find(name);
    if (it == name_table().end()) throw DomainError("token_id: unknown token name '" + name + "'");
    return it->second;
}

std::string render(const TokenSeq& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += token_name(tokens[i]);
    }
    return out;
}

TokenSeq parse(const std::string& text) {
    TokenSeq out;
    std::istringstream in(text);
    std::string word;
    while (in >> word) out.push_back(token_id(word));
    return out;
}

}  // namespace ugrpo::vocab
