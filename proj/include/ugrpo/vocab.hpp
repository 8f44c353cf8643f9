#pragma once

#include <string>

#include "ugrpo/policy.hpp"

namespace ugrpo {

// Canonical synthetic vocabulary shared by generators, parsers, and the
// trainer. Fixed ids so every suite and checkpoint agrees on the token map.
namespace vocab {

inline constexpr int kEos = 0;
inline constexpr int kThinkOpen = 1;
inline constexpr int kThinkClose = 2;
inline constexpr int kAnswerOpen = 3;
inline constexpr int kAnswerClose = 4;
inline constexpr int kCaptionOpen = 5;
inline constexpr int kCaptionClose = 6;

inline constexpr int kOptionBase = 7;   // labels A..H
inline constexpr int kNumOptions = 8;
inline constexpr int kPayloadBase = 15;  // payload symbols p0..p7
inline constexpr int kNumPayload = 8;

inline constexpr int kMarkSingle = 23;
inline constexpr int kMarkMulti = 24;
inline constexpr int kMarkTrueFalse = 25;
inline constexpr int kMarkOpen = 26;

inline constexpr int kSize = 27;

inline constexpr int kNumReserved = 7;  // EOS + the six tag tokens

inline bool is_tag_or_eos(int tok) { return tok >= 0 && tok < kNumReserved; }
inline bool is_option(int tok) { return tok >= kOptionBase && tok < kOptionBase + kNumOptions; }
inline bool is_payload(int tok) { return tok >= kPayloadBase && tok < kPayloadBase + kNumPayload; }

inline int option_token(int index) { return kOptionBase + index; }
inline int payload_token(int index) { return kPayloadBase + index; }

std::string token_name(int tok);
int token_id(const std::string& name);  // throws DomainError for unknown names

// Space-separated names <-> token ids.
std::string render(const TokenSeq& tokens);
TokenSeq parse(const std::string& text);

}  // namespace vocab

}  // namespace ugrpo
