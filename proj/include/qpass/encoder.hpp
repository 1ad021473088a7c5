#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qpass/state.hpp"

namespace qpass {

/// Maps a state (and its IR text) to a fixed-length feature vector.
class StateEncoder {
 public:
  virtual ~StateEncoder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> encode(const AgentState& state, std::string_view ir_body) const = 0;
};

/// How IR text is split into the tokens counted by the histogram.
enum class TokenKind {
  llvm_opcodes,  // instruction opcodes of textual LLVM IR
  csv_tokens,    // comma-separated tokens (synthetic backend IR)
};

std::vector<std::string> extract_llvm_opcodes(std::string_view body);
std::vector<std::string> llvm_opcode_vocabulary();
/// "0".."range-1" followed by the reserved "other" bucket.
std::vector<std::string> synthetic_vocabulary(int token_range);

inline constexpr std::string_view kOtherBucket = "other";

/// L1-normalized token histogram followed by a one-hot history block of
/// `mu_max` slots, each over |A|+1 symbols (the last one is padding).
/// Histories longer than `mu_max` keep their most recent entries.
class OpcodeHistogramEncoder final : public StateEncoder {
 public:
  OpcodeHistogramEncoder(std::vector<std::string> vocabulary, int n_actions, int mu_max, TokenKind tokens);

  std::size_t dim() const override { return vocab_.size() + static_cast<std::size_t>(mu_max_) * (n_actions_ + 1); }
  std::vector<double> encode(const AgentState& state, std::string_view ir_body) const override;

  const std::vector<std::string>& vocabulary() const { return vocab_; }
  int n_actions() const { return n_actions_; }
  int mu_max() const { return mu_max_; }
  TokenKind token_kind() const { return tokens_; }

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t other_ = 0;
  int n_actions_;
  int mu_max_;
  TokenKind tokens_;
};

}  // namespace qpass
