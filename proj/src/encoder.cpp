#include "qpass/encoder.hpp"

#include <sstream>

namespace qpass {

namespace {

bool looks_like_type(std::string_view w) {
  return (w.size() > 1 && w[0] == 'i' && std::isdigit(static_cast<unsigned char>(w[1]))) || w == "label" ||
         w == "ptr" || w == "float" || w == "double" || w == "void";
}

}  // namespace

std::vector<std::string> extract_llvm_opcodes(std::string_view body) {
  std::vector<std::string> ops;
  std::istringstream in{std::string(body)};
  std::string line;
  bool in_function = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first[0] == ';') continue;
    if (!in_function) {
      if (first == "define" && line.find('{') != std::string::npos) in_function = true;
      continue;
    }
    if (first == "}") {
      in_function = false;
      continue;
    }
    if (first.back() == ':') continue;  // block label
    std::string op = first;
    if (first[0] == '%') {
      std::string eq;
      if (!(ls >> eq) || eq != "=" || !(ls >> op)) continue;
    }
    if (op == "tail" || op == "musttail" || op == "notail") {
      if (!(ls >> op)) continue;
    }
    if (looks_like_type(op) || op == "]") continue;  // switch table rows and the like
    ops.push_back(op);
  }
  return ops;
}

std::vector<std::string> llvm_opcode_vocabulary() {
  return {"ret",      "br",          "switch",        "indirectbr",     "invoke",        "resume",    "unreachable",
          "fneg",     "add",         "fadd",          "sub",            "fsub",          "mul",       "fmul",
          "udiv",     "sdiv",        "fdiv",          "urem",           "srem",          "frem",      "shl",
          "lshr",     "ashr",        "and",           "or",             "xor",           "extractelement",
          "insertelement",           "shufflevector", "extractvalue",   "insertvalue",   "alloca",    "load",
          "store",    "fence",       "cmpxchg",       "atomicrmw",      "getelementptr", "trunc",     "zext",
          "sext",     "fptrunc",     "fpext",         "fptoui",         "fptosi",        "uitofp",    "sitofp",
          "ptrtoint", "inttoptr",    "bitcast",       "addrspacecast",  "icmp",          "fcmp",      "phi",
          "select",   "call",        "va_arg",        "landingpad",     "freeze",        "other"};
}

std::vector<std::string> synthetic_vocabulary(int token_range) {
  std::vector<std::string> v;
  for (int i = 0; i < token_range; ++i) v.push_back(std::to_string(i));
  v.emplace_back(kOtherBucket);
  return v;
}

OpcodeHistogramEncoder::OpcodeHistogramEncoder(std::vector<std::string> vocabulary, int n_actions, int mu_max,
                                               TokenKind tokens)
    : vocab_(std::move(vocabulary)), n_actions_(n_actions), mu_max_(mu_max), tokens_(tokens) {
  bool has_other = false;
  for (const auto& w : vocab_) has_other |= (w == kOtherBucket);
  if (!has_other) vocab_.emplace_back(kOtherBucket);
  for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], i);
  other_ = index_.at(std::string(kOtherBucket));
}

std::vector<double> OpcodeHistogramEncoder::encode(const AgentState& state, std::string_view ir_body) const {
  std::vector<double> out(dim(), 0.0);

  std::vector<std::string> tokens;
  if (tokens_ == TokenKind::llvm_opcodes) {
    tokens = extract_llvm_opcodes(ir_body);
  } else {
    std::string cur;
    for (char c : ir_body) {
      if (c == ',' || c == '\n' || c == ' ') {
        if (!cur.empty()) tokens.push_back(std::move(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
  }
  for (const auto& t : tokens) {
    const auto it = index_.find(t);
    out[it == index_.end() ? other_ : it->second] += 1.0;
  }
  if (!tokens.empty())
    for (std::size_t i = 0; i < vocab_.size(); ++i) out[i] /= static_cast<double>(tokens.size());

  const auto& entries = state.history.entries;
  const std::size_t keep = std::min<std::size_t>(entries.size(), static_cast<std::size_t>(mu_max_));
  const std::size_t first = entries.size() - keep;
  const std::size_t width = static_cast<std::size_t>(n_actions_) + 1;
  for (int slot = 0; slot < mu_max_; ++slot) {
    const std::size_t base = vocab_.size() + static_cast<std::size_t>(slot) * width;
    const std::size_t s = static_cast<std::size_t>(slot);
    const std::size_t symbol = s < keep ? static_cast<std::size_t>(entries[first + s]) : width - 1;
    out[base + symbol] = 1.0;
  }
  return out;
}

}  // namespace qpass
