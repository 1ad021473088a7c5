#include "qpass/ir.hpp"

#include <cctype>

namespace qpass {

std::string canonicalize_ir(std::string_view body) {
  std::string out;
  out.reserve(body.size());
  std::string line;
  auto flush = [&] {
    while (!line.empty() && line.back() == ' ') line.pop_back();
    if (!line.empty()) {
      out += line;
      out += '\n';
    }
    line.clear();
  };

  bool in_string = false;
  bool in_comment = false;
  for (char c : body) {
    if (c == '\n') {
      in_string = false;
      in_comment = false;
      flush();
      continue;
    }
    if (in_comment) continue;
    if (!in_string && c == ';') {
      in_comment = true;
      continue;
    }
    if (c == '"') in_string = !in_string;
    if (!in_string && std::isspace(static_cast<unsigned char>(c))) {
      if (!line.empty() && line.back() != ' ') line += ' ';
      continue;
    }
    line += c;
  }
  flush();
  return out;
}

IrId ir_id(std::string_view body) { return sha256(canonicalize_ir(body)); }

IrArtifact IrArtifact::base(std::string body) {
  IrArtifact a;
  a.id = ir_id(body);
  a.body = std::move(body);
  return a;
}

IrArtifact IrArtifact::optimized(std::string body, const IrId& parent, int action) {
  IrArtifact a = base(std::move(body));
  a.origin = {IrOrigin::Kind::optimized, parent, action};
  return a;
}

IrArtifact IrArtifact::o3(std::string body, const IrId& parent) {
  IrArtifact a = base(std::move(body));
  a.origin = {IrOrigin::Kind::o3_baseline, parent, -1};
  return a;
}

}  // namespace qpass
