#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "qpass/digest.hpp"

namespace qpass {

using IrId = Digest;

/// Strips `;` comments (outside string literals), trims and collapses
/// whitespace, and drops blank lines.
std::string canonicalize_ir(std::string_view body);

/// Content id: SHA-256 of the canonical form.
IrId ir_id(std::string_view body);

struct IrOrigin {
  enum class Kind { base, optimized, o3_baseline };
  Kind kind = Kind::base;
  std::optional<IrId> parent;  // set for optimized and o3_baseline
  int action = -1;             // set for optimized
};

struct IrArtifact {
  IrId id;
  std::string body;
  IrOrigin origin;

  static IrArtifact base(std::string body);
  static IrArtifact optimized(std::string body, const IrId& parent, int action);
  static IrArtifact o3(std::string body, const IrId& parent);
};

}  // namespace qpass
