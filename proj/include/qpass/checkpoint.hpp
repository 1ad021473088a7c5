#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "qpass/qnetwork.hpp"

namespace qpass {

/// Weight checkpoint.
///
///   QPASS-CHECKPOINT 1
///   arch <input_dim> <n_actions> <blocks> <width>
///   meta <key> <value...>          (zero or more)
///   tensor <name> <rows> <cols>
///   <rows*cols little-endian IEEE-754 doubles, column-major>
///   ...
///   end
///
/// Round-trips bit-exactly.
struct Checkpoint {
  QNetwork net;
  std::map<std::string, std::string> metadata;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace qpass
