#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace qpass {

/// 256-bit content digest (SHA-256).
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const;
  static Digest from_hex(std::string_view hex);

  /// First eight bytes as an integer; used for hashing into tables.
  std::uint64_t prefix64() const;

  friend bool operator==(const Digest&, const Digest&) = default;
  friend auto operator<=>(const Digest&, const Digest&) = default;
};

Digest sha256(std::string_view data);

/// Incremental SHA-256 for multi-part inputs.
class Sha256Builder {
 public:
  Sha256Builder();
  ~Sha256Builder();
  Sha256Builder(const Sha256Builder&) = delete;
  Sha256Builder& operator=(const Sha256Builder&) = delete;

  Sha256Builder& update(std::string_view data);
  Sha256Builder& update_u64(std::uint64_t value);
  Digest finish();

 private:
  void* ctx_;
};

}  // namespace qpass

template <>
struct std::hash<qpass::Digest> {
  std::size_t operator()(const qpass::Digest& d) const noexcept { return d.prefix64(); }
};
