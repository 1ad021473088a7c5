#include "qpass/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "qpass/errors.hpp"

namespace qpass {

namespace {

constexpr const char* kMagic = "QPASS-CHECKPOINT 1";

void write_doubles(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(m.data()[i]);
    unsigned char buf[8];
    for (int b = 0; b < 8; ++b) buf[b] = static_cast<unsigned char>(bits >> (8 * b));
    out.write(reinterpret_cast<const char*>(buf), 8);
  }
}

void read_doubles(std::istream& in, Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    unsigned char buf[8];
    if (!in.read(reinterpret_cast<char*>(buf), 8)) throw ConfigError("checkpoint truncated inside tensor data");
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | buf[b];
    m.data()[i] = std::bit_cast<double>(bits);
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint " + tmp);
    const auto& a = checkpoint.net.architecture();
    out << kMagic << "\n";
    out << "arch " << a.input_dim << " " << a.n_actions << " " << a.blocks << " " << a.width << "\n";
    for (const auto& [k, v] : checkpoint.metadata) {
      if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos)
        throw Error("checkpoint metadata must be single-line, key without spaces: " + k);
      out << "meta " << k << " " << v << "\n";
    }
    const auto names = checkpoint.net.parameter_names();
    const auto& params = checkpoint.net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      out << "tensor " << names[i] << " " << params[i].rows() << " " << params[i].cols() << "\n";
      write_doubles(out, params[i]);
      out << "\n";
    }
    out << "end\n";
    if (!out) throw Error("failed writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw ConfigError("not a checkpoint (bad header): " + path.string());

  Architecture arch;
  {
    std::getline(in, line);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag >> arch.input_dim >> arch.n_actions >> arch.blocks >> arch.width) || tag != "arch")
      throw ConfigError("checkpoint missing architecture line");
  }
  Checkpoint cp;
  cp.net = QNetwork(arch, 0);
  const auto names = cp.net.parameter_names();
  auto& params = cp.net.parameters();
  std::size_t next = 0;
  while (std::getline(in, line)) {
    if (line == "end") break;
    if (line.rfind("meta ", 0) == 0) {
      const auto rest = line.substr(5);
      const auto sp = rest.find(' ');
      cp.metadata[rest.substr(0, sp)] = sp == std::string::npos ? std::string{} : rest.substr(sp + 1);
      continue;
    }
    std::istringstream ls(line);
    std::string tag, name;
    Eigen::Index rows = 0, cols = 0;
    if (!(ls >> tag >> name >> rows >> cols) || tag != "tensor") throw ConfigError("bad checkpoint line: " + line);
    if (next >= params.size() || names[next] != name || params[next].rows() != rows || params[next].cols() != cols)
      throw ConfigError("checkpoint tensor " + name + " does not match the architecture");
    read_doubles(in, params[next]);
    in.get();  // trailing newline
    ++next;
  }
  if (next != params.size()) throw ConfigError("checkpoint has " + std::to_string(next) + " tensors, expected " +
                                               std::to_string(params.size()));
  return cp;
}

}  // namespace qpass
