#include "nae/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace nae {

namespace {

constexpr const char *kMagic = "nae-checkpoint";
constexpr int kVersion = 1;

void put_le(std::ostream &out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  }
  out.write(bytes, 8);
}

double get_le(const char *bytes) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

} // namespace

void write_checkpoint(std::ostream &out, const std::vector<NamedMatrix> &entries) {
  std::size_t payload = 0;
  out << kMagic << ' ' << kVersion << '\n' << "entries " << entries.size() << '\n';
  for (const NamedMatrix &e : entries) {
    if (e.name.empty() || e.name.find_first_of(" \t\n") != std::string::npos) {
      throw CheckpointError("checkpoint: invalid entry name '" + e.name + "'");
    }
    out << e.name << ' ' << e.value.rows() << ' ' << e.value.cols() << '\n';
    payload += static_cast<std::size_t>(e.value.size()) * 8;
  }
  out << "payload " << payload << '\n';
  for (const NamedMatrix &e : entries) {
    for (Index i = 0; i < e.value.size(); ++i) {
      put_le(out, e.value.data()[i]);
    }
  }
  if (!out) {
    throw CheckpointError("checkpoint: write failed");
  }
}

std::vector<NamedMatrix> read_checkpoint(std::istream &in) {
  auto next_line = [&in](const char *what) {
    std::string line;
    if (!std::getline(in, line)) {
      throw CheckpointError(std::string("checkpoint: corrupt manifest (missing ") + what + ")");
    }
    return line;
  };
  {
    std::istringstream header(next_line("header"));
    std::string magic;
    int version = 0;
    if (!(header >> magic >> version) || magic != kMagic || version != kVersion) {
      throw CheckpointError("checkpoint: corrupt manifest (bad header)");
    }
  }
  std::size_t count = 0;
  {
    std::istringstream line(next_line("entry count"));
    std::string key;
    if (!(line >> key >> count) || key != "entries") {
      throw CheckpointError("checkpoint: corrupt manifest (bad entry count)");
    }
  }
  std::vector<NamedMatrix> entries;
  std::set<std::string> seen;
  std::size_t expected = 0;
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream line(next_line("entry"));
    NamedMatrix e;
    Index rows = 0, cols = 0;
    if (!(line >> e.name >> rows >> cols) || rows <= 0 || cols <= 0) {
      throw CheckpointError("checkpoint: corrupt manifest (bad entry line " + std::to_string(i) + ")");
    }
    if (!seen.insert(e.name).second) {
      throw CheckpointError("checkpoint: duplicate entry '" + e.name + "'");
    }
    e.value.resize(rows, cols);
    expected += static_cast<std::size_t>(rows * cols) * 8;
    entries.push_back(std::move(e));
  }
  std::size_t declared = 0;
  {
    std::istringstream line(next_line("payload size"));
    std::string key;
    if (!(line >> key >> declared) || key != "payload" || declared != expected) {
      throw CheckpointError("checkpoint: corrupt manifest (payload size disagrees with shapes)");
    }
  }
  std::string payload(declared, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(declared));
  if (static_cast<std::size_t>(in.gcount()) != declared) {
    throw CheckpointError("checkpoint: truncated payload (" + std::to_string(in.gcount()) + " of " +
                          std::to_string(declared) + " bytes)");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw CheckpointError("checkpoint: trailing bytes after payload");
  }
  std::size_t offset = 0;
  for (NamedMatrix &e : entries) {
    for (Index i = 0; i < e.value.size(); ++i) {
      e.value.data()[i] = get_le(payload.data() + offset);
      offset += 8;
    }
  }
  return entries;
}

void save_checkpoint(const std::string &path, const std::vector<NamedMatrix> &entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CheckpointError("checkpoint: cannot open '" + path + "' for writing");
  }
  write_checkpoint(out, entries);
}

std::vector<NamedMatrix> load_checkpoint(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError("checkpoint: cannot open '" + path + "'");
  }
  return read_checkpoint(in);
}

std::vector<NamedMatrix> snapshot(const ParameterStore &store) {
  std::vector<NamedMatrix> out;
  out.reserve(store.parameters().size());
  for (const Parameter &p : store.parameters()) {
    out.push_back({p.name, p.tensor.value()});
  }
  return out;
}

void restore(ParameterStore &store, const std::vector<NamedMatrix> &entries,
             const std::vector<std::string> &extra) {
  std::map<std::string, const NamedMatrix *> by_name;
  for (const NamedMatrix &e : entries) {
    by_name[e.name] = &e;
  }
  for (const Parameter &p : store.parameters()) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) {
      throw CheckpointError("checkpoint: missing parameter '" + p.name + "'");
    }
    const Matrix &v = it->second->value;
    if (v.rows() != p.tensor.rows() || v.cols() != p.tensor.cols()) {
      throw CheckpointError("checkpoint: shape mismatch for '" + p.name + "' (" +
                            std::to_string(v.rows()) + "x" + std::to_string(v.cols()) +
                            " vs " + std::to_string(p.tensor.rows()) + "x" +
                            std::to_string(p.tensor.cols()) + ")");
    }
  }
  for (const NamedMatrix &e : entries) {
    if (!store.contains(e.name) &&
        std::find(extra.begin(), extra.end(), e.name) == extra.end()) {
      throw CheckpointError("checkpoint: unknown entry '" + e.name + "'");
    }
  }
  for (Parameter &p : store.parameters()) {
    p.tensor.mutable_value() = by_name.at(p.name)->value;
  }
}

} // namespace nae
