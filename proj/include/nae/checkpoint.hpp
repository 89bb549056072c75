#pragma once

#include "nae/nn.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace nae {

class CheckpointError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct NamedMatrix {
  std::string name;
  Matrix value;
};

/// Archive layout: a text manifest
///
///     nae-checkpoint 1
///     entries <n>
///     <name> <rows> <cols>      (n lines, payload order)
///     payload <bytes>
///
/// followed by the little-endian float64 arrays, row-major, concatenated in
/// manifest order.
void write_checkpoint(std::ostream &out, const std::vector<NamedMatrix> &entries);
std::vector<NamedMatrix> read_checkpoint(std::istream &in);

void save_checkpoint(const std::string &path, const std::vector<NamedMatrix> &entries);
std::vector<NamedMatrix> load_checkpoint(const std::string &path);

std::vector<NamedMatrix> snapshot(const ParameterStore &store);

/// Copies archive values into `store` by name. Every parameter must be present
/// with a matching shape and the archive must not carry unknown names other
/// than those listed in `extra`; nothing is written unless all checks pass.
void restore(ParameterStore &store, const std::vector<NamedMatrix> &entries,
             const std::vector<std::string> &extra = {});

} // namespace nae
