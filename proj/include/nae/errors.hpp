#pragma once

#include <stdexcept>

namespace nae {

class DimensionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class ContractError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Labels or inputs inconsistent with the model configuration.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace nae
