#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace polybandit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: parameters, config files, preconditions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An algorithm could not produce a result (empty pool, failed fit, ...).
class AlgorithmError : public Error {
 public:
  using Error::Error;
};

class BudgetExhausted : public Error {
 public:
  using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

}  // namespace polybandit
