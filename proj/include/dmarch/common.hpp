#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dmarch {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
// Point sets are stored one point per column (dim x count).
using Mat = Eigen::MatrixXd;

// Error taxonomy. Every failure the library reports derives from Error so
// the CLI can map it onto an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Non-finite intermediates, degenerate posteriors, undefined angles.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Selects between the plain serial reference path and the OpenMP path of a
// kernel. Both produce the same results; the serial one is kept for testing.
enum class Exec { serial, parallel };

// Sets the OpenMP thread count used by Exec::parallel kernels (0 = runtime default).
void set_num_threads(int n);
int num_threads();

// Independent, reproducible random stream for (master seed, stream index).
inline std::mt19937_64 make_stream(std::uint64_t master, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x9e3779b9u};
  return std::mt19937_64(seq);
}

inline bool all_finite(const Eigen::Ref<const Mat>& m) { return m.allFinite(); }

}  // namespace dmarch
