// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace redaff {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Bad input data: malformed records, dimension mismatches, empty inputs.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// NaN/Inf encountered during a numerical routine.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument combination.
class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Deterministic random source. Draws are derived only from the 64-bit
/// engine output, so sequences are identical across standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Mixes a base seed with stream identifiers (SplitMix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// A named, mutable view over a dense parameter block.
struct TensorRef {
  std::string name;
  double* data;
  Eigen::Index rows;
  Eigen::Index cols;

  Eigen::Index size() const { return rows * cols; }
};

template <typename Derived>
TensorRef tensor_ref(std::string name, Eigen::PlainObjectBase<Derived>& t) {
  return TensorRef{std::move(name), t.data(), t.rows(), t.cols()};
}

std::size_t total_size(std::span<const TensorRef> tensors);
Vector flatten(std::span<const TensorRef> tensors);
void unflatten(const Vector& flat, std::span<const TensorRef> tensors);
bool all_finite(std::span<const TensorRef> tensors);

/// Uniform(-k, k) initialization with k = 1 / sqrt(fan_in).
void init_uniform(Matrix& m, Eigen::Index fan_in, Rng& rng);
void init_uniform(Vector& v, Eigen::Index fan_in, Rng& rng);

double sigmoid(double x);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double x);
/// Fixed-precision formatting for human-facing tables.
std::string format_fixed(double x, int digits);

std::vector<std::string> split(std::string_view s, char delim);
std::string trim(std::string_view s);

}  // namespace redaff
