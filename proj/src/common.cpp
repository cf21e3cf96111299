// SPDX-License-Identifier: Apache-2.0
#include "redaff/common.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>

namespace redaff {

std::size_t Rng::below(std::size_t n) {
  if (n == 0) {
    throw std::invalid_argument("Rng::below: n must be positive");
  }
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = engine_();
  while (x >= limit) {
    x = engine_();
  }
  return static_cast<std::size_t>(x % bound);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) {
    u1 = uniform();
  }
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ b);
}

std::size_t total_size(std::span<const TensorRef> tensors) {
  std::size_t n = 0;
  for (const auto& t : tensors) {
    n += static_cast<std::size_t>(t.size());
  }
  return n;
}

Vector flatten(std::span<const TensorRef> tensors) {
  Vector flat(static_cast<Eigen::Index>(total_size(tensors)));
  Eigen::Index offset = 0;
  for (const auto& t : tensors) {
    flat.segment(offset, t.size()) = Eigen::Map<const Vector>(t.data, t.size());
    offset += t.size();
  }
  return flat;
}

void unflatten(const Vector& flat, std::span<const TensorRef> tensors) {
  if (static_cast<std::size_t>(flat.size()) != total_size(tensors)) {
    throw DataError("unflatten: size mismatch (" + std::to_string(flat.size()) + " vs " +
                    std::to_string(total_size(tensors)) + ")");
  }
  Eigen::Index offset = 0;
  for (const auto& t : tensors) {
    Eigen::Map<Vector>(t.data, t.size()) = flat.segment(offset, t.size());
    offset += t.size();
  }
}

bool all_finite(std::span<const TensorRef> tensors) {
  for (const auto& t : tensors) {
    if (!Eigen::Map<const Vector>(t.data, t.size()).allFinite()) {
      return false;
    }
  }
  return true;
}

void init_uniform(Matrix& m, Eigen::Index fan_in, Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      m(i, j) = rng.uniform(-k, k);
    }
  }
}

void init_uniform(Vector& v, Eigen::Index fan_in, Rng& rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v(i) = rng.uniform(-k, k);
  }
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) {
    throw std::runtime_error("format_double: conversion failed");
  }
  return std::string(buf, ptr);
}

std::string format_fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, x);
  return buf;
}

std::vector<std::string> split(std::string_view s, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(delim, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace redaff
