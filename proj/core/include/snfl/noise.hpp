#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace snfl {

/// Philox4x32-10 counter-based generator (Salmon et al. 2011).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key) noexcept;

/// Standard normal quantile, Wichura's AS241 (PPND16), ~1e-16 relative.
double inverse_normal_cdf(double p) noexcept;

/// Stream tag 0 is the primary Brownian path of a path id; other tags give
/// independent streams (branching continuations).
struct NoiseKey {
  std::uint64_t seed = 0;
  std::uint64_t path_id = 0;
  std::uint32_t stream = 0;
};

/// Increment i of the keyed stream as a N(0,1) draw; no sequential state.
double standard_normal(const NoiseKey& key, std::uint64_t i) noexcept;

/// Writes sqrt(h)*Z_i for i in [0, out.size()).
void fill_increments(const NoiseKey& key, double h, std::span<double> out) noexcept;

/// Brownian increments dB_i ~ N(0, h), i = 0..n-1, h = T/n.
struct NoiseStream {
  std::uint64_t seed = 0;
  std::uint64_t path_id = 0;
  std::size_t n = 0;
  double T = 0.0;
  double h = 0.0;
  std::vector<double> dB;
};

/// Throws InvalidArgument when n < 1 or T <= 0.
NoiseStream noise(std::uint64_t seed, std::uint64_t path_id, std::size_t n, double T);

}  // namespace snfl
