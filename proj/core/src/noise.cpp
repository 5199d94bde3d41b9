#include "snfl/noise.hpp"

#include <cmath>

#include "snfl/error.hpp"

namespace snfl {

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) noexcept {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(M0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(M1) * c[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += W0;
    k[1] += W1;
  }
  return c;
}

double inverse_normal_cdf(double p) noexcept {
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2509.0809287301226727 * r + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((5226.495278852545925 * r + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  if (r <= 0.0) return q < 0.0 ? -INFINITY : INFINITY;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
               1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
               0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
               0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

namespace {

inline double open_uniform(std::uint32_t a, std::uint32_t b) noexcept {
  // 53 random bits, shifted half a unit away from both endpoints
  const std::uint64_t bits = (static_cast<std::uint64_t>(a >> 5) << 26) | (b >> 6);
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

inline std::array<std::uint32_t, 4> block(const NoiseKey& key, std::uint64_t blk) noexcept {
  return philox4x32({static_cast<std::uint32_t>(blk), key.stream, static_cast<std::uint32_t>(key.path_id),
                     static_cast<std::uint32_t>(key.path_id >> 32)},
                    {static_cast<std::uint32_t>(key.seed), static_cast<std::uint32_t>(key.seed >> 32)});
}

}  // namespace

double standard_normal(const NoiseKey& key, std::uint64_t i) noexcept {
  const auto r = block(key, i / 2);
  return (i % 2 == 0) ? inverse_normal_cdf(open_uniform(r[0], r[1])) : inverse_normal_cdf(open_uniform(r[2], r[3]));
}

void fill_increments(const NoiseKey& key, double h, std::span<double> out) noexcept {
  const double s = std::sqrt(h);
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; i += 2) {
    const auto r = block(key, i / 2);
    out[i] = s * inverse_normal_cdf(open_uniform(r[0], r[1]));
    if (i + 1 < n) out[i + 1] = s * inverse_normal_cdf(open_uniform(r[2], r[3]));
  }
}

NoiseStream noise(std::uint64_t seed, std::uint64_t path_id, std::size_t n, double T) {
  if (n < 1) throw InvalidArgument("noise: n must be >= 1");
  if (!(T > 0.0)) throw InvalidArgument("noise: horizon must be positive");
  NoiseStream ns;
  ns.seed = seed;
  ns.path_id = path_id;
  ns.n = n;
  ns.T = T;
  ns.h = T / static_cast<double>(n);
  ns.dB.resize(n);
  fill_increments({seed, path_id, 0}, ns.h, ns.dB);
  return ns;
}

}  // namespace snfl
