#pragma once

#include <cmath>
#include <cstdint>

// Counter-based random numbers.
//
// All randomness in this library is a pure function of (stream seed, draw
// index), built on the splitmix64 finalizer:
//
//   raw(seed, idx)  = mix64(seed + (idx + 1) * golden)
//
// Stream seeds are derived, never chosen by hand:
//
//   substream(master, member, kind) = mix64(mix64(master ^ kind) + member * golden)
//
// where `kind` is one of the salts below and `member` identifies a sensor
// (1-based) or a Monte Carlo run index. Independent kinds give statistically
// independent streams from one master seed; regenerating a stream always
// yields the same values, which is what makes paired cooperative /
// non-cooperative runs and replay-from-CSV possible.

namespace dsg {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

inline constexpr std::uint64_t raw_draw(std::uint64_t stream_seed,
                                        std::uint64_t index) noexcept {
  return mix64(stream_seed + (index + 1) * kGolden);
}

enum class StreamKind : std::uint64_t {
  state_input = 0x51a5f1d5b2c1e0f3ULL,        // xi driving the regressor state
  observation_noise = 0x9ae16a3b2f90404fULL,  // eps in the measurement
  regressor = 0xc2b2ae3d27d4eb4fULL,          // iid regressor components
  run = 0x632be59bd9b4e019ULL,                // Monte Carlo run substreams
  instance = 0x165667b19e3779f9ULL,           // random sweep instances
};

inline constexpr std::uint64_t substream_seed(std::uint64_t master,
                                              std::uint64_t member,
                                              StreamKind kind) noexcept {
  return mix64(mix64(master ^ static_cast<std::uint64_t>(kind)) +
               member * kGolden);
}

inline constexpr std::uint64_t run_seed(std::uint64_t master,
                                        std::uint64_t run_index) noexcept {
  return substream_seed(master, run_index, StreamKind::run);
}

// Uniform on [0, 1), 53-bit resolution.
inline double uniform_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Standard normal draw t of a stream; consumes raw indices 2t and 2t+1.
// Box-Muller with u1 in (0,1] so the log never sees zero.
inline double gaussian_draw(std::uint64_t stream_seed, std::uint64_t t) noexcept {
  const std::uint64_t b0 = raw_draw(stream_seed, 2 * t);
  const std::uint64_t b1 = raw_draw(stream_seed, 2 * t + 1);
  const double u1 = static_cast<double>((b0 >> 11) + 1) * 0x1.0p-53;
  const double u2 = uniform_unit(b1);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(6.283185307179586476925286766559 * u2);
}

// Uniform integer in [lo, hi] (inclusive); single raw draw, negligible bias
// for the small ranges used by the sweep generators.
inline int uniform_int(std::uint64_t stream_seed, std::uint64_t t, int lo,
                       int hi) noexcept {
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo + 1);
  return lo + static_cast<int>(raw_draw(stream_seed, t) % span);
}

inline double uniform_range(std::uint64_t stream_seed, std::uint64_t t,
                            double lo, double hi) noexcept {
  return lo + (hi - lo) * uniform_unit(raw_draw(stream_seed, t));
}

}  // namespace dsg
