#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace wtm {

/// Philox4x32-10 counter-based block cipher (Salmon et al., SC'11).
/// Stateless: the output depends only on (counter, key).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter generate(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
      }
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }
};

/// SplitMix64 finalizer; folds seeds and stream tags into Philox keys.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Purposes that get disjoint random streams under one master seed.
enum class StreamTag : std::uint32_t {
  Trajectory = 1,
  AnchorCloud = 2,
  ScanCloud = 3,
  LatticeCloud = 4,
  EquilibriumCloud = 5,
  Sampling = 6,
  Oracle = 7,
  Test = 99,
};

/// A stream of 32-bit words addressed by (seed, tag, a, b).
///
/// Key = splitmix64(seed ^ splitmix64(tag)); counter = {block lo, block hi, a, b}.
/// Block k yields words 4k .. 4k+3. Streams with different (tag, a, b) are
/// independent, and any block can be computed without touching another.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, StreamTag tag, std::uint32_t a = 0, std::uint32_t b = 0) noexcept
      : a_(a), b_(b) {
    const std::uint64_t k = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(tag)));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
  }

  Philox4x32::Counter block(std::uint64_t index) const noexcept {
    return Philox4x32::generate(
        {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), a_, b_}, key_);
  }

  std::uint32_t next_word() noexcept {
    if (cursor_ % 4 == 0) buffer_ = block(cursor_ / 4);
    return buffer_[cursor_++ % 4];
  }

  /// Uniform on (0, 1) with 53 random bits taken from two words.
  double next_uniform() noexcept {
    const std::uint64_t hi = next_word() >> 5;
    const std::uint64_t lo = next_word() >> 6;
    return (static_cast<double>((hi << 26) | lo) + 0.5) * 0x1.0p-53;
  }

  std::uint64_t words_consumed() const noexcept { return cursor_; }

 private:
  Philox4x32::Key key_{};
  std::uint32_t a_;
  std::uint32_t b_;
  std::uint64_t cursor_ = 0;
  Philox4x32::Counter buffer_{};
};

namespace detail {

/// Layer tables for the 256-layer normal ziggurat (Marsaglia & Tsang 2000).
/// x[0] = V / f(R) is the width of the base strip, x[1] = R, x[256] = 0,
/// f(x) = exp(-x^2 / 2) unnormalized.
struct ZigguratTables {
  static constexpr double R = 3.6541528853610088;
  std::array<double, 257> x{};
  std::array<double, 257> f{};

  ZigguratTables() {
    const double fR = std::exp(-0.5 * R * R);
    const double area = R * fR + std::sqrt(std::numbers::pi / 2.0) * std::erfc(R / std::numbers::sqrt2);
    x[0] = area / fR;
    x[1] = R;
    for (int i = 1; i < 256; ++i) {
      const double arg = area / x[i] + std::exp(-0.5 * x[i] * x[i]);
      x[i + 1] = arg >= 1.0 ? 0.0 : std::sqrt(-2.0 * std::log(arg));
    }
    x[256] = 0.0;
    for (int i = 0; i < 257; ++i) f[i] = std::exp(-0.5 * x[i] * x[i]);
  }

  static const ZigguratTables& instance() {
    static const ZigguratTables tables;
    return tables;
  }
};

}  // namespace detail

/// Sequential N(0,1) draws from one counter stream via the ziggurat method.
///
/// Each draw takes one 32-bit word: bits 0..7 pick the layer, bits 8..31
/// give a signed uniform u in (-1, 1) on a 2^-23 lattice; the candidate is
/// u * x[i]. About 99% of draws are accepted on this fast path. Rejections
/// and the tail (Marsaglia's exponential method beyond R) consume further
/// words from the same stream, so the sequence is a pure function of
/// (seed, tag, a, b).
class NormalSequence {
 public:
  NormalSequence(std::uint64_t seed, StreamTag tag, std::uint32_t a = 0, std::uint32_t b = 0) noexcept
      : stream_(seed, tag, a, b), tables_(&detail::ZigguratTables::instance()) {}

  double operator()() noexcept {
    const auto& t = *tables_;
    for (;;) {
      const std::uint32_t bits = stream_.next_word();
      const auto i = static_cast<int>(bits & 0xFFu);
      const double u = (static_cast<double>(bits >> 8) + 0.5) * 0x1.0p-23 - 1.0;
      const double x = u * t.x[i];
      if (std::abs(x) < t.x[i + 1]) return x;
      if (i == 0) return tail(u < 0.0);
      if (t.f[i + 1] + (t.f[i] - t.f[i + 1]) * stream_.next_uniform() < std::exp(-0.5 * x * x)) return x;
    }
  }

  const CounterStream& stream() const noexcept { return stream_; }

 private:
  double tail(bool negative) noexcept {
    constexpr double R = detail::ZigguratTables::R;
    double x = 0.0;
    double y = 0.0;
    do {
      x = std::log(stream_.next_uniform()) / R;
      y = std::log(stream_.next_uniform());
    } while (-2.0 * y < x * x);
    return negative ? x - R : R - x;
  }

  CounterStream stream_;
  const detail::ZigguratTables* tables_;
};

}  // namespace wtm
