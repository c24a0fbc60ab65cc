#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ggtvae {

// Error taxonomy. Everything derives from std::runtime_error so callers can
// catch broadly; the CLI maps ParseError/ValueError/DimError to exit code 2
// and TrainingError to exit code 3.
struct DimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValueError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// splitmix64, used to derive independent stream seeds from (seed, tag).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(seed ^ (stream * 0x9e3779b97f4a7c15ULL)) + index);
}

// Seed streams used by training; fixed so runs are reproducible bit for bit.
namespace streams {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kNegatives = 2;
inline constexpr std::uint64_t kReparam = 3;
inline constexpr std::uint64_t kValNeg = 4;
inline constexpr std::uint64_t kTestNeg = 5;
inline constexpr std::uint64_t kEvalSubsample = 6;
}  // namespace streams

}  // namespace ggtvae
