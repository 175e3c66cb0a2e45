#pragma once

#include <cstdint>
#include <random>

namespace gsr {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive independent stream seeds from a base
/// seed and a stream index, so parallel and serial generation agree.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return mix_seed(mix_seed(base) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

/// Stream tags so different consumers of one base seed never collide.
namespace stream {
inline constexpr std::uint64_t kTrainingRuns = 1;
inline constexpr std::uint64_t kDiagnosisRuns = 2;
inline constexpr std::uint64_t kTrainingNoise = 3;
inline constexpr std::uint64_t kValidationNoise = 4;
inline constexpr std::uint64_t kInit = 5;
inline constexpr std::uint64_t kShuffle = 6;
inline constexpr std::uint64_t kDropout = 7;
inline constexpr std::uint64_t kCalibrationRuns = 8;
}  // namespace stream

}  // namespace gsr
