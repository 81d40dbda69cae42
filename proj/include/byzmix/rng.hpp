#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace byzmix {

/// Engine used by every stochastic routine. Each task owns its own instance.
using Rng = std::mt19937_64;

/// SplitMix64 finaliser; bijective mixing of a 64-bit word.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derive an independent stream seed from a base seed and a sequence of tags.
/// Used to give data sampling, partitioning, failure selection and failure
/// noise their own streams so that changing one never shifts another.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) noexcept;

/// Stable 64-bit tag for a short ASCII label (FNV-1a).
std::uint64_t tag(const char* label) noexcept;

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  return Rng(derive_seed(base, tags));
}

}  // namespace byzmix
