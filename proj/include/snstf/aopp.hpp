#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace snstf {

struct AoppPair {
  std::size_t first = 0;   // lower position
  std::size_t second = 0;  // higher position; its bit is the one kept
  bool kept = false;
};

struct AoppSimResult {
  std::vector<std::uint8_t> alice;  // surviving bits
  std::vector<std::uint8_t> bob;
  std::vector<AoppPair> pairs;
  std::size_t errors = 0;

  std::size_t n_p() const { return pairs.size(); }
  std::size_t survivors() const { return alice.size(); }
  double error_rate() const {
    return alice.empty() ? 0.0 : static_cast<double>(errors) / static_cast<double>(alice.size());
  }
};

/// Bob pairs each of a random selection of his 0 bits with a random 1 bit;
/// leftovers are dropped. A pair survives when Alice's parity is also odd,
/// and both parties keep the bit at the later position.
/// Throws std::invalid_argument on length mismatch or non-binary input.
AoppSimResult aopp_simulate(const std::vector<std::uint8_t>& alice,
                            const std::vector<std::uint8_t>& bob, std::uint64_t seed);

}  // namespace snstf
