#include "snstf/aopp.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace snstf {

AoppSimResult aopp_simulate(const std::vector<std::uint8_t>& alice,
                            const std::vector<std::uint8_t>& bob, std::uint64_t seed) {
  if (alice.size() != bob.size()) throw std::invalid_argument("bit strings differ in length");
  std::vector<std::size_t> zeros, ones;
  for (std::size_t i = 0; i < bob.size(); ++i) {
    if (bob[i] > 1 || alice[i] > 1) throw std::invalid_argument("bit strings must hold 0 or 1");
    (bob[i] ? ones : zeros).push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(zeros.begin(), zeros.end(), rng);
  std::shuffle(ones.begin(), ones.end(), rng);

  AoppSimResult out;
  const std::size_t n_p = std::min(zeros.size(), ones.size());
  out.pairs.reserve(n_p);
  for (std::size_t k = 0; k < n_p; ++k) {
    AoppPair pr{std::min(zeros[k], ones[k]), std::max(zeros[k], ones[k]), false};
    pr.kept = (alice[pr.first] ^ alice[pr.second]) == 1;
    if (pr.kept) {
      out.alice.push_back(alice[pr.second]);
      out.bob.push_back(bob[pr.second]);
      if (alice[pr.second] != bob[pr.second]) ++out.errors;
    }
    out.pairs.push_back(pr);
  }
  return out;
}

}  // namespace snstf
