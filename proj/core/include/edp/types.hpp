#ifndef EDP_TYPES_HPP_
#define EDP_TYPES_HPP_

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace edp {

// Batches are stored column-wise: one sample per column.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

using Rng = std::mt19937_64;

// Fills a rows x cols matrix with independent N(0, 1) draws.
Matrix standard_normal(Index rows, Index cols, Rng& rng);
Vector standard_normal(Index size, Rng& rng);

// Rng seeded from (seed, a, b): used to derive independent per-step streams.
Rng derive_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// Rounds every entry to the nearest float. Parameters and optimizer moments
// are kept at float precision so checkpoints (32-bit payload) are lossless.
template <typename Derived>
void round_to_float(Eigen::MatrixBase<Derived>& m) {
  m = m.template cast<float>().template cast<double>();
}

}  // namespace edp

#endif  // EDP_TYPES_HPP_
