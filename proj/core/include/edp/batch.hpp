#ifndef EDP_BATCH_HPP_
#define EDP_BATCH_HPP_

#include "edp/types.hpp"

namespace edp {

// A minibatch of transitions, one per column.
struct TransitionBatch {
  Matrix s;       // dim(s) x B
  Matrix a;       // dim(a) x B
  RowVector r;    // B
  Matrix s_next;  // dim(s) x B
  RowVector done; // B, 0 or 1

  Index size() const { return s.cols(); }
};

}  // namespace edp

#endif  // EDP_BATCH_HPP_
