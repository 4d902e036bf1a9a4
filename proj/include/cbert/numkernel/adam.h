#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cbert/numkernel/tensor.h"

namespace cbert::nk {

using Buffer = std::vector<double>;

struct AdamState {
  std::uint64_t step = 0;
  std::vector<Buffer> m;  // first moments, one per parameter
  std::vector<Buffer> v;  // second moments
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamStepResult {
  std::vector<Buffer> params;
  AdamState state;
};

// One bias-corrected Adam update. Pure: the inputs are not modified and the
// same arguments always produce bitwise-identical output. Empty moment
// buffers in `state` are treated as zeros of the parameter's size.
AdamStepResult adam_step(const std::vector<Buffer>& params, const std::vector<Buffer>& grads,
                         const AdamState& state);

// In-place driver over leaf tensors, sharing the update rule above.
class Adam {
 public:
  Adam(std::vector<Tensor> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  // Applies the accumulated gradients, then clears them. Parameters with no
  // gradient this step are treated as having a zero gradient.
  void step();
  void zero_grad();
  const AdamState& state() const { return state_; }

 private:
  std::vector<Tensor> params_;
  AdamState state_;
};

// Rescales gradients so their global L2 norm is at most max_norm. Returns the
// norm before clipping.
double clip_grad_norm(std::span<Tensor> params, double max_norm);

}  // namespace cbert::nk
