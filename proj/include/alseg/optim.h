#pragma once

#include <vector>

#include "alseg/params.h"

namespace alseg {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Global gradient-norm clip; <= 0 disables.
  double clip_norm = 5.0;
};

struct AdamState {
  long step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

// One bias-corrected Adam update. `grads` is clipped in place. Throws
// NumericError (naming the parameter) on non-finite gradients.
void adam_step(ParameterSet& params, Gradients& grads, const AdamOptions& opts,
               AdamState& state);

}  // namespace alseg
