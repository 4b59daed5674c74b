#pragma once

#include <span>
#include <vector>

#include "alseg/rng.h"
#include "alseg/tensor.h"

// Differentiable primitives. Shape mismatches throw ContractError.
namespace alseg::ops {

Var matmul(Var a, Var b);
// Elementwise sum; `b` may also be a 1xn row broadcast over the rows of `a`.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var transpose(Var a);

Var sigmoid(Var a);
Var tanh(Var a);
Var softplus(Var a);
Var exp(Var a);
Var log(Var a);

// Softmax over the last axis (each row).
Var softmax_rows(Var a);

// Concatenation over the last axis.
Var concat_cols(Var a, Var b);
Var stack_rows(std::span<const Var> rows);
Var slice_cols(Var a, Index begin, Index count);
Var slice_rows(Var a, Index begin, Index count);

// Inverted dropout; identity when !train or rate == 0.
Var dropout(Var a, double rate, bool train, Rng& rng);

Var sum(Var a);
Var mean(Var a);
// Mean over rows -> 1 x cols.
Var mean_rows(Var a);
// sum((a - b)^2) -> 1x1.
Var squared_error(Var a, Var b);

// Value passes through; no gradient flows back.
Var stop_gradient(Var a);

// Scalar helpers with the same numerics as the tape ops.
double sigmoid(double x);
double softplus(double x);

}  // namespace alseg::ops
