#pragma once

#include <cstddef>
#include <span>

#include "laser/diffcore/tape.hpp"

// Differentiable primitives. Every op records its result on the tape of its
// operands and raises NumericError if the result is not finite.
//
// Binary elementwise ops accept a right operand of the same shape, a single
// row [1, cols] broadcast over rows, or a single element.
namespace laser::diff {

Var matmul(Var a, Var b);
// x * w + b with b a [1, cols] row; one node per dense layer.
Var linear(Var x, Var w, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var minimum(Var a, Var b);

Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var neg(Var a);

Var tanh(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
// Identity inside [lo, hi]; zero gradient where clamped.
Var clamp(Var a, double lo, double hi);

Var sum(Var a);
Var mean(Var a);
// [rows, cols] -> [rows, 1]
Var row_sum(Var a);

Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);

}  // namespace laser::diff
