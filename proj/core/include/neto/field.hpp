#pragma once

#include <utility>

#include "neto/types.hpp"

namespace neto {

/// Batched scalar field over R^3. Points are the columns of a 3xN matrix;
/// implementations must be pure (two identical calls return identical bits).
template <typename T>
class FieldBatchT {
 public:
  virtual ~FieldBatchT() = default;

  /// Field values at the given points. `out` is resized to N.
  virtual void values(const MatXT<T>& pts, VecXT<T>& out) const = 0;

  /// Field values and spatial gradients. `grad` is resized to 3xN.
  virtual void value_grad(const MatXT<T>& pts, VecXT<T>& val,
                          MatXT<T>& grad) const = 0;
};

using ScalarField = FieldBatchT<double>;

template <typename T>
T field_value(const FieldBatchT<T>& f, const Vec3T<T>& x) {
  MatXT<T> pts(3, 1);
  pts.col(0) = x;
  VecXT<T> out;
  f.values(pts, out);
  return out[0];
}

template <typename T>
std::pair<T, Vec3T<T>> field_value_grad(const FieldBatchT<T>& f,
                                        const Vec3T<T>& x) {
  MatXT<T> pts(3, 1);
  pts.col(0) = x;
  VecXT<T> val;
  MatXT<T> grad;
  f.value_grad(pts, val, grad);
  return {val[0], grad.col(0)};
}

}  // namespace neto
