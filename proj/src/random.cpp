#include "squasplat/random.hpp"

#include <cmath>
#include <numbers>

namespace squasplat {

double CounterRng::normal() {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u = 1.0 - uniform();
  const double v = uniform();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

Vec3 CounterRng::unit_vector() {
  for (;;) {
    const Vec3 v(normal(), normal(), normal());
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

Vec4 CounterRng::unit_quaternion() {
  for (;;) {
    Vec4 q(normal(), normal(), normal(), normal());
    const double n = q.norm();
    if (n > 1e-12) {
      q /= n;
      if (q[0] < 0.0) q = -q;
      return q;
    }
  }
}

}  // namespace squasplat
