#include "cir/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace cir {

double finite_difference_check(const DifferentiableFn& f, const Tensor64& x,
                               double h) {
  require(h > 0.0, ErrorKind::kContract, "finite difference step must be positive");
  Tensor64 analytic(x.shape());
  f(x, &analytic);
  Tensor64 probe = x;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = f(probe, nullptr);
    probe[i] = orig - h;
    const double down = f(probe, nullptr);
    probe[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace cir
