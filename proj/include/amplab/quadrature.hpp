#pragma once

#include <array>

namespace amplab {

/// 4-point Gauss-Legendre rule mapped to the reference element [0,1];
/// weights sum to one, so an element integral is h * sum(w_q * g(t_q)).
/// Exact through degree 7, in particular for products of linears.
struct Gauss4 {
  static constexpr std::array<double, 4> t = {
      0.5 - 0.43056815579702629 /* (1+x2)/2 */,
      0.5 - 0.16999052179242816 /* (1+x1)/2 */,
      0.5 + 0.16999052179242816,
      0.5 + 0.43056815579702629,
  };
  static constexpr std::array<double, 4> w = {
      0.17392742256872692,
      0.32607257743127305,
      0.32607257743127305,
      0.17392742256872692,
  };
};

}  // namespace amplab
