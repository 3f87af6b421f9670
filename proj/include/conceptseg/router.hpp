#ifndef CONCEPTSEG_ROUTER_HPP
#define CONCEPTSEG_ROUTER_HPP

#include <string>

namespace conceptseg {

enum class RoutePath { Direct, Reason };

struct RouteDecision {
  double threshold = 0.0;
  double presence = 0.0;
  RoutePath path = RoutePath::Reason;
};

// T = clamp(0.1 * 2^(l-1), 0, 1) with l the whitespace word count of the
// instruction, clamped below at 1. Saturates at 1.0 for l >= 5.
double router_threshold(const std::string& instruction);

// Direct iff presence >= threshold; the tie goes Direct.
RouteDecision route(double presence, const std::string& instruction);

}  // namespace conceptseg

#endif
