#include "conceptseg/router.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace conceptseg {

namespace {

int word_count_min1(const std::string& s) {
  int n = 0;
  bool in_word = false;
  for (char c : s) {
    const bool ws = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!ws && !in_word) ++n;
    in_word = !ws;
  }
  return std::max(n, 1);
}

}  // namespace

double router_threshold(const std::string& instruction) {
  const int len = word_count_min1(instruction);
  const double raw = 0.1 * std::exp2(static_cast<double>(len - 1));
  return std::clamp(raw, 0.0, 1.0);
}

RouteDecision route(double presence, const std::string& instruction) {
  RouteDecision d;
  d.threshold = router_threshold(instruction);
  d.presence = presence;
  d.path = presence >= d.threshold ? RoutePath::Direct : RoutePath::Reason;
  return d;
}

}  // namespace conceptseg
