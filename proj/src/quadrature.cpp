#include "mprelease/quadrature.hpp"

#include <string>
#include <vector>

namespace mprelease {

void QuadratureSpec::validate() const {
  if (nodes_per_panel < 2) throw DomainError("quadrature: nodes_per_panel must be >= 2");
  if (panels < 1) throw DomainError("quadrature: panels must be >= 1");
  if (grading_levels < 0 || grading_levels > 60) throw DomainError("quadrature: grading_levels must be in [0, 60]");
}

namespace {

// Splits [a, b] geometrically toward `a` (toward_lower) or `b`.
void append_graded(std::vector<double>& cuts, double a, double b, int levels, bool toward_lower) {
  const double w = b - a;
  if (toward_lower) {
    for (int k = levels; k >= 1; --k) cuts.push_back(a + w * std::ldexp(1.0, -k));
    cuts.push_back(b);
  } else {
    for (int k = 1; k <= levels; ++k) cuts.push_back(b - w * std::ldexp(1.0, -k));
    cuts.push_back(b);
  }
}

}  // namespace

QuadratureRule composite_rule(double lower, double upper, const QuadratureSpec& spec, Grading grading) {
  spec.validate();
  if (!(lower <= upper)) throw DomainError("composite_rule: lower bound exceeds upper bound");
  const bool grade_lo = grading == Grading::lower || grading == Grading::both;
  const bool grade_hi = grading == Grading::upper || grading == Grading::both;

  std::vector<double> outer;
  int panels = spec.panels;
  if (panels == 1 && grade_lo && grade_hi) panels = 2;
  for (int p = 0; p <= panels; ++p) outer.push_back(lower + (upper - lower) * p / panels);
  outer.back() = upper;

  std::vector<double> cuts{lower};
  for (int p = 0; p < panels; ++p) {
    const double a = outer[p], b = outer[p + 1];
    if (p == 0 && grade_lo && spec.grading_levels > 0) {
      append_graded(cuts, a, b, spec.grading_levels, true);
    } else if (p == panels - 1 && grade_hi && spec.grading_levels > 0) {
      append_graded(cuts, a, b, spec.grading_levels, false);
    } else {
      cuts.push_back(b);
    }
  }

  const auto base = gauss_legendre<double>(spec.nodes_per_panel);
  const Eigen::Index q = base.nodes.size();
  const Eigen::Index segments = static_cast<Eigen::Index>(cuts.size()) - 1;
  QuadratureRule rule;
  rule.nodes.resize(segments * q);
  rule.weights.resize(segments * q);
  for (Eigen::Index s = 0; s < segments; ++s) {
    const double half = 0.5 * (cuts[s + 1] - cuts[s]);
    const double mid = 0.5 * (cuts[s + 1] + cuts[s]);
    rule.nodes.segment(s * q, q) = (mid + half * base.nodes.array()).matrix();
    rule.weights.segment(s * q, q) = half * base.weights;
  }
  return rule;
}

}  // namespace mprelease
