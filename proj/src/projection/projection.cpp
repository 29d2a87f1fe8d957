#include "direg/projection.hpp"

namespace direg {

namespace {

double coeff(int k, int i, int a) { return (i == a ? k : 0) - 1.0; }

}  // namespace

CorrelatorVector::CorrelatorVector(const Scenario& s)
    : scenario(s),
      alice(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.inputs_a) * (s.outputs_a - 1))),
      bob(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.inputs_b) * (s.outputs_b - 1))),
      joint(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.settings()) * (s.outputs_a - 1) * (s.outputs_b - 1))) {}

CorrelatorVector correlators_from_behavior(const Behavior& p) {
  const Scenario& s = p.scenario();
  const int ka = s.outputs_a;
  const int kb = s.outputs_b;
  CorrelatorVector c(s);
  for (int x = 0; x < s.inputs_a; ++x) {
    for (int i = 0; i < ka - 1; ++i) {
      double acc = 0;
      for (int y = 0; y < s.inputs_b; ++y)
        for (int a = 0; a < ka; ++a) acc += coeff(ka, i, a) * p.marginal_a(a, x, y);
      c.a(i, x) = acc / s.inputs_b;
    }
  }
  for (int y = 0; y < s.inputs_b; ++y) {
    for (int j = 0; j < kb - 1; ++j) {
      double acc = 0;
      for (int x = 0; x < s.inputs_a; ++x)
        for (int b = 0; b < kb; ++b) acc += coeff(kb, j, b) * p.marginal_b(b, x, y);
      c.b(j, y) = acc / s.inputs_a;
    }
  }
  for (int x = 0; x < s.inputs_a; ++x)
    for (int y = 0; y < s.inputs_b; ++y)
      for (int i = 0; i < ka - 1; ++i)
        for (int j = 0; j < kb - 1; ++j) {
          double acc = 0;
          for (int a = 0; a < ka; ++a)
            for (int b = 0; b < kb; ++b) acc += coeff(ka, i, a) * coeff(kb, j, b) * p(a, b, x, y);
          c.ab(i, j, x, y) = acc;
        }
  return c;
}

CorrelatorVector correlators_from_behavior(const FrequencyTable& f) {
  return correlators_from_behavior(f.relative_frequencies());
}

Behavior behavior_from_correlators(const CorrelatorVector& c) {
  const Scenario& s = c.scenario;
  const int ka = s.outputs_a;
  const int kb = s.outputs_b;
  Eigen::VectorXd p(static_cast<Eigen::Index>(s.dimension()));
  std::vector<double> pa(static_cast<std::size_t>(ka)), pb(static_cast<std::size_t>(kb));
  for (int x = 0; x < s.inputs_a; ++x) {
    double rest_a = 1.0;
    for (int i = 0; i < ka - 1; ++i) rest_a -= pa[static_cast<std::size_t>(i)] = (1.0 + c.a(i, x)) / ka;
    pa[static_cast<std::size_t>(ka - 1)] = rest_a;
    for (int y = 0; y < s.inputs_b; ++y) {
      double rest_b = 1.0;
      for (int j = 0; j < kb - 1; ++j) rest_b -= pb[static_cast<std::size_t>(j)] = (1.0 + c.b(j, y)) / kb;
      pb[static_cast<std::size_t>(kb - 1)] = rest_b;
      // Joint entries below the last row/column, then close rows and columns with the marginals.
      for (int i = 0; i < ka - 1; ++i)
        for (int j = 0; j < kb - 1; ++j)
          p[static_cast<Eigen::Index>(s.index(i, j, x, y))] =
              (c.ab(i, j, x, y) + ka * pa[static_cast<std::size_t>(i)] + kb * pb[static_cast<std::size_t>(j)] - 1.0) /
              (ka * kb);
      for (int i = 0; i < ka - 1; ++i) {
        double r = pa[static_cast<std::size_t>(i)];
        for (int j = 0; j < kb - 1; ++j) r -= p[static_cast<Eigen::Index>(s.index(i, j, x, y))];
        p[static_cast<Eigen::Index>(s.index(i, kb - 1, x, y))] = r;
      }
      for (int j = 0; j < kb; ++j) {
        double r = pb[static_cast<std::size_t>(j)];
        for (int i = 0; i < ka - 1; ++i) r -= p[static_cast<Eigen::Index>(s.index(i, j, x, y))];
        p[static_cast<Eigen::Index>(s.index(ka - 1, j, x, y))] = r;
      }
    }
  }
  return Behavior(s, std::move(p));
}

ProjectionOperator projection_matrix_from_correlators(const Scenario& s) {
  const auto n = static_cast<Eigen::Index>(s.dimension());
  const int block = s.outputs_a * s.outputs_b;
  const Eigen::VectorXd offset = behavior_from_correlators(CorrelatorVector(s)).values();
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e[col] = 1.0;
    // Affine map minus its offset, plus the per-setting constant component of e.
    m.col(col) = behavior_from_correlators(correlators_from_behavior(Behavior(s, e))).values() - offset;
    const Eigen::Index start = (col / block) * block;
    m.col(col).segment(start, block).array() += 1.0 / block;
  }
  return {s, m};
}

ProjectionOperator projection_matrix(const Scenario& s) {
  if (s != Scenario::chsh()) return projection_matrix_from_correlators(s);
  static const Eigen::MatrixXd explicit_form = [] {
    const Scenario c = Scenario::chsh();
    const int quads[4][4] = {{1, -1, -1, 1}, {1, -1, -1, -1}, {-1, 1, 1, -1}, {-1, 1, -1, -1}};
    const auto pw = [](int base, int e) { return (e % 2 == 0) ? 1.0 : static_cast<double>(base); };
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(16, 16);
    for (std::size_t r = 0; r < 16; ++r) {
      const auto [a, b, x, y] = c.labels(r);
      for (std::size_t col = 0; col < 16; ++col) {
        const auto [a2, b2, x2, y2] = c.labels(col);
        double sum = 0;
        for (const auto& q : quads) sum += pw(q[0], a + a2) * pw(q[1], b + b2) * pw(q[2], x + x2) * pw(q[3], y + y2);
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col)) -= sum / 16.0;
      }
    }
    return m;
  }();
  return {s, explicit_form};
}

ProjectionResult project(const Behavior& f, double tol) {
  const Scenario& s = f.scenario();
  Eigen::VectorXd ns = s == Scenario::chsh()
                           ? Eigen::VectorXd(projection_matrix(s).matrix * f.values())
                           : behavior_from_correlators(correlators_from_behavior(f)).values();
  Eigen::VectorXd si = f.values() - ns;
  const double min_entry = ns.minCoeff();
  return {Behavior(s, std::move(ns)), std::move(si), min_entry < -tol, min_entry};
}

ProjectionResult project(const FrequencyTable& f, double tol) { return project(f.relative_frequencies(), tol); }

}  // namespace direg
