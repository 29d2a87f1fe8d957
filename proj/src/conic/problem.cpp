#include "direg/conic/problem.hpp"

#include "direg/error.hpp"

#include <numbers>

namespace direg::conic {

using nlohmann::json;

void validate(const ConicProblem& p) {
  validate(p.cones);
  if (p.A.rows() != p.b.size() || p.A.cols() != p.c.size()) {
    throw ValidationError("conic problem: A is " + std::to_string(p.A.rows()) + "x" + std::to_string(p.A.cols()) +
                          " but b has " + std::to_string(p.b.size()) + " and c has " + std::to_string(p.c.size()) +
                          " entries");
  }
  if (dimension(p.cones) != p.b.size()) {
    throw ValidationError("conic problem: cones cover " + std::to_string(dimension(p.cones)) + " rows, A has " +
                          std::to_string(p.b.size()));
  }
  if (!p.c.allFinite() || !p.b.allFinite()) throw ValidationError("conic problem: non-finite data");
}

json to_json(const ConicProblem& p) {
  json a = {{"m", p.A.rows()}, {"n", p.A.cols()}, {"rows", json::array()}, {"cols", json::array()}, {"vals", json::array()}};
  for (int k = 0; k < p.A.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(p.A, k); it; ++it) {
      a["rows"].push_back(it.row());
      a["cols"].push_back(it.col());
      a["vals"].push_back(it.value());
    }
  }
  json cones = json::array();
  for (const auto& c : p.cones) cones.push_back({{"type", to_string(c.kind)}, {"size", c.size}});
  return {{"c", std::vector<double>(p.c.data(), p.c.data() + p.c.size())},
          {"b", std::vector<double>(p.b.data(), p.b.data() + p.b.size())},
          {"A", a},
          {"cones", cones}};
}

ConicProblem problem_from_json(const json& j) {
  try {
    ConicProblem p;
    const auto c = j.at("c").get<std::vector<double>>();
    const auto b = j.at("b").get<std::vector<double>>();
    p.c = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
    p.b = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    const json& a = j.at("A");
    const auto rows = a.at("rows").get<std::vector<int>>();
    const auto cols = a.at("cols").get<std::vector<int>>();
    const auto vals = a.at("vals").get<std::vector<double>>();
    if (rows.size() != cols.size() || rows.size() != vals.size()) throw ValidationError("A: triplet arrays differ in length");
    const int m = a.value("m", static_cast<int>(b.size()));
    const int n = a.value("n", static_cast<int>(c.size()));
    std::vector<Eigen::Triplet<double>> t;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (rows[k] < 0 || rows[k] >= m || cols[k] < 0 || cols[k] >= n) throw ValidationError("A: triplet out of range");
      t.emplace_back(rows[k], cols[k], vals[k]);
    }
    p.A.resize(m, n);
    p.A.setFromTriplets(t.begin(), t.end());
    for (const auto& cj : j.at("cones")) {
      p.cones.push_back({cone_kind_from_string(cj.at("type").get<std::string>()), cj.at("size").get<int>()});
    }
    validate(p);
    return p;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("conic problem JSON: ") + e.what());
  }
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& o) {
  constant += o.constant;
  terms.insert(terms.end(), o.terms.begin(), o.terms.end());
  return *this;
}

AffineExpr& AffineExpr::operator-=(const AffineExpr& o) {
  constant -= o.constant;
  for (const auto& [v, k] : o.terms) terms.emplace_back(v, -k);
  return *this;
}

AffineExpr& AffineExpr::operator*=(double k) {
  constant *= k;
  for (auto& t : terms) t.second *= k;
  return *this;
}

double AffineExpr::evaluate(const Eigen::VectorXd& x) const {
  double v = constant;
  for (const auto& [i, k] : terms) v += k * x[i];
  return v;
}

AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
AffineExpr operator*(double k, AffineExpr a) { return a *= k; }

int ProblemBuilder::add_variables(int count) {
  const int first = num_vars_;
  num_vars_ += count;
  return first;
}

void ProblemBuilder::add_block(const Cone& cone, const std::vector<AffineExpr>& rows) {
  if (static_cast<int>(rows.size()) != cone.dimension()) throw ValidationError("add_block: row count does not match cone");
  for (const auto& e : rows) {
    // s = e = constant + sum coef x  <=>  (-coef) x + s = constant
    const int r = num_rows();
    for (const auto& [v, k] : e.terms) {
      if (v < 0 || v >= num_vars_) throw ValidationError("add_block: unknown variable");
      if (k != 0.0) triplets_.emplace_back(r, v, -k);
    }
    b_.push_back(e.constant);
  }
  cones_.push_back(cone);
}

void ProblemBuilder::add_psd(const std::vector<std::vector<AffineExpr>>& lower) {
  const int side = static_cast<int>(lower.size());
  std::vector<AffineExpr> rows;
  rows.reserve(static_cast<std::size_t>(side * (side + 1) / 2));
  for (int j = 0; j < side; ++j) {
    for (int i = j; i < side; ++i) {
      AffineExpr e = lower[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (i != j) e *= std::numbers::sqrt2;
      rows.push_back(std::move(e));
    }
  }
  add_block({ConeKind::Psd, side}, rows);
}

void ProblemBuilder::add_exp(const std::vector<std::array<AffineExpr, 3>>& triples) {
  std::vector<AffineExpr> rows;
  for (const auto& t : triples) rows.insert(rows.end(), t.begin(), t.end());
  add_block({ConeKind::Exp, static_cast<int>(triples.size())}, rows);
}

void ProblemBuilder::set_objective(const AffineExpr& objective) { objective_ = objective; }

ConicProblem ProblemBuilder::build() const {
  ConicProblem p;
  p.c = Eigen::VectorXd::Zero(num_vars_);
  for (const auto& [v, k] : objective_.terms) p.c[v] += k;
  p.A.resize(num_rows(), num_vars_);
  p.A.setFromTriplets(triplets_.begin(), triplets_.end());
  p.b = Eigen::Map<const Eigen::VectorXd>(b_.data(), static_cast<Eigen::Index>(b_.size()));
  p.cones = cones_;
  return p;
}

}  // namespace direg::conic
