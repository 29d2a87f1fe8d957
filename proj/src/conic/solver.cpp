#include "direg/conic/solver.hpp"

#include "direg/error.hpp"

#include <Eigen/SparseCholesky>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <random>

namespace direg::conic {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::PrimalInfeasible: return "primal_infeasible";
    case SolveStatus::DualInfeasible: return "dual_infeasible";
    case SolveStatus::MaxIters: return "max_iters";
    case SolveStatus::Numerical: return "numerical";
  }
  return "?";
}

namespace {

constexpr double kMinScale = 1e-6;
constexpr double kMaxScale = 1e6;
constexpr double kZeroConeFactor = 1e3;

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Row scaling must be constant on blocks whose cone is not a product of rays.
struct RowGroups {
  std::vector<std::pair<int, int>> ranges;  // [start, end) with one shared factor
};

RowGroups row_groups(const ConeSpec& cones) {
  RowGroups g;
  int off = 0;
  for (const auto& c : cones) {
    const int d = c.dimension();
    switch (c.kind) {
      case ConeKind::Zero:
      case ConeKind::Nonneg:
        for (int i = 0; i < d; ++i) g.ranges.emplace_back(off + i, off + i + 1);
        break;
      case ConeKind::Exp:
        for (int k = 0; k < c.size; ++k) g.ranges.emplace_back(off + 3 * k, off + 3 * k + 3);
        break;
      default:
        g.ranges.emplace_back(off, off + d);
    }
    off += d;
  }
  return g;
}

class Workspace {
 public:
  Workspace(const ConicProblem& p, const SolverOptions& o) : prob_(p), opt_(o) {
    n_ = p.num_variables();
    m_ = p.num_constraints();
    l_ = n_ + m_ + 1;
    equilibrate();
    zero_rows_ = Eigen::VectorXd::Zero(m_);
    int off = 0;
    for (const auto& c : p.cones) {
      if (c.kind == ConeKind::Zero) zero_rows_.segment(off, c.dimension()).setOnes();
      off += c.dimension();
    }
    scale_ = o.scale;
    set_weights();
    factor();
  }

  ConicSolution run();

 private:
  void equilibrate();
  void set_weights();
  void factor();
  void solve_m0(const Eigen::VectorXd& fx, const Eigen::VectorXd& fy, Eigen::VectorXd& ax, Eigen::VectorXd& ay) const;
  // One Douglas-Rachford evaluation at w: fills ut (linear step), u (projection), returns T(w).
  Eigen::VectorXd apply(const Eigen::VectorXd& w, Eigen::VectorXd& ut, Eigen::VectorXd& u) const;
  void project_c(Eigen::Ref<Eigen::VectorXd> z) const;

  struct Residuals {
    double pres, dres, gap, pobj, dobj, p_scale, d_scale, g_scale;
    bool converged;
    double rel_p, rel_d;
    double worst;  // max of residuals and gap, each over (1 + scale)
  };
  Residuals residuals(const Eigen::VectorXd& u, const Eigen::VectorXd& v, Eigen::VectorXd& x, Eigen::VectorXd& y,
                      Eigen::VectorXd& s) const;
  bool primal_infeasible(const Eigen::VectorXd& u, Eigen::VectorXd& y) const;
  bool dual_infeasible(const Eigen::VectorXd& u, const Eigen::VectorXd& v, Eigen::VectorXd& x, Eigen::VectorXd& s) const;

  const ConicProblem& prob_;
  const SolverOptions& opt_;
  int n_ = 0, m_ = 0, l_ = 0;

  SparseMatrix a_;   // scaled A
  SparseMatrix at_;  // its transpose
  Eigen::VectorXd b_, c_, d_, e_;
  Eigen::VectorXd zero_rows_;

  double scale_ = 0.1;
  Eigen::VectorXd r_;  // diagonal weights (x, y, tau)
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
  Eigen::VectorXd gx_, gy_;
  double den_ = 1.0;
};

void Workspace::equilibrate() {
  a_ = prob_.A;
  a_.makeCompressed();
  d_ = Eigen::VectorXd::Ones(m_);
  e_ = Eigen::VectorXd::Ones(n_);
  const RowGroups groups = row_groups(prob_.cones);
  for (int pass = 0; pass < opt_.equilibration_passes; ++pass) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(m_);
    Eigen::VectorXd col = Eigen::VectorXd::Zero(n_);
    for (int k = 0; k < a_.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(a_, k); it; ++it) {
        const double v = std::abs(it.value());
        row[it.row()] = std::max(row[it.row()], v);
        col[it.col()] = std::max(col[it.col()], v);
      }
    }
    Eigen::VectorXd dr = Eigen::VectorXd::Ones(m_);
    for (const auto& [lo, hi] : groups.ranges) {
      const double mx = row.segment(lo, hi - lo).maxCoeff();
      const double f = mx > 1e-12 ? 1.0 / std::sqrt(mx) : 1.0;
      dr.segment(lo, hi - lo).setConstant(f);
    }
    Eigen::VectorXd ec(n_);
    for (int j = 0; j < n_; ++j) ec[j] = col[j] > 1e-12 ? 1.0 / std::sqrt(col[j]) : 1.0;
    const Eigen::VectorXd dnew = (d_.array() * dr.array()).cwiseMax(1e-4).cwiseMin(1e4);
    const Eigen::VectorXd enew = (e_.array() * ec.array()).cwiseMax(1e-4).cwiseMin(1e4);
    dr = dnew.cwiseQuotient(d_);
    ec = enew.cwiseQuotient(e_);
    a_ = dr.asDiagonal() * a_ * ec.asDiagonal();
    d_ = dnew;
    e_ = enew;
    if ((dr.array() - 1).abs().maxCoeff() < 1e-3 && (ec.array() - 1).abs().maxCoeff() < 1e-3) break;
  }
  at_ = a_.transpose();
  b_ = d_.cwiseProduct(prob_.b);
  c_ = e_.cwiseProduct(prob_.c);
}

void Workspace::set_weights() {
  r_.resize(l_);
  r_.head(n_).setConstant(opt_.rho_x);
  for (int i = 0; i < m_; ++i) r_[n_ + i] = zero_rows_[i] > 0 ? 1.0 / (kZeroConeFactor * scale_) : 1.0 / scale_;
  r_[l_ - 1] = 1.0;
}

void Workspace::factor() {
  const Eigen::VectorXd inv_ry = r_.segment(n_, m_).cwiseInverse();
  SparseMatrix k = at_ * inv_ry.asDiagonal() * a_;
  SparseMatrix id(n_, n_);
  id.setIdentity();
  k += opt_.rho_x * id;
  ldlt_.compute(k);
  if (ldlt_.info() != Eigen::Success) throw SolverError("conic solver: factorization failed");
  solve_m0(c_, b_, gx_, gy_);
  den_ = r_[l_ - 1] + c_.dot(gx_) + b_.dot(gy_);
}

// [[rho_x I, A'], [-A, R_y]] [ax; ay] = [fx; fy]
void Workspace::solve_m0(const Eigen::VectorXd& fx, const Eigen::VectorXd& fy, Eigen::VectorXd& ax,
                         Eigen::VectorXd& ay) const {
  const Eigen::VectorXd ry = r_.segment(n_, m_);
  const Eigen::VectorXd t = fy.cwiseQuotient(ry);
  ax = ldlt_.solve(fx - at_ * t);
  ay = (fy + a_ * ax).cwiseQuotient(ry);
}

void Workspace::project_c(Eigen::Ref<Eigen::VectorXd> z) const {
  project_dual_cone_inplace(z.segment(n_, m_), prob_.cones);
  z[l_ - 1] = std::max(z[l_ - 1], 0.0);
}

Eigen::VectorXd Workspace::apply(const Eigen::VectorXd& w, Eigen::VectorXd& ut, Eigen::VectorXd& u) const {
  const Eigen::VectorXd z = r_.cwiseProduct(w);
  Eigen::VectorXd qx, qy;
  solve_m0(z.head(n_), z.segment(n_, m_), qx, qy);
  const double tau = (z[l_ - 1] + c_.dot(qx) + b_.dot(qy)) / den_;
  ut.resize(l_);
  ut.head(n_) = qx - tau * gx_;
  ut.segment(n_, m_) = qy - tau * gy_;
  ut[l_ - 1] = tau;
  u = 2.0 * ut - w;
  project_c(u);
  return w + opt_.alpha * (u - ut);
}

Workspace::Residuals Workspace::residuals(const Eigen::VectorXd& u, const Eigen::VectorXd& v, Eigen::VectorXd& x,
                                          Eigen::VectorXd& y, Eigen::VectorXd& s) const {
  Residuals r{};
  const double tau = u[l_ - 1];
  x = e_.cwiseProduct(u.head(n_)) / tau;
  y = d_.cwiseProduct(u.segment(n_, m_)) / tau;
  s = v.segment(n_, m_).cwiseQuotient(d_) / tau;
  const Eigen::VectorXd ax = prob_.A * x;
  const Eigen::VectorXd aty = prob_.A.transpose() * y;
  r.pres = inf_norm(ax + s - prob_.b);
  r.dres = inf_norm(aty + prob_.c);
  r.pobj = prob_.c.dot(x);
  r.dobj = -prob_.b.dot(y);
  r.gap = std::abs(r.pobj - r.dobj);
  r.p_scale = std::max({inf_norm(ax), inf_norm(s), inf_norm(prob_.b)});
  r.d_scale = std::max(inf_norm(aty), inf_norm(prob_.c));
  r.g_scale = std::max(std::abs(r.pobj), std::abs(r.dobj));
  r.converged = r.pres <= opt_.eps_abs + opt_.eps_rel * r.p_scale &&
                r.dres <= opt_.eps_abs + opt_.eps_rel * r.d_scale &&
                r.gap <= opt_.eps_abs + opt_.eps_rel * r.g_scale;
  r.rel_p = r.pres / (1e-10 + r.p_scale);
  r.rel_d = r.dres / (1e-10 + r.d_scale);
  r.worst = std::max({r.pres / (1.0 + r.p_scale), r.dres / (1.0 + r.d_scale), r.gap / (1.0 + r.g_scale)});
  return r;
}

bool Workspace::primal_infeasible(const Eigen::VectorXd& u, Eigen::VectorXd& y) const {
  const Eigen::VectorXd yy = d_.cwiseProduct(u.segment(n_, m_));
  const double by = prob_.b.dot(yy);
  if (!(by < 0)) return false;
  const double nrm = inf_norm(yy);
  if (-by < 1e-12 * nrm) return false;
  if (inf_norm(prob_.A.transpose() * yy) > opt_.eps_infeas * -by) return false;
  y = yy / -by;
  return true;
}

bool Workspace::dual_infeasible(const Eigen::VectorXd& u, const Eigen::VectorXd& v, Eigen::VectorXd& x,
                                Eigen::VectorXd& s) const {
  const Eigen::VectorXd xx = e_.cwiseProduct(u.head(n_));
  const double cx = prob_.c.dot(xx);
  if (!(cx < 0)) return false;
  const Eigen::VectorXd ss = v.segment(n_, m_).cwiseQuotient(d_);
  if (-cx < 1e-12 * inf_norm(xx)) return false;
  if (inf_norm(prob_.A * xx + ss) > opt_.eps_infeas * -cx) return false;
  x = xx / -cx;
  s = ss / -cx;
  return true;
}

// Type-II Anderson acceleration over the fixed-point residual g(w) = T(w) - w.
class Anderson {
 public:
  Anderson(int memory, Eigen::Index dim) : mem_(memory), dim_(dim) {}

  void reset() {
    dw_.clear();
    dg_.clear();
    has_prev_ = false;
  }

  // Returns the accelerated iterate given w and g = T(w) - w.
  Eigen::VectorXd step(const Eigen::VectorXd& w, const Eigen::VectorXd& g) {
    if (has_prev_) {
      dw_.push_back(w - prev_w_);
      dg_.push_back(g - prev_g_);
      if (static_cast<int>(dw_.size()) > mem_) {
        dw_.pop_front();
        dg_.pop_front();
      }
    }
    prev_w_ = w;
    prev_g_ = g;
    has_prev_ = true;
    const int k = static_cast<int>(dg_.size());
    if (k == 0) return w + g;
    Eigen::MatrixXd y(dim_, k), s(dim_, k);
    for (int i = 0; i < k; ++i) {
      y.col(i) = dg_[static_cast<std::size_t>(i)];
      s.col(i) = dw_[static_cast<std::size_t>(i)];
    }
    Eigen::MatrixXd gram = y.transpose() * y;
    const double reg = 1e-12 * gram.trace() + 1e-300;
    gram.diagonal().array() += reg;
    const Eigen::VectorXd gamma = gram.ldlt().solve(y.transpose() * g);
    if (!gamma.allFinite()) return w + g;
    return w + g - (s + y) * gamma;
  }

 private:
  int mem_;
  Eigen::Index dim_;
  std::deque<Eigen::VectorXd> dw_, dg_;
  Eigen::VectorXd prev_w_, prev_g_;
  bool has_prev_ = false;
};

ConicSolution Workspace::run() {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  ConicSolution sol;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(l_);
  w[l_ - 1] = 1.0;
  if (opt_.seed) {
    std::mt19937_64 rng(*opt_.seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int i = 0; i < l_ - 1; ++i) w[i] = g(rng);
  }

  Anderson aa(opt_.anderson_memory, l_);
  Eigen::VectorXd ut, u, tw;
  Eigen::VectorXd best_x, best_y, best_s;
  double prev_norm = std::numeric_limits<double>::infinity();
  Eigen::VectorXd fallback;  // T(w) at the last accepted point
  int last_scale_update = 0;
  int accel_rejections = 0;
  Residuals last{};
  double best_worst = std::numeric_limits<double>::infinity();

  int it = 0;
  for (; it < opt_.max_iters; ++it) {
    tw = apply(w, ut, u);
    Eigen::VectorXd g = tw - w;
    double gnorm = g.norm();
    if (!std::isfinite(gnorm)) {
      sol.status = SolveStatus::Numerical;
      break;
    }
    if (opt_.anderson_memory > 0 && gnorm > prev_norm && fallback.size() == l_) {
      // The accelerated point made things worse: fall back to the plain step.
      ++accel_rejections;
      aa.reset();
      w = fallback;
      tw = apply(w, ut, u);
      g = tw - w;
      gnorm = g.norm();
    }

    if (it % opt_.check_interval == 0 || it == opt_.max_iters - 1) {
      const Eigen::VectorXd v = r_.cwiseProduct(u - 2.0 * ut + w);
      Eigen::VectorXd x, y, s;
      if (u[l_ - 1] > 0) {
        last = residuals(u, v, x, y, s);
        if (last.converged || last.worst <= best_worst) {
          best_worst = last.worst;
          best_x = x;
          best_y = y;
          best_s = s;
          sol.primal_objective = last.pobj;
          sol.dual_objective = last.dobj;
          sol.primal_residual = last.pres;
          sol.dual_residual = last.dres;
          sol.gap = last.gap;
          sol.relative_error = last.worst;
        }
        if (opt_.verbose && it % (opt_.check_interval * 100) == 0) {
          spdlog::debug("conic it={} pres={:.2e} dres={:.2e} gap={:.2e} obj={:.10g} scale={:.2e}", it, last.pres,
                        last.dres, last.gap, last.pobj, scale_);
        }
        if (last.converged) {
          sol.status = SolveStatus::Optimal;
          break;
        }
      }
      Eigen::VectorXd cy, cx, cs;
      if (primal_infeasible(u, cy)) {
        sol.status = SolveStatus::PrimalInfeasible;
        sol.y = cy;
        break;
      }
      if (dual_infeasible(u, v, cx, cs)) {
        sol.status = SolveStatus::DualInfeasible;
        sol.x = cx;
        sol.s = cs;
        break;
      }
      if (opt_.time_limit > 0 &&
          std::chrono::duration<double>(clock::now() - start).count() > opt_.time_limit) {
        sol.status = SolveStatus::MaxIters;
        break;
      }
      if (opt_.adaptive_scale && u[l_ - 1] > 0 && it - last_scale_update >= 50) {
        const double ratio = std::sqrt(last.rel_p / std::max(last.rel_d, 1e-300));
        if (ratio > 3.0 || ratio < 1.0 / 3.0) {
          const double next = std::clamp(scale_ * ratio, kMinScale, kMaxScale);
          if (next != scale_) {
            scale_ = next;
            set_weights();
            factor();
            w = u + v.cwiseQuotient(r_);
            aa.reset();
            fallback.resize(0);
            prev_norm = std::numeric_limits<double>::infinity();
            last_scale_update = it;
            continue;
          }
        }
      }
    }

    fallback = tw;
    prev_norm = gnorm;
    w = opt_.anderson_memory > 0 ? aa.step(w, g) : tw;
  }
  if (it >= opt_.max_iters) sol.status = SolveStatus::MaxIters;
  sol.iterations = it;
  if (sol.status != SolveStatus::PrimalInfeasible && sol.status != SolveStatus::DualInfeasible) {
    sol.x = best_x.size() ? best_x : Eigen::VectorXd::Zero(n_);
    sol.y = best_y.size() ? best_y : Eigen::VectorXd::Zero(m_);
    sol.s = best_s.size() ? best_s : Eigen::VectorXd::Zero(m_);
  }
  sol.final_scale = scale_;
  sol.solve_time = std::chrono::duration<double>(clock::now() - start).count();
  spdlog::debug("conic: {} after {} iterations ({:.3f}s, {} rejected accelerations)", to_string(sol.status), it,
                sol.solve_time, accel_rejections);
  return sol;
}

}  // namespace

ConicSolution solve_conic(const ConicProblem& problem, const SolverOptions& options) {
  validate(problem);
  if (options.alpha <= 0 || options.alpha >= 2) throw ValidationError("solver: alpha must lie in (0, 2)");
  if (options.check_interval < 1) throw ValidationError("solver: check_interval must be >= 1");
  if (!options.dump_path.empty()) {
    std::ofstream out(options.dump_path);
    out << to_json(problem).dump();
    if (!out) throw ValidationError("solver: cannot write problem dump to " + options.dump_path);
  }
  Workspace ws(problem, options);
  return ws.run();
}

}  // namespace direg::conic
