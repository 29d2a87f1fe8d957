#include "direg/conic/cone.hpp"

#include "direg/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace direg::conic {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void project_soc(Eigen::Ref<Eigen::VectorXd> v) {
  const double t = v[0];
  const double nx = v.tail(v.size() - 1).norm();
  if (nx <= t) return;
  if (nx <= -t) {
    v.setZero();
    return;
  }
  const double a = 0.5 * (t + nx);
  v[0] = a;
  v.tail(v.size() - 1) *= a / nx;
}

void project_psd(Eigen::Ref<Eigen::VectorXd> v, int side) {
  if (side == 1) {
    v[0] = std::max(v[0], 0.0);
    return;
  }
  const Eigen::MatrixXd m = unvectorize_symmetric(v, side);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const Eigen::VectorXd& lam = eig.eigenvalues();
  if (lam[0] >= 0) return;
  if (lam[side - 1] <= 0) {
    v.setZero();
    return;
  }
  // Rebuild from whichever eigenvalue group is smaller.
  int neg = 0;
  while (neg < side && lam[neg] < 0) ++neg;
  Eigen::MatrixXd out;
  if (neg <= side - neg) {
    const auto vn = eig.eigenvectors().leftCols(neg);
    out = m - vn * lam.head(neg).asDiagonal() * vn.transpose();
  } else {
    const auto vp = eig.eigenvectors().rightCols(side - neg);
    out = vp * lam.tail(side - neg).asDiagonal() * vp.transpose();
  }
  v = vectorize_symmetric(out);
}

// Boundary parametrization of the projection: p = s(rho) (rho, 1, e^rho),
// polar part mu(rho) (1, 1 - rho, -e^-rho); psi(rho) = 0 matches the third
// coordinate and is increasing on the interval where s, mu >= 0.
struct ExpRoot {
  double r0, s0, t0;

  double s_of(double rho) const { return ((rho - 1) * r0 + s0) / (rho * rho - rho + 1); }
  double mu_of(double rho) const { return (r0 - rho * s0) / (rho * rho - rho + 1); }
  double psi(double rho) const {
    const double s = s_of(rho);
    const double mu = mu_of(rho);
    return (s > 0 ? s * std::exp(rho) : 0.0) - (mu > 0 ? mu * std::exp(-rho) : 0.0) - t0;
  }
  double dpsi(double rho) const {
    const double q = rho * rho - rho + 1;
    const double ds = (r0 * q - ((rho - 1) * r0 + s0) * (2 * rho - 1)) / (q * q);
    const double dmu = (-s0 * q - (r0 - rho * s0) * (2 * rho - 1)) / (q * q);
    return (ds + s_of(rho)) * std::exp(rho) - (dmu - mu_of(rho)) * std::exp(-rho);
  }
};

// Projection of z onto the ray through (rho, 1, e^rho).  Taking the scale
// from the ray itself avoids the cancellation in s(rho) near the origin.
std::array<double, 3> exp_candidate(const ExpRoot& f, double rho) {
  // Direction normalized so that its largest component is O(1).
  const double k = rho > 0 ? std::exp(-rho) : 1.0;
  const std::array<double, 3> a{rho * k, k, rho > 0 ? 1.0 : std::exp(rho)};
  const double t = std::max(0.0, (f.r0 * a[0] + f.s0 * a[1] + f.t0 * a[2]) / (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]));
  return {t * a[0], t * a[1], t * a[2]};
}

double dist2(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  double d = 0;
  for (int i = 0; i < 3; ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

}  // namespace

int Cone::dimension() const {
  switch (kind) {
    case ConeKind::Psd:
      return size * (size + 1) / 2;
    case ConeKind::Exp:
      return 3 * size;
    default:
      return size;
  }
}

int dimension(const ConeSpec& cones) {
  int d = 0;
  for (const auto& c : cones) d += c.dimension();
  return d;
}

void validate(const ConeSpec& cones) {
  for (const auto& c : cones) {
    if (c.size < 1) throw ValidationError("cone block of type " + to_string(c.kind) + " must have size >= 1");
  }
}

std::string to_string(ConeKind kind) {
  switch (kind) {
    case ConeKind::Zero: return "zero";
    case ConeKind::Nonneg: return "nonneg";
    case ConeKind::Soc: return "soc";
    case ConeKind::Psd: return "psd";
    case ConeKind::Exp: return "exp";
  }
  return "?";
}

ConeKind cone_kind_from_string(const std::string& name) {
  for (auto k : {ConeKind::Zero, ConeKind::Nonneg, ConeKind::Soc, ConeKind::Psd, ConeKind::Exp}) {
    if (to_string(k) == name) return k;
  }
  throw ValidationError("unknown cone type '" + name + "'");
}

int psd_index(int i, int j, int side) { return j * side - j * (j - 1) / 2 + (i - j); }

Eigen::VectorXd vectorize_symmetric(const Eigen::MatrixXd& m) {
  const auto side = static_cast<int>(m.rows());
  Eigen::VectorXd v(side * (side + 1) / 2);
  int k = 0;
  for (int j = 0; j < side; ++j) {
    v[k++] = m(j, j);
    for (int i = j + 1; i < side; ++i) v[k++] = std::numbers::sqrt2 * 0.5 * (m(i, j) + m(j, i));
  }
  return v;
}

Eigen::MatrixXd unvectorize_symmetric(const Eigen::Ref<const Eigen::VectorXd>& v, int side) {
  Eigen::MatrixXd m(side, side);
  int k = 0;
  for (int j = 0; j < side; ++j) {
    m(j, j) = v[k++];
    for (int i = j + 1; i < side; ++i) m(i, j) = m(j, i) = v[k++] / std::numbers::sqrt2;
  }
  return m;
}

bool in_exp_cone(const std::array<double, 3>& z, double tol) {
  const auto [u, v, w] = z;
  if (v > tol) {
    // Compare on the log scale away from the boundary ray.
    if (w <= 0) return v * std::exp(u / v) <= w + tol;
    return u <= v * std::log(w / v) + tol || v * std::exp(u / v) <= w + tol;
  }
  return v >= -tol && u <= tol && w >= -tol;
}

bool in_exp_dual_cone(const std::array<double, 3>& z, double tol) {
  const auto [u, v, w] = z;
  if (u < -tol) return -u * std::exp(v / u) <= std::numbers::e * w + tol;
  return u <= tol && v >= -tol && w >= -tol;
}

std::array<double, 3> project_exp(const std::array<double, 3>& z) {
  const auto [r0, s0, t0] = z;
  if (in_exp_cone(z, 0.0)) return z;
  if (in_exp_dual_cone({-r0, -s0, -t0}, 0.0)) return {0.0, 0.0, 0.0};
  if (r0 <= 0 && s0 <= 0) return {r0, 0.0, std::max(t0, 0.0)};

  const ExpRoot f{r0, s0, t0};
  // Interval where s(rho) >= 0 and mu(rho) >= 0.
  double lo = -kInf;
  double hi = kInf;
  if (r0 > 0) lo = 1 - s0 / r0;
  if (s0 > 0) hi = r0 / s0;
  if (r0 < 0) hi = std::min(hi, 1 - s0 / r0);
  if (!(lo <= hi)) {
    std::ostringstream msg;
    msg << "exponential cone projection: empty bracket at (" << r0 << ", " << s0 << ", " << t0 << ")";
    throw SolverError(msg.str());
  }
  // Expand unbounded ends until psi changes sign.
  const double anchor = std::isfinite(lo) ? lo : (std::isfinite(hi) ? hi : 0.0);
  if (!std::isfinite(lo)) {
    double step = 1;
    lo = anchor - step;
    while (f.psi(lo) > 0 && lo > -700) lo = anchor - (step *= 2);
    lo = std::max(lo, -700.0);
  }
  if (!std::isfinite(hi)) {
    double step = 1;
    hi = anchor + step;
    while (f.psi(hi) < 0 && hi < 700) hi = anchor + (step *= 2);
    hi = std::min(hi, 700.0);
  }

  // Safeguarded Newton on psi: bisect whenever the Newton step leaves the
  // bracket or does not shrink fast enough.
  double rho = 0.5 * (lo + hi);
  double step_old = hi - lo;
  double step = step_old;
  bool converged = false;
  for (int it = 0; it < 400; ++it) {
    const double val = f.psi(rho);
    if (val == 0) {
      converged = true;
      break;
    }
    if (val < 0) lo = rho;
    else hi = rho;
    const double d = f.dpsi(rho);
    const double newton = rho - val / d;
    if (std::isfinite(newton) && d > 0 && newton > lo && newton < hi && std::abs(2 * val) < std::abs(step_old * d)) {
      step_old = step;
      step = newton - rho;
      rho = newton;
    } else {
      step_old = step;
      step = 0.5 * (hi - lo);
      rho = lo + step;
    }
    if (std::abs(step) <= 4e-16 * std::max(1.0, std::abs(rho)) || hi - lo <= 4e-16 * std::max(1.0, std::abs(rho))) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "exponential cone projection did not converge at (" << r0 << ", " << s0 << ", " << t0 << ")";
    throw SolverError(msg.str());
  }

  // Candidates: the root, plus the two heuristic points (boundary ray and
  // the primal part of the polar heuristic).  Take the closest valid one.
  const std::array<double, 3> ray{std::min(r0, 0.0), 0.0, std::max(t0, 0.0)};
  std::array<double, 3> best = ray;
  double best_d = dist2(ray, z);
  const std::array<double, 3> root = exp_candidate(f, rho);
  if (std::isfinite(root[2]) && dist2(root, z) < best_d) {
    best = root;
    best_d = dist2(root, z);
  }
  if (s0 > 0) {
    const double t = std::max(s0 * std::exp(r0 / s0), t0);
    const std::array<double, 3> lift{r0, s0, t};
    if (std::isfinite(t) && dist2(lift, z) < best_d) best = lift;
  }
  return best;
}

void project_cone_inplace(Eigen::Ref<Eigen::VectorXd> v, const ConeSpec& cones) {
  Eigen::Index off = 0;
  for (const auto& c : cones) {
    const int d = c.dimension();
    auto blk = v.segment(off, d);
    switch (c.kind) {
      case ConeKind::Zero:
        blk.setZero();
        break;
      case ConeKind::Nonneg:
        blk = blk.cwiseMax(0.0);
        break;
      case ConeKind::Soc:
        project_soc(blk);
        break;
      case ConeKind::Psd:
        project_psd(blk, c.size);
        break;
      case ConeKind::Exp:
        for (int k = 0; k < c.size; ++k) {
          const auto p = project_exp({blk[3 * k], blk[3 * k + 1], blk[3 * k + 2]});
          for (int i = 0; i < 3; ++i) blk[3 * k + i] = p[static_cast<std::size_t>(i)];
        }
        break;
    }
    off += d;
  }
}

void project_dual_cone_inplace(Eigen::Ref<Eigen::VectorXd> v, const ConeSpec& cones) {
  Eigen::Index off = 0;
  for (const auto& c : cones) {
    const int d = c.dimension();
    auto blk = v.segment(off, d);
    switch (c.kind) {
      case ConeKind::Zero:
        break;
      case ConeKind::Nonneg:
        blk = blk.cwiseMax(0.0);
        break;
      case ConeKind::Soc:
        project_soc(blk);
        break;
      case ConeKind::Psd:
        project_psd(blk, c.size);
        break;
      case ConeKind::Exp:
        // Moreau: proj_{K*}(z) = z + proj_K(-z).
        for (int k = 0; k < c.size; ++k) {
          const auto p = project_exp({-blk[3 * k], -blk[3 * k + 1], -blk[3 * k + 2]});
          for (int i = 0; i < 3; ++i) blk[3 * k + i] += p[static_cast<std::size_t>(i)];
        }
        break;
    }
    off += d;
  }
}

Eigen::VectorXd project_cone(const Eigen::VectorXd& v, const ConeSpec& cones) {
  if (v.size() != dimension(cones)) throw ValidationError("project_cone: dimension mismatch");
  Eigen::VectorXd out = v;
  project_cone_inplace(out, cones);
  return out;
}

Eigen::VectorXd project_dual_cone(const Eigen::VectorXd& v, const ConeSpec& cones) {
  if (v.size() != dimension(cones)) throw ValidationError("project_dual_cone: dimension mismatch");
  Eigen::VectorXd out = v;
  project_dual_cone_inplace(out, cones);
  return out;
}

bool in_cone(const Eigen::VectorXd& v, const ConeSpec& cones, double tol) {
  return (project_cone(v, cones) - v).norm() <= tol;
}

bool in_dual_cone(const Eigen::VectorXd& v, const ConeSpec& cones, double tol) {
  return (project_dual_cone(v, cones) - v).norm() <= tol;
}

}  // namespace direg::conic
