#include "direg/canonical.hpp"

#include "direg/error.hpp"

#include <cmath>
#include <numbers>

namespace direg {

namespace {

// Optimum of I_{1.25} over two-qubit strategies: state sin(t)|00> + cos(t)|11>,
// measurements in the x-z plane.  Refined to ~1e-20 in the stationarity
// conditions; the value of I_{1.25} at this point is 0.03423432782727557.
constexpr double kTauStateAngle = 1.13535893745142134695;
constexpr double kTauAngle0 = -0.26001392474342292012;
constexpr double kTauAngle1 = 1.06368166221016640549;

QubitStrategy chsh_strategy() {
  const double r = 1.0 / std::numbers::sqrt2;
  const auto bloch = [](double angle) {
    return std::array<double, 3>{std::sin(angle), 0.0, std::cos(angle)};
  };
  const double pi = std::numbers::pi;
  QubitStrategy st;
  st.state = {0.0, r, r, 0.0};
  st.alice = {bloch(3 * pi / 8), bloch(7 * pi / 8)};
  st.bob = st.alice;
  return st;
}

QubitStrategy tau_strategy() {
  QubitStrategy st;
  st.state = {std::sin(kTauStateAngle), 0.0, 0.0, std::cos(kTauStateAngle)};
  for (double angle : {kTauAngle0, kTauAngle1}) {
    st.alice.push_back({std::sin(angle), 0.0, -std::cos(angle)});
    st.bob.push_back({-std::sin(angle), 0.0, -std::cos(angle)});
  }
  return st;
}

QubitStrategy mdl_strategy() {
  const double r = 1.0 / std::sqrt(3.0);
  QubitStrategy st;
  st.state = {0.0, r, r, -r};
  st.alice = {{1.0, 0.0, 0.0}, {0.0, 0.0, 1.0}};
  st.bob = st.alice;
  return st;
}

}  // namespace

const std::vector<std::string>& canonical_names() {
  static const std::vector<std::string> names{"chsh", "chsh90", "tau125", "mdl", "uniform"};
  return names;
}

std::optional<QubitStrategy> canonical_strategy(const std::string& name) {
  if (name == "chsh") return chsh_strategy();
  if (name == "tau125") return tau_strategy();
  if (name == "mdl") return mdl_strategy();
  return std::nullopt;
}

Behavior canonical_distribution(const std::string& name) {
  const Scenario s = Scenario::chsh();
  const auto chsh_like = [&](double visibility) {
    Eigen::VectorXd p(16);
    for (std::size_t i = 0; i < 16; ++i) {
      const auto [a, b, x, y] = s.labels(i);
      const double sign = ((a + b + x * y) % 2 == 0) ? 1.0 : -1.0;
      p[static_cast<Eigen::Index>(i)] = 0.25 + visibility * sign * std::numbers::sqrt2 / 8.0;
    }
    return Behavior(s, std::move(p));
  };
  if (name == "chsh") return chsh_like(1.0);
  if (name == "chsh90") return chsh_like(0.9);
  if (name == "uniform") return Behavior::uniform(s);
  if (name == "tau125") return behavior_from_qubit_strategy(tau_strategy());
  if (name == "mdl") return behavior_from_qubit_strategy(mdl_strategy());
  std::string valid;
  for (const auto& n : canonical_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ValidationError("unknown canonical distribution '" + name + "' (valid: " + valid + ")");
}

Behavior mdl_closed_form() {
  const Scenario s = Scenario::chsh();
  Eigen::VectorXd p(16);
  for (std::size_t i = 0; i < 16; ++i) {
    const auto [a, b, x, y] = s.labels(i);
    double v = 0.0;
    if (x == 0 && y == 0) v += (8.0 * a * b + 1.0) / 12.0;
    if (x * y == 1) v += (1.0 - (a == 0 && b == 0 ? 1.0 : 0.0)) / 3.0;
    if ((x ^ y) == 1) v += (3.0 * a * b + 1.0) * (1.0 - (a == x && b == y ? 1.0 : 0.0)) / 6.0;
    p[static_cast<Eigen::Index>(i)] = v;
  }
  return Behavior(s, std::move(p));
}

Behavior pr_box() {
  const Scenario s = Scenario::chsh();
  Eigen::VectorXd p(16);
  for (std::size_t i = 0; i < 16; ++i) {
    const auto [a, b, x, y] = s.labels(i);
    p[static_cast<Eigen::Index>(i)] = ((a ^ b) == x * y) ? 0.5 : 0.0;
  }
  return Behavior(s, std::move(p));
}

}  // namespace direg
