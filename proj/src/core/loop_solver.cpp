#include "core/loop_solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "core/error.hpp"

namespace rhombot {

namespace {

using Mat3 = Eigen::Matrix3d;

Mat3 homogeneous(const Pose2& p) {
  const double c = std::cos(p.yaw);
  const double s = std::sin(p.yaw);
  Mat3 m;
  m << c, -s, p.x, s, c, p.y, 0.0, 0.0, 1.0;
  return m;
}

// d/dσ of the homogeneous edge transform.
Mat3 edge_derivative(const ModuleState& s, EdgeIndex k) {
  const double a = s.params.a;
  const double sn = std::sin(s.sigma);
  const double cs = std::cos(s.sigma);
  double yaw_rate = 0.0;
  double tx = 0.0;
  double ty = 0.0;
  switch (k.value()) {
    case 1:
      yaw_rate = 1.0;
      tx = -a * sn;
      ty = a * cs;
      break;
    case 2:
      tx = -2.0 * a * sn;
      ty = 2.0 * a * cs;
      break;
    case 3:
      yaw_rate = 1.0;
      tx = -a * sn;
      ty = a * cs;
      break;
    default:
      return Mat3::Zero();
  }
  const double yaw = edge_transform(s, k).yaw;
  const double c = std::cos(yaw);
  const double n = std::sin(yaw);
  Mat3 d;
  d << -n * yaw_rate, -c * yaw_rate, tx, c * yaw_rate, -n * yaw_rate, ty, 0.0, 0.0, 0.0;
  return d;
}

const ModuleState& lookup(const ModuleTable& modules, ModuleId id) {
  auto it = modules.find(id);
  if (it == modules.end()) throw Error(ErrorCode::Usage, "loop references unknown module " + std::to_string(id));
  return it->second;
}

ModuleState labeled(const ModuleTable& modules, ModuleId id, int offset) {
  const ModuleState& base = lookup(modules, id);
  return ModuleState::from_theta(id, base.theta(), offset, base.params);
}

struct Factor {
  ModuleId module;
  Mat3 value;
  Mat3 derivative;  // w.r.t. theta of `module`
};

std::vector<Factor> branch_factors(const LoopBranch& branch, const ModuleTable& modules) {
  std::vector<Factor> out;
  out.reserve(branch.steps.size() + 1);
  for (const LoopStep& step : branch.steps) {
    const ModuleState s = labeled(modules, step.module, step.label_offset);
    const double dsigma = s.parity() ? -1.0 : 1.0;
    out.push_back({step.module, homogeneous(mating_transform(s, step.edge)),
                   dsigma * edge_derivative(s, step.edge)});
  }
  const ModuleState t = labeled(modules, branch.terminal, branch.terminal_offset);
  const EdgeIndex k0 = t.label_of_port(0);
  const double dsigma = t.parity() ? -1.0 : 1.0;
  const Mat3 flip = homogeneous(Pose2::rotation(kPi));
  const Mat3 inward = k0.value() == 0 ? Mat3::Identity() : Mat3(homogeneous(edge_transform(t, k0)) * flip);
  const Mat3 d_inward = k0.value() == 0 ? Mat3::Zero() : Mat3(dsigma * edge_derivative(t, k0) * flip);
  const double a = t.params.a;
  const double theta = t.theta();
  const Mat3 center = homogeneous(Pose2(0.0, a * std::cos(theta), a * std::sin(theta)));
  Mat3 d_center = Mat3::Zero();
  d_center(0, 2) = -a * std::sin(theta);
  d_center(1, 2) = a * std::cos(theta);
  out.push_back({branch.terminal, inward * center, d_inward * center + inward * d_center});
  return out;
}

// Product of all factors and its derivative w.r.t. each requested module.
void branch_product(const std::vector<Factor>& f, const std::vector<ModuleId>& wrt, Mat3& product,
                    std::vector<Mat3>& derivatives) {
  const std::size_t n = f.size();
  std::vector<Mat3> prefix(n + 1, Mat3::Identity());
  std::vector<Mat3> suffix(n + 1, Mat3::Identity());
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] * f[i].value;
  for (std::size_t i = n; i-- > 0;) suffix[i] = f[i].value * suffix[i + 1];
  product = prefix[n];
  derivatives.assign(wrt.size(), Mat3::Zero());
  for (std::size_t j = 0; j < wrt.size(); ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (f[i].module == wrt[j]) derivatives[j] += prefix[i] * f[i].derivative * suffix[i + 1];
    }
  }
}

std::vector<ModuleId> flatten(const FreeGroups& free) {
  std::vector<ModuleId> ids;
  for (const auto& g : free) ids.insert(ids.end(), g.begin(), g.end());
  return ids;
}

}  // namespace

Pose2 loop_residual(const LoopSpec& loop, const ModuleTable& modules) {
  return evaluate_loop(loop, modules, {}).residual;
}

LoopEvaluation evaluate_loop(const LoopSpec& loop, const ModuleTable& modules, const FreeGroups& free) {
  const std::vector<ModuleId> ids = flatten(free);
  Mat3 p1, p2;
  std::vector<Mat3> d1, d2;
  branch_product(branch_factors(loop.branch1, modules), ids, p1, d1);
  branch_product(branch_factors(loop.branch2, modules), ids, p2, d2);

  const Mat3 p2_inv = p2.inverse();
  const Mat3 r = p2_inv * p1;
  LoopEvaluation ev;
  ev.residual = Pose2(std::atan2(r(1, 0), r(0, 0)), r(0, 2), r(1, 2));
  const double scale = 1.0 / (2.0 * lookup(modules, loop.branch1.terminal).params.a);
  ev.scaled << ev.residual.yaw, scale * ev.residual.x, scale * ev.residual.y;

  ev.jacobian.setZero(3, static_cast<Eigen::Index>(free.size()));
  const double rr = r(0, 0) * r(0, 0) + r(1, 0) * r(1, 0);
  std::size_t flat = 0;
  for (std::size_t g = 0; g < free.size(); ++g) {
    for (std::size_t m = 0; m < free[g].size(); ++m, ++flat) {
      const Mat3 dr = p2_inv * (d1[flat] - d2[flat] * r);
      const auto col = static_cast<Eigen::Index>(g);
      ev.jacobian(0, col) += (r(0, 0) * dr(1, 0) - r(1, 0) * dr(0, 0)) / rr;
      ev.jacobian(1, col) += scale * dr(0, 2);
      ev.jacobian(2, col) += scale * dr(1, 2);
    }
  }
  return ev;
}

LoopSolution solve_loop(const LoopSpec& loop, const ModuleTable& modules, const FreeGroups& free,
                        const LoopSolveOptions& options) {
  const auto n = static_cast<Eigen::Index>(free.size());
  Eigen::VectorXd x(n), lo(n), hi(n);
  for (Eigen::Index g = 0; g < n; ++g) {
    const auto& group = free[static_cast<std::size_t>(g)];
    if (group.empty()) throw Error(ErrorCode::Usage, "empty free group");
    double sum = 0.0;
    lo(g) = 0.0;
    hi(g) = kPi;
    for (ModuleId id : group) {
      const ModuleState& s = lookup(modules, id);
      sum += s.theta();
      lo(g) = std::max(lo(g), s.params.theta_min);
      hi(g) = std::min(hi(g), s.params.theta_max);
    }
    x(g) = std::clamp(sum / static_cast<double>(group.size()), lo(g), hi(g));
  }

  ModuleTable work = modules;
  auto apply = [&](const Eigen::VectorXd& v) {
    for (Eigen::Index g = 0; g < n; ++g) {
      for (ModuleId id : free[static_cast<std::size_t>(g)]) work.at(id).set_theta(v(g));
    }
  };

  apply(x);
  LoopEvaluation ev = evaluate_loop(loop, work, free);
  double cost = ev.scaled.squaredNorm();
  double damping = options.initial_damping;
  int it = 0;
  for (; it < options.max_iterations && n > 0; ++it) {
    if (cost < 1e-30) break;
    const Eigen::MatrixXd jtj = ev.jacobian.transpose() * ev.jacobian;
    const Eigen::VectorXd g = ev.jacobian.transpose() * ev.scaled;
    const Eigen::MatrixXd lhs = jtj + damping * Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd delta = -lhs.ldlt().solve(g);
    const Eigen::VectorXd candidate = (x + delta).cwiseMax(lo).cwiseMin(hi);
    const double step = (candidate - x).norm();

    apply(candidate);
    LoopEvaluation trial = evaluate_loop(loop, work, free);
    const double trial_cost = trial.scaled.squaredNorm();
    if (trial_cost < cost) {
      x = candidate;
      ev = std::move(trial);
      cost = trial_cost;
      damping = std::max(damping * 0.1, 1e-15);
    } else {
      apply(x);
      damping *= 10.0;
      if (damping > 1e12) break;
    }
    if (step < options.step_tolerance) break;
  }

  LoopSolution sol;
  apply(x);
  sol.iterations = it;
  sol.residual = ev.residual;
  sol.residual_norm = std::sqrt(cost);
  sol.success = sol.residual_norm < options.residual_tolerance;
  for (Eigen::Index g = 0; g < n; ++g) {
    for (ModuleId id : free[static_cast<std::size_t>(g)]) sol.thetas[id] = x(g);
  }
  return sol;
}

}  // namespace rhombot
