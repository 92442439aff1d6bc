#include "lfcal/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Cholesky>

#include "lfcal/errors.hpp"
#include "lfcal/zhang.hpp"

namespace lfcal {

namespace {

using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat22 = Eigen::Matrix2d;

struct RotationBlock {
  Mat3 rotation;
  Mat3 right_jacobian;

  explicit RotationBlock(const Mat3& r) : rotation(r) {
    right_jacobian = so3_right_jacobian(matrix_to_axis_angle(r));
  }

  // d(R p)/dr
  Mat3 point_derivative(const Vec3& p) const {
    return -rotation * skew(p) * right_jacobian;
  }
};

void check_dimensions(const Calibration& calib, const ObservationSet& obs) {
  if (calib.n_viewpoints() != obs.n_viewpoints() ||
      calib.n_frames() != obs.n_frames()) {
    throw ArgumentError("calibration has " + std::to_string(calib.n_viewpoints()) +
                        " viewpoints / " + std::to_string(calib.n_frames()) +
                        " frames but observations have " +
                        std::to_string(obs.n_viewpoints()) + " / " +
                        std::to_string(obs.n_frames()));
  }
}

// Residuals and, when `jac` is non-null, the analytic Jacobian.
Eigen::VectorXd linearize(const Calibration& calib, const ObservationSet& obs,
                          const ParameterLayout* layout,
                          BlockSparseJacobian* jac) {
  check_dimensions(calib, obs);
  const int n = obs.n_viewpoints();
  const int t = obs.n_frames();
  const int m = obs.n_points();
  const auto& model = obs.model_points();

  Eigen::VectorXd res(2 * obs.count());
  std::vector<RotationBlock> rel_rot;
  std::vector<RotationBlock> frame_rot;
  if (jac) {
    jac->rows = static_cast<int>(res.size());
    jac->cols = layout->size();
    jac->blocks.clear();
    jac->blocks.reserve(obs.count());
    for (const auto& v : calib.viewpoints) rel_rot.emplace_back(v.relative.rotation);
    for (const auto& f : calib.frame_poses) frame_rot.emplace_back(f.rotation);
  }

  int row = 0;
  for (int i = 0; i < n; ++i) {
    const auto& vp = calib.viewpoints[i];
    const Intrinsics& in = vp.intrinsics;
    const Distortion& d = vp.distortion;
    const Mat3& ri = vp.relative.rotation;
    const Vec3& ti = vp.relative.translation;
    for (int j = 0; j < t; ++j) {
      const RigidTransform& w0 = calib.frame_poses[j];
      for (int k = 0; k < m; ++k) {
        const auto& observed = obs.at(i, j, k);
        if (!observed) continue;
        const Vec3 board{model[k].x(), model[k].y(), 0.0};
        const Vec3 q = w0.rotation * board + w0.translation;
        const Vec3 pc = ri * q + ti;
        if (!(pc.z() > 0.0)) throw BehindCameraError(i, j, k);

        const double iz = 1.0 / pc.z();
        const double x = pc.x() * iz;
        const double y = pc.y() * iz;
        const double r2 = x * x + y * y;
        const double radial = 1.0 + d.k1 * r2 + d.k2 * r2 * r2;
        const double xd = x * radial + 2.0 * d.p1 * x * y + d.p2 * (r2 + 2.0 * x * x);
        const double yd = y * radial + d.p1 * (r2 + 2.0 * y * y) + 2.0 * d.p2 * x * y;
        const double u = in.alpha * xd + in.gamma * yd + in.u0;
        const double v = in.beta * yd + in.v0;
        res(row) = observed->x() - u;
        res(row + 1) = observed->y() - v;

        if (jac) {
          BlockSparseJacobian::Block blk;
          blk.row = row;
          auto add_cols = [&](int offset, const Eigen::MatrixXd& values) {
            for (Eigen::Index c = 0; c < values.cols(); ++c) {
              blk.cols[blk.n_cols] = offset + static_cast<int>(c);
              blk.values.col(blk.n_cols) = -values.col(c);
              ++blk.n_cols;
            }
          };

          const int io = layout->intrinsics_offset(i);
          if (io >= 0) {
            Eigen::Matrix<double, 2, 5> di;
            di << xd, 0.0, yd, 1.0, 0.0,  //
                0.0, yd, 0.0, 0.0, 1.0;
            if (layout->fix_skew()) {
              Eigen::Matrix<double, 2, 4> di4;
              di4 << di.col(0), di.col(1), di.col(3), di.col(4);
              add_cols(io, di4);
            } else {
              add_cols(io, di);
            }
          }

          Mat22 dpix;
          dpix << in.alpha, in.gamma, 0.0, in.beta;

          const int dof = layout->distortion_offset(i);
          if (dof >= 0) {
            Eigen::Matrix<double, 2, 4> dk;
            dk << x * r2, x * r2 * r2, 2.0 * x * y, r2 + 2.0 * x * x,  //
                y * r2, y * r2 * r2, r2 + 2.0 * y * y, 2.0 * x * y;
            add_cols(dof, dpix * dk);
          }

          const double drad = 2.0 * (d.k1 + 2.0 * d.k2 * r2);
          Mat22 ddist;
          ddist << radial + x * x * drad + 2.0 * d.p1 * y + 6.0 * d.p2 * x,
              x * y * drad + 2.0 * d.p1 * x + 2.0 * d.p2 * y,
              x * y * drad + 2.0 * d.p1 * x + 2.0 * d.p2 * y,
              radial + y * y * drad + 6.0 * d.p1 * y + 2.0 * d.p2 * x;
          Mat23 dnorm;
          dnorm << iz, 0.0, -x * iz, 0.0, iz, -y * iz;
          const Mat23 g = dpix * ddist * dnorm;

          const int ro = layout->relative_offset(i);
          if (ro >= 0) {
            Eigen::Matrix<double, 2, 6> drel;
            drel << g * rel_rot[i].point_derivative(q), g;
            add_cols(ro, drel);
          }
          const int fo = layout->frame_offset(j);
          Eigen::Matrix<double, 2, 6> dframe;
          const Mat23 gr = g * ri;
          dframe << gr * frame_rot[j].point_derivative(board), gr;
          add_cols(fo, dframe);

          jac->blocks.push_back(blk);
        }
        row += 2;
      }
    }
  }
  return res;
}

// Accumulates J^T J (upper triangle) and J^T r.
void normal_equations(const BlockSparseJacobian& jac, const Eigen::VectorXd& r,
                      Eigen::MatrixXd& jtj, Eigen::VectorXd& jtr) {
  jtj.setZero(jac.cols, jac.cols);
  jtr.setZero(jac.cols);
  for (const auto& blk : jac.blocks) {
    const Eigen::Vector2d rb = r.segment<2>(blk.row);
    for (int a = 0; a < blk.n_cols; ++a) {
      const int ca = blk.cols[a];
      jtr(ca) += blk.values.col(a).dot(rb);
      for (int b = 0; b < blk.n_cols; ++b) {
        const int cb = blk.cols[b];
        if (cb >= ca) jtj(ca, cb) += blk.values.col(a).dot(blk.values.col(b));
      }
    }
  }
  jtj.triangularView<Eigen::StrictlyLower>() = jtj.transpose();
}

double population_std(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / v.size());
}

// Calibration restricted to one viewpoint, with that viewpoint's own board
// poses as frame poses.
Calibration single_viewpoint_model(const Calibration& calib, int viewpoint) {
  Calibration out;
  out.viewpoints.push_back({calib.viewpoints[viewpoint].intrinsics,
                            calib.viewpoints[viewpoint].distortion,
                            RigidTransform::identity()});
  for (int j = 0; j < calib.n_frames(); ++j) {
    out.frame_poses.push_back(calib.world_pose(viewpoint, j));
  }
  return out;
}

}  // namespace

void OptimizeOptions::validate() const {
  if (max_iterations < 1) throw ArgumentError("max_iterations must be >= 1");
  if (!(cost_rel_tol > 0.0) || !(gradient_tol > 0.0)) {
    throw ArgumentError("tolerances must be positive");
  }
  if (!(damping_init > 0.0)) throw ArgumentError("damping_init must be positive");
}

ParameterLayout::ParameterLayout(int n_viewpoints, int n_frames,
                                 const OptimizeOptions& opts)
    : n_viewpoints_(n_viewpoints),
      n_frames_(n_frames),
      fix_skew_(opts.fix_skew),
      intrinsics_(n_viewpoints, -1),
      distortion_(n_viewpoints, -1),
      relative_(n_viewpoints, -1),
      frames_(n_frames, -1) {
  for (int i = 0; i < n_viewpoints; ++i) {
    if (opts.refine_intrinsics) {
      intrinsics_[i] = size_;
      size_ += intrinsics_size();
    }
    if (opts.refine_distortion) {
      distortion_[i] = size_;
      size_ += kDistortionSize;
    }
    if (i > 0) {
      relative_[i] = size_;
      size_ += kPoseSize;
    }
  }
  for (int j = 0; j < n_frames; ++j) {
    frames_[j] = size_;
    size_ += kPoseSize;
  }
}

Eigen::VectorXd ParameterLayout::pack(const Calibration& calib) const {
  if (calib.n_viewpoints() != n_viewpoints_ || calib.n_frames() != n_frames_) {
    throw ArgumentError("calibration does not match the parameter layout");
  }
  Eigen::VectorXd x(size_);
  for (int i = 0; i < n_viewpoints_; ++i) {
    const auto& vp = calib.viewpoints[i];
    if (const int o = intrinsics_[i]; o >= 0) {
      const auto& in = vp.intrinsics;
      if (fix_skew_) {
        x.segment<4>(o) << in.alpha, in.beta, in.u0, in.v0;
      } else {
        x.segment<5>(o) << in.alpha, in.beta, in.gamma, in.u0, in.v0;
      }
    }
    if (const int o = distortion_[i]; o >= 0) {
      const auto& d = vp.distortion;
      x.segment<4>(o) << d.k1, d.k2, d.p1, d.p2;
    }
    if (const int o = relative_[i]; o >= 0) {
      x.segment<3>(o) = vp.relative.axis_angle();
      x.segment<3>(o + 3) = vp.relative.translation;
    }
  }
  for (int j = 0; j < n_frames_; ++j) {
    x.segment<3>(frames_[j]) = calib.frame_poses[j].axis_angle();
    x.segment<3>(frames_[j] + 3) = calib.frame_poses[j].translation;
  }
  return x;
}

Calibration ParameterLayout::unpack(const Eigen::VectorXd& x,
                                    const Calibration& fixed) const {
  if (x.size() != size_ || fixed.n_viewpoints() != n_viewpoints_ ||
      fixed.n_frames() != n_frames_) {
    throw ArgumentError("parameter vector does not match the layout");
  }
  Calibration out = fixed;
  for (int i = 0; i < n_viewpoints_; ++i) {
    auto& vp = out.viewpoints[i];
    if (const int o = intrinsics_[i]; o >= 0) {
      auto& in = vp.intrinsics;
      in.alpha = x(o);
      in.beta = x(o + 1);
      if (fix_skew_) {
        in.u0 = x(o + 2);
        in.v0 = x(o + 3);
      } else {
        in.gamma = x(o + 2);
        in.u0 = x(o + 3);
        in.v0 = x(o + 4);
      }
    }
    if (const int o = distortion_[i]; o >= 0) {
      vp.distortion = {x(o), x(o + 1), x(o + 2), x(o + 3)};
    }
    if (const int o = relative_[i]; o >= 0) {
      vp.relative = RigidTransform::from_axis_angle(x.segment<3>(o),
                                                    x.segment<3>(o + 3));
    } else {
      vp.relative = RigidTransform::identity();
    }
  }
  for (int j = 0; j < n_frames_; ++j) {
    out.frame_poses[j] = RigidTransform::from_axis_angle(
        x.segment<3>(frames_[j]), x.segment<3>(frames_[j] + 3));
  }
  return out;
}

Eigen::MatrixXd BlockSparseJacobian::to_dense() const {
  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(rows, cols);
  for (const auto& blk : blocks) {
    for (int c = 0; c < blk.n_cols; ++c) {
      dense.block<2, 1>(blk.row, blk.cols[c]) += blk.values.col(c);
    }
  }
  return dense;
}

Eigen::VectorXd residuals(const Calibration& calib, const ObservationSet& obs) {
  return linearize(calib, obs, nullptr, nullptr);
}

BlockSparseJacobian jacobian(const Calibration& calib, const ObservationSet& obs,
                             const ParameterLayout& layout) {
  BlockSparseJacobian jac;
  linearize(calib, obs, &layout, &jac);
  return jac;
}

Eigen::MatrixXd numeric_jacobian(const Calibration& calib,
                                 const ObservationSet& obs,
                                 const ParameterLayout& layout, double step) {
  const Eigen::VectorXd x0 = layout.pack(calib);
  const Calibration base = layout.unpack(x0, calib);
  Eigen::MatrixXd jac(2 * obs.count(), layout.size());
  for (int c = 0; c < layout.size(); ++c) {
    Eigen::VectorXd xp = x0;
    Eigen::VectorXd xm = x0;
    xp(c) += step;
    xm(c) -= step;
    jac.col(c) = (residuals(layout.unpack(xp, base), obs) -
                  residuals(layout.unpack(xm, base), obs)) /
                 (2.0 * step);
  }
  return jac;
}

double rms(const Eigen::VectorXd& r) {
  return r.size() == 0 ? 0.0 : std::sqrt(r.squaredNorm() / r.size());
}

std::vector<double> per_viewpoint_errors(const Calibration& calib,
                                         const ObservationSet& obs) {
  const Eigen::VectorXd r = residuals(calib, obs);
  std::vector<double> out(obs.n_viewpoints(), 0.0);
  Eigen::Index row = 0;
  for (int i = 0; i < obs.n_viewpoints(); ++i) {
    int count = 0;
    for (int j = 0; j < obs.n_frames(); ++j) count += obs.count(i, j);
    const Eigen::Index len = 2 * count;
    if (len > 0) out[i] = rms(r.segment(row, len));
    row += len;
  }
  return out;
}

OptimizeReport evaluate(const Calibration& calib, const ObservationSet& obs) {
  OptimizeReport rep;
  rep.initial_rms = rep.final_rms = rms(residuals(calib, obs));
  rep.per_viewpoint_rms = per_viewpoint_errors(calib, obs);
  rep.per_viewpoint_rms_std = population_std(rep.per_viewpoint_rms);
  rep.iterations = 0;
  rep.termination_reason = TerminationReason::kCostConverged;
  return rep;
}

OptimizeResult optimize(const InitialCalibration& init, const ObservationSet& obs,
                        const OptimizeOptions& opts) {
  opts.validate();
  check_dimensions(init, obs);

  const ParameterLayout layout(obs.n_viewpoints(), obs.n_frames(), opts);
  Calibration current = layout.unpack(layout.pack(init), init);
  Eigen::VectorXd x = layout.pack(current);

  BlockSparseJacobian jac;
  Eigen::VectorXd r = linearize(current, obs, &layout, &jac);
  double cost = r.squaredNorm();

  OptimizeReport report;
  report.initial_rms = rms(r);
  report.termination_reason = TerminationReason::kMaxIterations;

  constexpr int kMaxRejections = 40;
  double lambda = opts.damping_init;
  Eigen::MatrixXd jtj;
  Eigen::VectorXd jtr;

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    if (opts.numeric_jacobian) {
      const Eigen::MatrixXd dense = numeric_jacobian(current, obs, layout);
      jtj = dense.transpose() * dense;
      jtr = dense.transpose() * r;
    } else {
      normal_equations(jac, r, jtj, jtr);
    }
    if (cost == 0.0 || jtr.lpNorm<Eigen::Infinity>() < opts.gradient_tol) {
      report.termination_reason = TerminationReason::kGradientConverged;
      break;
    }

    const Eigen::VectorXd diag = jtj.diagonal();
    bool accepted = false;
    bool any_solvable = false;
    int rejections = 0;
    double new_cost = cost;
    Eigen::VectorXd new_x;
    Calibration trial;
    Eigen::VectorXd trial_r;
    while (rejections < kMaxRejections) {
      Eigen::MatrixXd damped = jtj;
      for (Eigen::Index c = 0; c < diag.size(); ++c) {
        damped(c, c) += lambda * (diag(c) > 0.0 ? diag(c) : 1.0);
      }
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
      Eigen::VectorXd delta;
      bool solvable = ldlt.info() == Eigen::Success && ldlt.isPositive();
      if (solvable) {
        delta = ldlt.solve(-jtr);
        solvable = delta.allFinite();
      }
      if (solvable) {
        any_solvable = true;
        new_x = x + delta;
        try {
          trial = layout.unpack(new_x, current);
          trial_r = residuals(trial, obs);
          new_cost = trial_r.squaredNorm();
          if (new_cost < cost) {
            accepted = true;
            break;
          }
        } catch (const BehindCameraError&) {
          // Divergent trial step; treated as a rejection.
        }
      }
      lambda *= 10.0;
      ++rejections;
    }

    if (!accepted) {
      if (!any_solvable) {
        throw NumericError("optimization failed: damped normal equations are "
                           "singular after " +
                           std::to_string(kMaxRejections) + " damping increases");
      }
      report.termination_reason = TerminationReason::kCostConverged;
      report.iterations = iter + 1;
      break;
    }

    lambda = std::max(lambda / 10.0, 1e-15);
    const double rel_change = (cost - new_cost) / cost;
    current = trial;
    x = layout.pack(current);  // keeps rotation angles in [0, pi]
    cost = new_cost;
    r = linearize(current, obs, &layout, &jac);
    report.iterations = iter + 1;
    if (rel_change < opts.cost_rel_tol) {
      report.termination_reason = TerminationReason::kCostConverged;
      break;
    }
  }

  report.final_rms = rms(r);
  report.per_viewpoint_rms = per_viewpoint_errors(current, obs);
  report.per_viewpoint_rms_std = population_std(report.per_viewpoint_rms);
  return {current, report};
}

OptimizeResult refine_independently(const InitialCalibration& init,
                                    const ObservationSet& obs,
                                    const OptimizeOptions& opts) {
  opts.validate();
  check_dimensions(init, obs);
  const int n = obs.n_viewpoints();
  const int t = obs.n_frames();

  std::vector<Calibration> refined;
  int iterations = 0;
  auto reason = TerminationReason::kCostConverged;
  for (int i = 0; i < n; ++i) {
    auto sub = optimize(single_viewpoint_model(init, i), obs.single_viewpoint(i), opts);
    iterations += sub.report.iterations;
    if (sub.report.termination_reason == TerminationReason::kMaxIterations) {
      reason = TerminationReason::kMaxIterations;
    }
    refined.push_back(std::move(sub.calibration));
  }

  Calibration out = init;
  for (int i = 0; i < n; ++i) {
    out.viewpoints[i].intrinsics = refined[i].viewpoints[0].intrinsics;
    out.viewpoints[i].distortion = refined[i].viewpoints[0].distortion;
    if (i == 0) continue;
    std::vector<RigidTransform> rel;
    for (int j = 0; j < t; ++j) {
      if (obs.count(i, j) > 0 && obs.count(0, j) > 0) {
        rel.push_back(relative_from_world(refined[i].frame_poses[j],
                                          refined[0].frame_poses[j]));
      }
    }
    if (!rel.empty()) out.viewpoints[i].relative = aggregate_relative_poses(rel);
  }
  for (int j = 0; j < t; ++j) {
    if (obs.count(0, j) > 0) out.frame_poses[j] = refined[0].frame_poses[j];
  }

  OptimizeReport report = evaluate(out, obs);
  report.initial_rms = rms(residuals(init, obs));
  report.iterations = iterations;
  report.termination_reason = reason;
  return {out, report};
}

std::string_view to_string(TerminationReason reason) {
  switch (reason) {
    case TerminationReason::kCostConverged:
      return "cost-converged";
    case TerminationReason::kGradientConverged:
      return "gradient-converged";
    case TerminationReason::kMaxIterations:
      return "max-iterations";
  }
  return "unknown";
}

TerminationReason termination_reason_from_string(std::string_view name) {
  for (auto r : {TerminationReason::kCostConverged,
                 TerminationReason::kGradientConverged,
                 TerminationReason::kMaxIterations}) {
    if (to_string(r) == name) return r;
  }
  throw ParseError("unknown termination reason '" + std::string(name) + "'");
}

}  // namespace lfcal
