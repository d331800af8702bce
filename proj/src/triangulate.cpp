#include "orthoforge/triangulate.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "orthoforge/error.hpp"

namespace orthoforge {

namespace {

// Parameters are cam_a-normalized (P, L, H); keeps the normal matrix scale
// balanced between the degree axes and the height axis.
GeoPoint to_geo(const RpcCamera& a, const Eigen::Vector3d& t) {
  GeoPoint p;
  p.lat = a.lat_off + t[0] * a.lat_scale;
  p.lon = a.lon_off + t[1] * a.lon_scale;
  p.h = a.height_off + t[2] * a.height_scale;
  return p;
}

Eigen::Vector4d residual(const RpcCamera& a, const ImageBias& ba,
                         const PixelCoord& pa, const RpcCamera& b,
                         const ImageBias& bb, const PixelCoord& pb,
                         const Eigen::Vector3d& t) {
  const GeoPoint g = to_geo(a, t);
  const PixelCoord qa = rpc_project(a, ba, g);
  const PixelCoord qb = rpc_project(b, bb, g);
  Eigen::Vector4d r;
  r << qa.sample - pa.sample, qa.line - pa.line, qb.sample - pb.sample,
      qb.line - pb.line;
  return r;
}

}  // namespace

TriangulateResult triangulate(const RpcCamera& cam_a, const ImageBias& bias_a,
                              const PixelCoord& px_a, const RpcCamera& cam_b,
                              const ImageBias& bias_b, const PixelCoord& px_b,
                              double h_init, const TriangulateOptions& opt) {
  Eigen::Vector3d t(0.0, 0.0,
                    (h_init - cam_a.height_off) / cam_a.height_scale);

  auto res = [&](const Eigen::Vector3d& v) {
    return residual(cam_a, bias_a, px_a, cam_b, bias_b, px_b, v);
  };
  auto jacobian = [&](const Eigen::Vector3d& v) {
    Eigen::Matrix<double, 4, 3> J;
    for (int k = 0; k < 3; ++k) {
      Eigen::Vector3d hi = v, lo = v;
      hi[k] += opt.fd_step;
      lo[k] -= opt.fd_step;
      J.col(k) = (res(hi) - res(lo)) / (2.0 * opt.fd_step);
    }
    return J;
  };

  // One linearized lat/lon seed step at the initial height pulls the start
  // point near the ray before the full iteration begins.
  {
    const Eigen::Matrix<double, 4, 3> J = jacobian(t);
    const Eigen::Matrix<double, 4, 2> Jll = J.leftCols<2>();
    const Eigen::Vector4d r = res(t);
    const Eigen::Matrix2d N = Jll.transpose() * Jll;
    if (std::fabs(N.determinant()) > 1e-12)
      t.head<2>() -= N.ldlt().solve(Jll.transpose() * r);
  }

  double lambda = 1e-3;
  double rms = 0.0;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    const Eigen::Vector4d r = res(t);
    rms = std::sqrt(r.squaredNorm() / 4.0);
    const Eigen::Matrix<double, 4, 3> J = jacobian(t);
    const Eigen::Matrix3d N = J.transpose() * J;

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(N);
    const double emin = eig.eigenvalues()[0];
    const double emax = eig.eigenvalues()[2];
    if (emin <= 0.0 || emax / emin > opt.condition_limit)
      throw IllConditioned("triangulation rays near-parallel for images " +
                           cam_a.image_id + "/" + cam_b.image_id);

    const Eigen::Vector3d g = J.transpose() * r;
    bool accepted = false;
    for (int tries = 0; tries < 20; ++tries) {
      Eigen::Matrix3d Nd = N;
      Nd.diagonal() *= 1.0 + lambda;
      const Eigen::Vector3d step = Nd.ldlt().solve(-g);
      const Eigen::Vector3d cand = t + step;
      const Eigen::Vector4d rc = res(cand);
      if (rc.squaredNorm() <= r.squaredNorm()) {
        const double step_px = (J * step).norm();
        t = cand;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (step_px < opt.step_tol_px) {
          TriangulateResult out;
          out.point = to_geo(cam_a, t);
          out.rms_px = std::sqrt(rc.squaredNorm() / 4.0);
          out.iterations = it;
          return out;
        }
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // Cost cannot be reduced any further; treat a flat spot as converged.
      TriangulateResult out;
      out.point = to_geo(cam_a, t);
      out.rms_px = rms;
      out.iterations = it;
      return out;
    }
  }
  throw NonConvergence("triangulation did not converge for images " +
                           cam_a.image_id + "/" + cam_b.image_id,
                       rms);
}

}  // namespace orthoforge
