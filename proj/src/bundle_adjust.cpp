#include "orthoforge/bundle_adjust.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>

#include "orthoforge/error.hpp"
#include "orthoforge/triangulate.hpp"

namespace orthoforge {

std::vector<Track> group_tracks(const std::vector<TieObservation>& obs,
                                const std::vector<RpcCamera>& cams) {
  std::map<std::string, int> cam_index;
  for (std::size_t i = 0; i < cams.size(); ++i)
    cam_index[cams[i].image_id] = static_cast<int>(i);

  std::map<std::int64_t, Track> by_id;
  for (const auto& o : obs) {
    const auto it = cam_index.find(o.image_id);
    if (it == cam_index.end())
      throw InvalidInput("tie point references unknown image " + o.image_id);
    Track& t = by_id[o.track_id];
    t.track_id = o.track_id;
    t.obs.push_back({it->second, o.pixel});
  }

  std::vector<Track> tracks;
  tracks.reserve(by_id.size());
  for (auto& [id, t] : by_id) {
    (void)id;
    tracks.push_back(std::move(t));
  }
  return tracks;
}

namespace {

// Shared normalization for point parameters, taken from the first camera;
// one site's cameras agree on the box to within what conditioning needs.
struct PointScale {
  double lat_off, lon_off, h_off;
  double lat_s, lon_s, h_s;

  explicit PointScale(const RpcCamera& c)
      : lat_off(c.lat_off), lon_off(c.lon_off), h_off(c.height_off),
        lat_s(c.lat_scale), lon_s(c.lon_scale), h_s(c.height_scale) {}

  Eigen::Vector3d encode(const GeoPoint& p) const {
    return {(p.lat - lat_off) / lat_s, (p.lon - lon_off) / lon_s,
            (p.h - h_off) / h_s};
  }
  GeoPoint decode(const Eigen::Vector3d& v) const {
    return {lat_off + v[0] * lat_s, lon_off + v[1] * lon_s,
            h_off + v[2] * h_s};
  }
};

Eigen::Vector2d reproj_residual(const RpcCamera& cam, const ImageBias& bias,
                                const GeoPoint& p, const PixelCoord& obs) {
  const PixelCoord q = rpc_project(cam, bias, p);
  return {q.sample - obs.sample, q.line - obs.line};
}

// d(pixel)/d(normalized point params), central differences.
Eigen::Matrix<double, 2, 3> point_jacobian(const RpcCamera& cam,
                                           const ImageBias& bias,
                                           const PointScale& ps,
                                           const Eigen::Vector3d& x,
                                           double fd_step) {
  Eigen::Matrix<double, 2, 3> J;
  for (int k = 0; k < 3; ++k) {
    Eigen::Vector3d hi = x, lo = x;
    hi[k] += fd_step;
    lo[k] -= fd_step;
    const PixelCoord a = rpc_project(cam, bias, ps.decode(hi));
    const PixelCoord b = rpc_project(cam, bias, ps.decode(lo));
    J(0, k) = (a.sample - b.sample) / (2.0 * fd_step);
    J(1, k) = (a.line - b.line) / (2.0 * fd_step);
  }
  return J;
}

// Multi-observation point refinement at fixed camera geometry. Returns false
// when no usable seed pair exists.
bool refine_point(const std::vector<RpcCamera>& cams,
                  const std::vector<ImageBias>& biases, const Track& track,
                  GeoPoint& out, double fd_step) {
  bool seeded = false;
  for (std::size_t i = 0; i < track.obs.size() && !seeded; ++i) {
    for (std::size_t j = i + 1; j < track.obs.size() && !seeded; ++j) {
      const auto& oa = track.obs[i];
      const auto& ob = track.obs[j];
      if (oa.camera == ob.camera) continue;
      try {
        const auto r = triangulate(cams[oa.camera], biases[oa.camera],
                                   oa.pixel, cams[ob.camera],
                                   biases[ob.camera], ob.pixel,
                                   cams[oa.camera].height_off);
        out = r.point;
        seeded = true;
      } catch (const IllConditioned&) {
      } catch (const NonConvergence&) {
      }
    }
  }
  if (!seeded) return false;

  const PointScale ps(cams[0]);
  Eigen::Vector3d x = ps.encode(out);
  double mu = 1e-6;
  for (int it = 0; it < 50; ++it) {
    Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
    Eigen::Vector3d g = Eigen::Vector3d::Zero();
    double cost = 0.0;
    for (const auto& o : track.obs) {
      const Eigen::Vector2d r = reproj_residual(cams[o.camera],
                                                biases[o.camera],
                                                ps.decode(x), o.pixel);
      const auto J = point_jacobian(cams[o.camera], biases[o.camera], ps, x,
                                    fd_step);
      H += J.transpose() * J;
      g += J.transpose() * r;
      cost += r.squaredNorm();
    }
    bool accepted = false;
    for (int tries = 0; tries < 15; ++tries) {
      Eigen::Matrix3d Hd = H;
      Hd.diagonal() *= 1.0 + mu;
      const Eigen::Vector3d step = Hd.ldlt().solve(-g);
      const Eigen::Vector3d cand = x + step;
      double cand_cost = 0.0;
      for (const auto& o : track.obs)
        cand_cost += reproj_residual(cams[o.camera], biases[o.camera],
                                     ps.decode(cand), o.pixel)
                         .squaredNorm();
      if (cand_cost <= cost) {
        x = cand;
        mu = std::max(mu / 3.0, 1e-12);
        accepted = true;
        if (step.norm() < 1e-12) it = 50;
        break;
      }
      mu *= 10.0;
    }
    if (!accepted) break;
  }
  out = ps.decode(x);
  return true;
}

}  // namespace

BundleResult bundle_adjust(const std::vector<RpcCamera>& cams,
                           const std::vector<Track>& tracks,
                           const BundleOptions& opt) {
  if (cams.empty()) throw InvalidInput("bundle_adjust: no cameras");
  const int nc = static_cast<int>(cams.size());

  BundleResult res;
  res.biases.assign(nc, ImageBias{});
  res.gauge_warning = opt.lambda_reg == 0.0;

  const PointScale ps(cams[0]);
  std::vector<Eigen::Vector3d> pts;
  std::vector<const Track*> kept;
  for (const auto& t : tracks) {
    GeoPoint p;
    if (t.obs.size() >= 2 && refine_point(cams, res.biases, t, p, opt.fd_step)) {
      pts.push_back(ps.encode(p));
      kept.push_back(&t);
    } else {
      ++res.dropped_tracks;
    }
  }
  const int nt = static_cast<int>(kept.size());
  if (nt == 0) throw InvalidInput("bundle_adjust: no triangulable tracks");

  Eigen::VectorXd bias = Eigen::VectorXd::Zero(2 * nc);

  auto total_cost = [&]() {
    double c = 0.0;
    for (int t = 0; t < nt; ++t) {
      const GeoPoint p = ps.decode(pts[t]);
      for (const auto& o : kept[t]->obs) {
        const ImageBias b{bias[2 * o.camera], bias[2 * o.camera + 1]};
        c += reproj_residual(cams[o.camera], b, p, o.pixel).squaredNorm();
      }
    }
    c += opt.lambda_reg * bias.squaredNorm();
    return c;
  };

  double cost = total_cost();
  res.initial_cost = cost;
  int n_obs = 0;
  for (int t = 0; t < nt; ++t) n_obs += static_cast<int>(kept[t]->obs.size());

  double mu = 1e-4;
  for (int it = 1; it <= opt.max_iterations; ++it) {
    res.iterations = it;

    // Per-track blocks of the normal equations. The bias Jacobian is the
    // identity, which collapses most of the usual bookkeeping.
    std::vector<Eigen::Matrix3d> Hpp(nt, Eigen::Matrix3d::Zero());
    std::vector<Eigen::Vector3d> gp(nt, Eigen::Vector3d::Zero());
    // W blocks keyed by (track, camera): sum of point Jacobians there.
    std::vector<std::vector<std::pair<int, Eigen::Matrix<double, 2, 3>>>> W(nt);
    Eigen::VectorXd gb = Eigen::VectorXd::Zero(2 * nc);
    Eigen::VectorXd hb_diag = Eigen::VectorXd::Zero(2 * nc);

    for (int t = 0; t < nt; ++t) {
      for (const auto& o : kept[t]->obs) {
        const ImageBias b{bias[2 * o.camera], bias[2 * o.camera + 1]};
        const Eigen::Vector2d r =
            reproj_residual(cams[o.camera], b, ps.decode(pts[t]), o.pixel);
        const auto J = point_jacobian(cams[o.camera], b, ps, pts[t],
                                      opt.fd_step);
        Hpp[t] += J.transpose() * J;
        gp[t] += J.transpose() * r;
        gb.segment<2>(2 * o.camera) += r;
        hb_diag.segment<2>(2 * o.camera) += Eigen::Vector2d::Ones();

        bool merged = false;
        for (auto& [ci, blk] : W[t])
          if (ci == o.camera) {
            blk += J;
            merged = true;
            break;
          }
        if (!merged) W[t].push_back({o.camera, J});
      }
    }
    gb += opt.lambda_reg * bias;
    hb_diag.array() += opt.lambda_reg;

    bool accepted = false;
    for (int tries = 0; tries < 12 && !accepted; ++tries) {
      // Schur complement over the damped point blocks.
      Eigen::MatrixXd S = Eigen::MatrixXd::Zero(2 * nc, 2 * nc);
      Eigen::VectorXd rhs = -gb;
      S.diagonal() = hb_diag * (1.0 + mu);

      std::vector<Eigen::Matrix3d> Hpp_inv(nt);
      for (int t = 0; t < nt; ++t) {
        Eigen::Matrix3d Hd = Hpp[t];
        Hd.diagonal() *= 1.0 + mu;
        Hpp_inv[t] = Hd.inverse();
        const Eigen::Vector3d y = Hpp_inv[t] * gp[t];
        for (const auto& [ci, Wi] : W[t]) {
          rhs.segment<2>(2 * ci) += Wi * y;
          for (const auto& [cj, Wj] : W[t])
            S.block<2, 2>(2 * ci, 2 * cj) -= Wi * Hpp_inv[t] * Wj.transpose();
        }
      }

      const Eigen::VectorXd db = S.ldlt().solve(rhs);
      std::vector<Eigen::Vector3d> dp(nt);
      for (int t = 0; t < nt; ++t) {
        Eigen::Vector3d wtb = Eigen::Vector3d::Zero();
        for (const auto& [ci, Wi] : W[t])
          wtb += Wi.transpose() * db.segment<2>(2 * ci);
        dp[t] = -Hpp_inv[t] * (gp[t] + wtb);
      }

      const Eigen::VectorXd bias_save = bias;
      const std::vector<Eigen::Vector3d> pts_save = pts;
      bias += db;
      for (int t = 0; t < nt; ++t) pts[t] += dp[t];

      const double cand = total_cost();
      if (cand <= cost) {
        // RMS pixel motion of the update, biases directly and points through
        // their Jacobians.
        double sq = db.squaredNorm();
        for (int t = 0; t < nt; ++t)
          for (const auto& [ci, Wi] : W[t]) {
            (void)ci;
            sq += (Wi * dp[t]).squaredNorm();
          }
        const double step_px = std::sqrt(sq / (nc + n_obs));
        cost = cand;
        mu = std::max(mu / 3.0, 1e-12);
        accepted = true;
        if (step_px < opt.step_tol_px) {
          res.final_cost = cost;
          for (int i = 0; i < nc; ++i)
            res.biases[i] = {bias[2 * i], bias[2 * i + 1]};
          for (int t = 0; t < nt; ++t) {
            res.points.push_back(ps.decode(pts[t]));
            res.point_track_ids.push_back(kept[t]->track_id);
          }
          return res;
        }
      } else {
        bias = bias_save;
        pts = pts_save;
        mu *= 10.0;
      }
    }
    if (!accepted) break;  // no descent direction left at this damping
  }

  res.final_cost = cost;
  for (int i = 0; i < nc; ++i) res.biases[i] = {bias[2 * i], bias[2 * i + 1]};
  for (int t = 0; t < nt; ++t) {
    res.points.push_back(ps.decode(pts[t]));
    res.point_track_ids.push_back(kept[t]->track_id);
  }
  return res;
}

double track_rms(const std::vector<double>& residual_norms) {
  if (residual_norms.empty()) return 0.0;
  double s = 0.0;
  for (double v : residual_norms) s += v * v;
  return std::sqrt(s / residual_norms.size());
}

ReprojectionStats stats_from_track_rms(const std::vector<double>& rms) {
  ReprojectionStats st;
  st.num_tracks = static_cast<int>(rms.size());
  if (rms.empty()) return st;
  double s = 0.0;
  for (double v : rms) s += v;
  st.mean_px = s / rms.size();
  double var = 0.0;
  for (double v : rms) var += (v - st.mean_px) * (v - st.mean_px);
  st.variance_px2 = var / rms.size();
  return st;
}

ReprojectionStats reprojection_stats(const std::vector<RpcCamera>& cams,
                                     const std::vector<ImageBias>& biases,
                                     const std::vector<Track>& tracks) {
  std::vector<double> rms;
  int skipped = 0;
  for (const auto& t : tracks) {
    GeoPoint p;
    if (t.obs.size() < 2 || !refine_point(cams, biases, t, p, 1e-7)) {
      ++skipped;
      continue;
    }
    std::vector<double> norms;
    norms.reserve(t.obs.size());
    for (const auto& o : t.obs)
      norms.push_back(
          reproj_residual(cams[o.camera], biases[o.camera], p, o.pixel)
              .norm());
    rms.push_back(track_rms(norms));
  }
  ReprojectionStats st = stats_from_track_rms(rms);
  st.skipped_tracks = skipped;
  return st;
}

}  // namespace orthoforge
