#include "squasplat/backward.hpp"

#include <cmath>
#include <stdexcept>

#include "squasplat/parallel.hpp"

namespace squasplat {
namespace {

// Layout of one flattened gradient record.
constexpr int kCenter = 0;
constexpr int kRotation = 3;
constexpr int kScale = 7;
constexpr int kEps = 10;
constexpr int kOpacity = 12;
constexpr int kSemantics = 13;

// d|u|^e / du, zero at u == 0.
double pow_slope(double powered, double u, double e) {
  return u == 0.0 ? 0.0 : e * powered / u;
}

double log_abs(double u) { return u == 0.0 ? 0.0 : std::log(std::abs(u)); }

// Sum over i, j of h(i, j) * dR(i, j) / dq_k for the normalizing
// quaternion-to-matrix map.
Vec4 rotation_vjp(const Vec4& q, const Mat3& h) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  const double n = q.squaredNorm();
  const double s = 2.0 / n;
  Mat3 m;
  m << -(y * y + z * z), x * y - w * z, x * z + w * y,  //
      x * y + w * z, -(x * x + z * z), y * z - w * x,   //
      x * z - w * y, y * z + w * x, -(x * x + y * y);
  Mat3 dw, dx, dy, dz;
  dw << 0, -z, y, z, 0, -x, -y, x, 0;
  dx << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
  dy << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
  dz << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
  const double hm = (h.array() * m.array()).sum();
  const Vec4 direct((h.array() * dw.array()).sum(),
                    (h.array() * dx.array()).sum(),
                    (h.array() * dy.array()).sum(),
                    (h.array() * dz.array()).sum());
  return s * direct - (s * 2.0 * hm / n) * q;
}

void check_upstream(const GridGradient& g, std::size_t n, int c) {
  const auto nc = n * static_cast<std::size_t>(c);
  if (!g.o_vec.empty()) {
    if (g.o_vec.size() != n + nc) {
      throw std::invalid_argument("splat_backward: o_vec gradient size");
    }
    return;
  }
  if (!g.occupancy.empty() && g.occupancy.size() != n) {
    throw std::invalid_argument("splat_backward: occupancy gradient size");
  }
  if (!g.semantics.empty() && g.semantics.size() != nc) {
    throw std::invalid_argument("splat_backward: semantics gradient size");
  }
}

}  // namespace

ContributionGradient contribution_gradient(const PreparedPrimitive& prim,
                                           const Vec3& p,
                                           const FieldConfig& cfg) {
  ContributionGradient out;
  out.value = contribution(prim, p, cfg);
  if (out.value == 0.0) return out;

  const Vec3 d = p - prim.center;
  const Vec3 local = prim.rotation.transpose() * d;
  const Vec3 u = local.cwiseProduct(prim.inv_scale);
  const double e1 = prim.eps[0], e2 = prim.eps[1];

  const double x = abs_pow(u.x(), prim.exp_xy);
  const double y = abs_pow(u.y(), prim.exp_xy);
  const double z = abs_pow(u.z(), prim.exp_z);
  const double a = x + y;
  const double g = abs_pow(a, prim.exp_ratio);
  const double dg_da = a == 0.0 ? 0.0 : prim.exp_ratio * g / a;

  const double dx_du = pow_slope(x, u.x(), prim.exp_xy);
  const double dy_du = pow_slope(y, u.y(), prim.exp_xy);
  const double dz_du = pow_slope(z, u.z(), prim.exp_z);

  // Gradient of the inside-outside value in local coordinates.
  const Vec3 df_dlocal(dg_da * dx_du * prim.inv_scale.x(),
                       dg_da * dy_du * prim.inv_scale.y(),
                       dz_du * prim.inv_scale.z());
  const Vec3 df_dd = prim.rotation * df_dlocal;

  const Vec3 df_ds(-dg_da * dx_du * u.x() * prim.inv_scale.x(),
                   -dg_da * dy_du * u.y() * prim.inv_scale.y(),
                   -dz_du * u.z() * prim.inv_scale.z());

  const double dexp_xy_de2 = -2.0 / (e2 * e2);
  const double da_de2 =
      (x * log_abs(u.x()) + y * log_abs(u.y())) * dexp_xy_de2;
  const double log_a = a == 0.0 ? 0.0 : std::log(a);
  const double dg_de2 =
      a == 0.0 ? 0.0 : g * (log_a / e1 + prim.exp_ratio * da_de2 / a);
  const double dg_de1 = g * log_a * (-e2 / (e1 * e1));
  const double dz_de1 = z * log_abs(u.z()) * (-2.0 / (e1 * e1));

  const double dv_df = -cfg.lambda * out.value;
  out.center = -dv_df * df_dd;
  out.rotation = dv_df * rotation_vjp(prim.quaternion, d * df_dlocal.transpose());
  out.scale = dv_df * df_ds;
  out.eps = Vec2(dv_df * (dg_de1 + dz_de1), dv_df * dg_de2);
  return out;
}

std::vector<SuperquadricGradient> splat_backward(
    std::span<const Superquadric> scene, int num_classes,
    const GridSpec& spec, const FieldConfig& cfg, const GridGradient& upstream,
    const SplatOptions& options) {
  spec.validate();
  cfg.validate();
  const std::size_t n_voxels = spec.voxel_count();
  check_upstream(upstream, n_voxels, num_classes);
  for (const auto& sq : scene) {
    if (sq.num_classes() != num_classes) {
      throw std::invalid_argument("splat_backward: class count mismatch");
    }
  }

  const auto prims = prepare_all(scene, cfg);
  const TilePairTable table = build_tile_table(prims, spec, options.tile_size);
  const auto c = static_cast<std::size_t>(num_classes);
  const std::size_t stride = kSemantics + c;
  std::vector<double> pair_grads(table.pairs.size() * stride, 0.0);

  parallel_for(table.tile_count(), options.workers, [&](std::size_t t) {
    const auto pairs = table.tile(t);
    if (pairs.empty()) return;
    Index3 first, last;
    table.tile_voxels(t, spec, first, last);
    double* tile_grads = pair_grads.data() + table.offsets[t] * stride;

    std::vector<ContributionGradient> active;
    std::vector<std::size_t> slot;
    std::vector<double> prefix, suffix, p_sem(c), g_sem(c), a_sem(c);
    for (int k = first[2]; k <= last[2]; ++k)
      for (int j = first[1]; j <= last[1]; ++j)
        for (int i = first[0]; i <= last[0]; ++i) {
          const Vec3 p = spec.voxel_center(i, j, k);
          active.clear();
          slot.clear();
          for (std::size_t s = 0; s < pairs.size(); ++s) {
            auto cg = contribution_gradient(prims[pairs[s].primitive], p, cfg);
            if (cg.value > 0.0) {
              active.push_back(cg);
              slot.push_back(s);
            }
          }
          if (active.empty()) continue;

          // Forward recomputation in ascending primitive order.
          const std::size_t m = active.size();
          prefix.assign(m + 1, 1.0);
          suffix.assign(m + 1, 1.0);
          for (std::size_t q = 0; q < m; ++q) {
            prefix[q + 1] = prefix[q] * (1.0 - active[q].value);
          }
          for (std::size_t q = m; q-- > 0;) {
            suffix[q] = suffix[q + 1] * (1.0 - active[q].value);
          }
          const double p_occ = 1.0 - prefix[m];
          double weight = 0.0;
          std::fill(p_sem.begin(), p_sem.end(), 0.0);
          for (std::size_t q = 0; q < m; ++q) {
            const auto& prim = prims[pairs[slot[q]].primitive];
            const double w = active[q].value * prim.opacity;
            weight += w;
            for (std::size_t cl = 0; cl < c; ++cl) {
              p_sem[cl] += w * prim.semantics[cl];
            }
          }
          const bool degenerate = weight < kSemanticDenominatorFloor;
          for (std::size_t cl = 0; cl < c; ++cl) {
            p_sem[cl] = degenerate ? 1.0 / num_classes : p_sem[cl] / weight;
          }

          // Upstream in (p_occ, p_sem) form.
          const std::size_t v = spec.linear_index(i, j, k);
          double g_occ = 0.0;
          if (!upstream.o_vec.empty()) {
            const double* go = upstream.o_vec.data() + v * (c + 1);
            for (std::size_t cl = 0; cl < c; ++cl) {
              g_occ += go[cl] * p_sem[cl];
              g_sem[cl] = go[cl] * p_occ;
            }
            g_occ -= go[c];
          } else {
            g_occ = upstream.occupancy.empty() ? 0.0 : upstream.occupancy[v];
            for (std::size_t cl = 0; cl < c; ++cl) {
              g_sem[cl] = upstream.semantics.empty()
                              ? 0.0
                              : upstream.semantics[v * c + cl];
            }
          }

          double sem_dot = 0.0;
          if (!degenerate) {
            for (std::size_t cl = 0; cl < c; ++cl) {
              a_sem[cl] = g_sem[cl] / weight;
              sem_dot += a_sem[cl] * p_sem[cl];
            }
          }

          for (std::size_t q = 0; q < m; ++q) {
            const auto& prim = prims[pairs[slot[q]].primitive];
            const ContributionGradient& cg = active[q];
            double* out = tile_grads + slot[q] * stride;

            double d_value = g_occ * prefix[q] * suffix[q + 1];
            if (!degenerate) {
              double d_weight = -sem_dot;
              for (std::size_t cl = 0; cl < c; ++cl) {
                d_weight += a_sem[cl] * prim.semantics[cl];
              }
              const double w = cg.value * prim.opacity;
              for (std::size_t cl = 0; cl < c; ++cl) {
                out[kSemantics + cl] += a_sem[cl] * w;
              }
              out[kOpacity] += d_weight * cg.value;
              d_value += d_weight * prim.opacity;
            }
            for (int r = 0; r < 3; ++r) {
              out[kCenter + r] += d_value * cg.center[r];
              out[kScale + r] += d_value * cg.scale[r];
            }
            for (int r = 0; r < 4; ++r) {
              out[kRotation + r] += d_value * cg.rotation[r];
            }
            out[kEps + 0] += d_value * cg.eps[0];
            out[kEps + 1] += d_value * cg.eps[1];
          }
        }
  });

  // Per-primitive reduction in ascending tile order.
  std::vector<std::vector<std::size_t>> by_primitive(prims.size());
  for (std::size_t q = 0; q < table.pairs.size(); ++q) {
    by_primitive[table.pairs[q].primitive].push_back(q);
  }
  std::vector<SuperquadricGradient> grads(prims.size());
  parallel_for(prims.size(), options.workers, [&](std::size_t p) {
    std::vector<double> sum(stride, 0.0);
    for (std::size_t q : by_primitive[p]) {
      const double* g = pair_grads.data() + q * stride;
      for (std::size_t r = 0; r < stride; ++r) sum[r] += g[r];
    }
    SuperquadricGradient& out = grads[p];
    out.center = Vec3(sum[kCenter], sum[kCenter + 1], sum[kCenter + 2]);
    out.rotation = Vec4(sum[kRotation], sum[kRotation + 1],
                        sum[kRotation + 2], sum[kRotation + 3]);
    out.scale = Vec3(sum[kScale], sum[kScale + 1], sum[kScale + 2]);
    out.eps = Vec2(sum[kEps], sum[kEps + 1]);
    out.opacity = sum[kOpacity];
    out.semantics.assign(sum.begin() + kSemantics, sum.end());
  });
  return grads;
}

}  // namespace squasplat
