#include "dislo/assembly.hpp"

#include "dislo/fem.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

namespace dislo {

namespace {

constexpr double kGl8x[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
                             0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr double kGl8w[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
                             0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
constexpr double kBand = 1.0 / 16.0;

double op_norm(const Mat2& a) {
  Eigen::JacobiSVD<Mat2> svd(a);
  return svd.singularValues()(0);
}

// Parameter interval of A + t d, t in [0, 1], inside the open disc of radius r.
bool clip_to_disc(const Vec2& A, const Vec2& d, double r, double& t0, double& t1) {
  double qa = d.squaredNorm(), qb = 2.0 * A.dot(d), qc = A.squaredNorm() - r * r;
  if (qa == 0.0) return false;
  double disc = qb * qb - 4.0 * qa * qc;
  if (disc <= 0.0) return false;
  double sq = std::sqrt(disc);
  double q = -0.5 * (qb + (qb >= 0 ? sq : -sq));
  double r1 = q / qa, r2 = q != 0.0 ? qc / q : -qb / qa;
  if (r1 > r2) std::swap(r1, r2);
  t0 = std::max(0.0, r1);
  t1 = std::min(1.0, r2);
  return t0 < t1;
}

// Correction of the radial profile 1 - r^2/a^2 by a monotone C1 cubic on the outer band.
double profile_correction(double r, double a) {
  double r0 = a * (1.0 - kBand);
  if (r <= r0 || r >= a) return 0.0;
  double u = (r - r0) / (a - r0);
  double g0 = 1.0 - r0 * r0 / (a * a);
  double m0 = -2.0 * r0 / (a * a) * (a - r0);
  double h00 = 2 * u * u * u - 3 * u * u + 1, h10 = u * u * u - 2 * u * u + u;
  double p = g0 * h00 + m0 * h10;
  return p - (1.0 - r * r / (a * a));
}

struct EdgeForm {
  double alpha = 0.0;  // dtheta / 2pi over the part inside the disc
  double beta = 0.0;   // cross / (2 pi a^2) over the part inside the disc
  double moll = 0.0;   // mollification correction
};

// Integrals over the segment A -> B (relative to the atom) of the single-atom forms.
EdgeForm edge_forms(const Vec2& A, const Vec2& B, double a, bool mollify) {
  EdgeForm f;
  Vec2 d = B - A;
  double t0, t1;
  if (!clip_to_disc(A, d, a, t0, t1)) return f;
  Vec2 P0 = A + t0 * d, P1 = A + t1 * d;
  double cr = cross(P0, P1);
  f.alpha = std::atan2(cr, P0.dot(P1)) / kTwoPi;
  f.beta = cr / (kTwoPi * a * a);
  if (!mollify) return f;
  double c = cross(A, d);
  auto integrate = [&](double lo, double hi) {
    if (!(hi > lo)) return 0.0;
    double s = 0.0, half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    for (int k = 0; k < 8; ++k) {
      double t = mid + half * kGl8x[k];
      double r2 = (A + t * d).squaredNorm();
      s += kGl8w[k] * profile_correction(std::sqrt(r2), a) / r2;
    }
    return s * half * c;
  };
  double s0, s1;
  double band = 0.0;
  if (clip_to_disc(A, d, a * (1.0 - kBand), s0, s1)) {
    band += integrate(t0, std::min(t1, s0));
    band += integrate(std::max(t0, s1), t1);
  } else {
    band += integrate(t0, t1);
  }
  f.moll = band / kTwoPi;
  return f;
}

std::uint64_t edge_key(int a, int b) {
  return (static_cast<std::uint64_t>(std::min(a, b)) << 32) | static_cast<std::uint32_t>(std::max(a, b));
}

}  // namespace

TargetMeasure TargetMeasure::zero() {
  TargetMeasure t;
  t.density = [](const Vec2&) { return Vec2(Vec2::Zero()); };
  t.sup_norm = 0.0;
  return t;
}

TargetMeasure TargetMeasure::uniform(const Vec2& m) {
  TargetMeasure t;
  t.density = [m](const Vec2&) { return m; };
  t.sup_norm = m.norm();
  return t;
}

double DislocationMeasure::b() const {
  double b = 0.0;
  for (const auto& a : atoms) b = std::max(b, eps * a.burgers.norm());
  return b;
}

double DislocationMeasure::h_squared() const {
  return std::max(n_eps * n_eps * eps * eps, n_eps * eps * eps * std::log(1.0 / eps));
}

namespace {

void finish_measure(DislocationMeasure& m) {
  double sep = std::numeric_limits<double>::infinity(), bd = std::numeric_limits<double>::infinity();
  m.total_burgers = 0.0;
  for (std::size_t i = 0; i < m.atoms.size(); ++i) {
    bd = std::min(bd, m.domain.distance_to_boundary(m.atoms[i].position));
    m.total_burgers += m.atoms[i].burgers.norm();
    for (std::size_t j = i + 1; j < m.atoms.size(); ++j)
      sep = std::min(sep, (m.atoms[i].position - m.atoms[j].position).norm());
  }
  m.min_separation = sep;
  if (m.atoms.empty()) {
    m.smear_radius = 0.0;
    return;
  }
  m.smear_radius = std::min(sep / 3.0, bd / 2.0);
  if (!(10.0 * m.b() < m.smear_radius))
    throw Error(ErrorKind::Resolution, "smear radius " + std::to_string(m.smear_radius) +
                                           " does not exceed 10 max eps|v_i| = " + std::to_string(10.0 * m.b()) +
                                           "; use a smaller eps or a smaller n_eps");
}

bool is_lattice_vector(const DislocationLattice& l, const Vec2& v) {
  Vec2 c = l.basis().inverse() * v;
  return std::abs(c.x() - std::round(c.x())) < 1e-9 && std::abs(c.y() - std::round(c.y())) < 1e-9 &&
         (std::round(c.x()) != 0.0 || std::round(c.y()) != 0.0);
}

}  // namespace

DislocationMeasure approximate_measure(const TargetMeasure& mu, const Rect& omega, double n_eps, double eps,
                                       const DislocationLattice& lattice, const Mat2& iquad) {
  if (!(omega.width() > 0.0 && omega.height() > 0.0)) throw Error(ErrorKind::InvalidDomain, "empty rectangle");
  if (!(eps > 0.0 && n_eps > 0.0)) throw Error(ErrorKind::InvalidInput, "eps and n_eps must be positive");
  lattice.validate();
  DislocationMeasure m;
  m.domain = omega;
  m.eps = eps;
  m.n_eps = n_eps;
  m.origin = omega.lo;

  if (mu.atomic()) {
    for (const auto& a : mu.atoms) {
      if (!is_lattice_vector(lattice, a.burgers))
        throw Error(ErrorKind::InvalidInput, "atom Burgers vector is not a nonzero lattice vector");
      if (!(omega.distance_to_boundary(a.position) > 0.0))
        throw Error(ErrorKind::InvalidInput, "atom outside the domain");
    }
    for (int N = 1; N <= 256; ++N) {
      double cell = omega.width() / N;
      double ny = omega.height() / cell;
      if (std::abs(ny - std::round(ny)) > 1e-9 * ny) continue;
      int NY = static_cast<int>(std::round(ny));
      std::vector<int> ca(static_cast<std::size_t>(N) * NY, -1);
      bool ok = true;
      for (std::size_t i = 0; i < mu.atoms.size() && ok; ++i) {
        Vec2 q = (mu.atoms[i].position - omega.lo) / cell - Vec2(0.5, 0.5);
        if ((q - q.array().round().matrix()).norm() > 1e-9) ok = false;
        int cx = static_cast<int>(std::round(q.x())), cy = static_cast<int>(std::round(q.y()));
        if (!ok || cx < 0 || cy < 0 || cx >= N || cy >= NY || ca[cy * N + cx] >= 0) {
          ok = false;
          break;
        }
        ca[cy * N + cx] = static_cast<int>(i);
      }
      if (!ok) continue;
      m.cell = cell;
      m.nx = N;
      m.ny = NY;
      m.cell_atom = std::move(ca);
      m.square_size = cell;
      m.atoms = mu.atoms;
      finish_measure(m);
      return m;
    }
    throw Error(ErrorKind::Unsupported, "atoms must sit at the centres of a square grid of the domain");
  }

  int NX = std::max(1, static_cast<int>(std::ceil(omega.width() * std::sqrt(mu.sup_norm * n_eps) - 1e-9)));
  double square = omega.width() / NX;
  double nyd = omega.height() / square;
  int NY = std::max(1, static_cast<int>(std::lround(nyd)));
  if (std::abs(NY * square - omega.height()) > 1e-9 * omega.height())
    throw Error(ErrorKind::InvalidDomain, "rectangle aspect ratio is incompatible with the square partition");
  m.square_size = square;

  // per-square decomposition with error diffusion of the multiplicities in serpentine order
  std::vector<std::vector<Vec2>> per(static_cast<std::size_t>(NX) * NY);
  std::map<std::pair<int, int>, double> carry;
  std::size_t max_count = 0;
  for (int J = 0; J < NY; ++J)
    for (int ii = 0; ii < NX; ++ii) {
      int I = (J % 2 == 0) ? ii : NX - 1 - ii;
      Vec2 lo = omega.lo + Vec2(I * square, J * square);
      Vec2 xi = Vec2::Zero();
      if (mu.density) {
        for (int a = 0; a < 8; ++a)
          for (int b = 0; b < 8; ++b) {
            Vec2 x = lo + 0.5 * square * Vec2(1 + kGl8x[a], 1 + kGl8x[b]);
            xi += kGl8w[a] * kGl8w[b] * mu.density(x);
          }
        xi *= 0.25 * square * square * n_eps;
      }
      if (xi.norm() <= 1e-14 * std::max(1.0, n_eps)) continue;
      auto dec = sigma(lattice, iquad, xi);
      auto& list = per[static_cast<std::size_t>(J) * NX + I];
      for (const auto& [lv, w] : dec.decomposition) {
        auto key = std::make_pair(lv.a, lv.b);
        double target = w + carry[key];
        double k = std::max(0.0, std::round(target));
        carry[key] = target - k;
        for (int c = 0; c < static_cast<int>(k); ++c) list.push_back(lv.v);
      }
      max_count = std::max(max_count, list.size());
    }

  int s = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(max_count)) - 1e-12)));
  m.cell = square / s;
  m.nx = NX * s;
  m.ny = NY * s;
  m.cell_atom.assign(static_cast<std::size_t>(m.nx) * m.ny, -1);
  for (int J = 0; J < NY; ++J)
    for (int I = 0; I < NX; ++I) {
      const auto& list = per[static_cast<std::size_t>(J) * NX + I];
      std::size_t M = list.size();
      for (std::size_t j = 0; j < M; ++j) {
        std::size_t slot = j * static_cast<std::size_t>(s * s) / M;
        int sx = static_cast<int>(slot % s), sy = static_cast<int>(slot / s);
        int cx = I * s + sx, cy = J * s + sy;
        Atom at;
        at.position = omega.lo + m.cell * Vec2(cx + 0.5, cy + 0.5);
        at.burgers = list[j];
        m.cell_atom[static_cast<std::size_t>(cy) * m.nx + cx] = static_cast<int>(m.atoms.size());
        m.atoms.push_back(at);
      }
    }
  finish_measure(m);
  return m;
}

AssembledBody build_implant(const DislocationMeasure& meas, const AssemblyResolution& res) {
  AssembledBody out;
  out.measure = meas;
  out.resolution = res;
  const double a = meas.smear_radius;
  const double eps = meas.eps;
  const auto& atoms = meas.atoms;

  CellGridSpec spec;
  spec.origin = meas.origin;
  spec.cell = meas.cell;
  spec.nx = meas.nx;
  spec.ny = meas.ny;
  spec.per_side = res.per_side;
  spec.cells_per_decade = res.cells_per_decade;
  spec.core_rings = res.core_rings;
  spec.cell_site = meas.cell_atom;
  for (const auto& at : atoms) {
    SiteSpec sp;
    sp.center = at.position;
    sp.hole_radius = res.core_factor * eps * at.burgers.norm();
    sp.fill_core = true;
    spec.sites.push_back(sp);
  }
  if (!atoms.empty()) spec.extra_radii = {a * (1.0 - kBand), a};
  out.full_mesh = cell_grid_mesh(spec);
  const Mesh& M = out.full_mesh;
  const std::size_t nt = M.num_triangles(), nv = M.num_vertices();
  Edges E = build_edges(M);
  const std::size_t ne = E.vertices.size();

  // exact part alpha - beta (and the mollification correction) per edge
  std::vector<Vec2> ab(ne, Vec2::Zero()), al(ne, Vec2::Zero()), be(ne, Vec2::Zero());
  for (std::size_t e = 0; e < ne; ++e) {
    int t0 = E.triangles[e][0], t1 = E.triangles[e][1];
    bool c0 = M.core[t0] != 0, c1 = t1 >= 0 && M.core[t1] != 0;
    if (c0 && (t1 < 0 || c1)) continue;
    int sites[2] = {M.site[t0], t1 >= 0 ? M.site[t1] : -1};
    for (int k = 0; k < 2; ++k) {
      int si = sites[k];
      if (si < 0 || (k == 1 && si == sites[0])) continue;
      const Atom& at = atoms[si];
      Vec2 A = M.vertices[E.vertices[e][0]] - at.position, B = M.vertices[E.vertices[e][1]] - at.position;
      EdgeForm f = edge_forms(A, B, a, res.mollify);
      Vec2 bv = eps * at.burgers;
      al[e] += bv * f.alpha;
      be[e] += bv * f.beta;
      ab[e] += bv * (f.alpha - f.beta + f.moll);
    }
  }

  // smeared source per element
  out.source.assign(nt, Vec2::Zero());
  for (std::size_t t = 0; t < nt; ++t) {
    if (M.core[t]) {
      out.source[t] = eps * atoms[M.site[t]].burgers * M.area(t) / (kPi * a * a);
    } else if (M.site[t] >= 0) {
      Vec2 s = Vec2::Zero();
      for (int k = 0; k < 3; ++k) s += E.sign[t][k] * ab[E.of_triangle[t][k]];
      out.source[t] = -s;
    }
  }

  // Poisson potential per Burgers component
  out.potential.assign(nv, Vec2::Zero());
  std::vector<Vec2> gam(ne, Vec2::Zero());
  if (!atoms.empty()) {
    SpMat K = assemble_laplacian(M);
    auto fixed = boundary_vertex_mask(M, E);
    for (int c = 0; c < 2; ++c) {
      Eigen::VectorXd load = Eigen::VectorXd::Zero(nv);
      for (std::size_t t = 0; t < nt; ++t)
        for (int k = 0; k < 3; ++k) load(M.triangles[t][k]) -= out.source[t](c) / 3.0;
      CgStats st;
      Eigen::VectorXd phi = solve_dirichlet(K, load, fixed, res.poisson_tol, &st);
      out.poisson_iterations = std::max(out.poisson_iterations, st.iterations);
      for (std::size_t i = 0; i < nv; ++i) out.potential[i](c) = phi(i);
      out.poisson_energy += phi.dot(K * phi);
    }
    // rotated gradient averaged onto edges
    std::vector<Mat2> gT(nt);
    for (std::size_t t = 0; t < nt; ++t) {
      Mat2 G = triangle_gradient(M, t, out.potential);
      Mat2 r;
      r << -G(0, 1), G(0, 0), -G(1, 1), G(1, 0);
      gT[t] = r;
    }
    for (std::size_t e = 0; e < ne; ++e) {
      Vec2 d = M.vertices[E.vertices[e][1]] - M.vertices[E.vertices[e][0]];
      int t0 = E.triangles[e][0], t1 = E.triangles[e][1];
      gam[e] = t1 >= 0 ? Vec2(0.5 * (gT[t0] + gT[t1]) * d) : Vec2(gT[t0] * d);
    }
    // least-squares correction so that d(gamma) equals the source exactly
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(4 * ne);
    std::vector<double> w(ne);
    for (std::size_t e = 0; e < ne; ++e) {
      Vec2 d = M.vertices[E.vertices[e][1]] - M.vertices[E.vertices[e][0]];
      w[e] = d.squaredNorm();
    }
    // sign of edge e within triangle t
    auto sign_in = [&](int t, std::size_t e) {
      for (int k = 0; k < 3; ++k)
        if (static_cast<std::size_t>(E.of_triangle[t][k]) == e) return E.sign[t][k];
      return 0;
    };
    std::vector<std::array<int, 2>> esign(ne);
    for (std::size_t e = 0; e < ne; ++e) {
      int t0 = E.triangles[e][0], t1 = E.triangles[e][1];
      esign[e] = {sign_in(t0, e), t1 >= 0 ? sign_in(t1, e) : 0};
      trip.emplace_back(t0, t0, w[e]);
      if (t1 >= 0) {
        trip.emplace_back(t1, t1, w[e]);
        trip.emplace_back(t0, t1, esign[e][0] * esign[e][1] * w[e]);
        trip.emplace_back(t1, t0, esign[e][0] * esign[e][1] * w[e]);
      }
    }
    SpMat A(nt, nt);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
    cg.setTolerance(1e-14);
    cg.setMaxIterations(200000);
    cg.compute(A);
    for (int c = 0; c < 2; ++c) {
      Eigen::VectorXd r(nt);
      for (std::size_t t = 0; t < nt; ++t) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += E.sign[t][k] * gam[E.of_triangle[t][k]](c);
        r(t) = out.source[t](c) - s;
      }
      if (r.norm() == 0.0) continue;
      Eigen::VectorXd lam = cg.solve(r);
      if (!lam.allFinite()) throw Error(ErrorKind::SolverFailure, "closedness correction failed");
      out.correction_iterations = std::max(out.correction_iterations, static_cast<int>(cg.iterations()));
      for (std::size_t e = 0; e < ne; ++e) {
        int t0 = E.triangles[e][0], t1 = E.triangles[e][1];
        double dl = esign[e][0] * lam(t0) + (t1 >= 0 ? esign[e][1] * lam(t1) : 0.0);
        gam[e](c) += w[e] * dl;
      }
    }
  }

  // element implants on the full mesh
  auto perturb = [&](std::size_t t, const std::vector<Vec2>& form) {
    auto val = [&](int k) { return Vec2(E.sign[t][k] * form[E.of_triangle[t][k]]); };
    Vec2 d01 = val(0), d02 = -val(2);
    if (d01.isZero(0.0) && d02.isZero(0.0)) return Mat2(Mat2::Zero());
    return element_from_edges(M, t, d01, d02);
  };
  std::vector<Vec2> total(ne);
  for (std::size_t e = 0; e < ne; ++e) total[e] = ab[e] + gam[e];

  std::vector<std::size_t> keep;
  for (std::size_t t = 0; t < nt; ++t)
    if (!M.core[t]) keep.push_back(t);
  out.body.mesh = extract_triangles(M, [&](std::size_t t) { return M.core[t] == 0; });
  out.body_to_full.assign(keep.begin(), keep.end());
  std::size_t nb = keep.size();
  out.body.Q.resize(nb);
  out.alpha.resize(nb);
  out.beta.resize(nb);
  out.gamma.resize(nb);
  out.min_det = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nb; ++i) {
    std::size_t t = keep[i];
    out.body.Q[i] = Mat2::Identity() + perturb(t, total);
    out.alpha[i] = perturb(t, al);
    out.beta[i] = perturb(t, be);
    out.gamma[i] = perturb(t, gam);
    double d = out.body.Q[i].determinant();
    if (d < out.min_det) {
      out.min_det = d;
      out.min_det_at = M.centroid(t);
    }
    out.alpha_sup = std::max(out.alpha_sup, op_norm(out.alpha[i]));
    out.beta_sup = std::max(out.beta_sup, op_norm(out.beta[i]));
    out.gamma_sup = std::max(out.gamma_sup, op_norm(out.gamma[i]));
    // closedness of the full cochain
    double num = 0.0, den = 0.0;
    Vec2 s = Vec2::Zero();
    for (int k = 0; k < 3; ++k) {
      int e = E.of_triangle[t][k];
      Vec2 q = M.vertices[E.vertices[e][1]] - M.vertices[E.vertices[e][0]] + total[e];
      s += E.sign[t][k] * q;
      den += q.norm();
    }
    num = s.norm();
    out.max_closedness = std::max(out.max_closedness, num / den);
  }
  if (!(out.min_det > 0.0))
    throw Error(ErrorKind::ConstructionFailure, "implant degenerate: min det " + std::to_string(out.min_det) +
                                                    " at (" + std::to_string(out.min_det_at.x()) + ", " +
                                                    std::to_string(out.min_det_at.y()) + ")");
  out.body.region.assign(nb, 0);
  out.body.region_names = {"body"};
  out.body.finalize();

  // per-core circulation
  std::unordered_map<std::uint64_t, int> lookup;
  lookup.reserve(2 * ne);
  for (std::size_t e = 0; e < ne; ++e) lookup[edge_key(E.vertices[e][0], E.vertices[e][1])] = static_cast<int>(e);
  auto directed = [&](int u, int v) {
    int e = lookup.at(edge_key(u, v));
    Vec2 q = M.vertices[E.vertices[e][1]] - M.vertices[E.vertices[e][0]] + total[e];
    return E.vertices[e][0] == u ? q : Vec2(-q);
  };
  for (std::size_t h = 0; h < M.hole_loops.size(); ++h) {
    const auto& loop = M.hole_loops[h];
    Vec2 c = Vec2::Zero();
    for (std::size_t j = 0; j < loop.size(); ++j) c += directed(loop[j], loop[(j + 1) % loop.size()]);
    Vec2 bv = eps * atoms[h].burgers;
    out.max_circulation_error = std::max(out.max_circulation_error, (c - bv).norm() / bv.norm());
  }
  out.core_loop_values.resize(out.body.mesh.hole_loops.size());
  for (std::size_t h = 0; h < M.hole_loops.size(); ++h) {
    const auto& loop = M.hole_loops[h];
    for (std::size_t j = 0; j < loop.size(); ++j)
      out.core_loop_values[h].push_back(directed(loop[j], loop[(j + 1) % loop.size()]));
  }

  // gamma over loops inside the smeared discs encloses its share of the source
  if (!atoms.empty()) {
    std::vector<char> in(nt, 0);
    std::vector<Vec2> loop_sum(atoms.size(), Vec2::Zero());
    std::vector<double> area(atoms.size(), 0.0);
    for (std::size_t t = 0; t < nt; ++t) {
      int si = M.site[t];
      if (si < 0) continue;
      if ((M.centroid(t) - atoms[si].position).norm() < 0.5 * a) {
        in[t] = 1;
        area[si] += M.area(t);
      }
    }
    for (std::size_t t = 0; t < nt; ++t) {
      if (!in[t]) continue;
      for (int k = 0; k < 3; ++k) {
        int e = E.of_triangle[t][k];
        int other = E.triangles[e][0] == static_cast<int>(t) ? E.triangles[e][1] : E.triangles[e][0];
        if (other >= 0 && in[other]) continue;
        loop_sum[M.site[t]] += E.sign[t][k] * gam[e];
      }
    }
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      Vec2 bv = eps * atoms[i].burgers;
      Vec2 expect = bv * area[i] / (kPi * a * a);
      out.max_gamma_loop_error = std::max(out.max_gamma_loop_error, (loop_sum[i] - expect).norm() / bv.norm());
    }
  }
  return out;
}

DeviationReport deviation_report(const AssembledBody& b) {
  DeviationReport r;
  const auto& m = b.measure;
  const auto& mesh = b.body.mesh;
  double bb = m.b(), a = m.smear_radius;
  double far_scale = a > 0.0 ? bb / (a * a) : 0.0;
  r.h2 = m.h_squared();
  for (std::size_t t = 0; t < b.body.size(); ++t) {
    Mat2 dev = b.body.Qinv[t] - Mat2::Identity();
    double d = op_norm(dev);
    r.integral += dev.squaredNorm() * b.body.volume[t];
    r.lip_dZ = std::max(r.lip_dZ, op_norm(b.body.Qinv[t]));
    r.lip_dZinv = std::max(r.lip_dZinv, op_norm(b.body.Q[t]));
    int si = mesh.site[t];
    double ri = si >= 0 ? (mesh.centroid(t) - m.atoms[si].position).norm() : std::numeric_limits<double>::infinity();
    if (si >= 0 && ri < a) {
      r.near_max = std::max(r.near_max, d);
      double ref = m.eps * m.atoms[si].burgers.norm() / ri + far_scale;
      r.near_ratio = std::max(r.near_ratio, d / ref);
    } else {
      r.far_max = std::max(r.far_max, d);
      if (far_scale > 0.0) r.far_ratio = std::max(r.far_ratio, d / far_scale);
    }
  }
  for (const auto& at : m.atoms) {
    double bv = m.eps * at.burgers.norm();
    r.integral_bound += bv * bv * std::log(a / bv);
  }
  r.integral_bound += b.poisson_energy;
  r.integral_over_h2 = r.h2 > 0.0 ? r.integral / r.h2 : 0.0;
  return r;
}

double torsion_functional(const AssembledBody& b, const VectorField& psi) {
  const auto& mesh = b.body.mesh;
  double s = 0.0;
  for (std::size_t h = 0; h < mesh.hole_loops.size(); ++h) {
    const auto& loop = mesh.hole_loops[h];
    for (std::size_t j = 0; j < loop.size(); ++j) {
      const Vec2& x0 = mesh.vertices[loop[j]];
      const Vec2& x1 = mesh.vertices[loop[(j + 1) % loop.size()]];
      Vec2 avg = (psi(x0) + 4.0 * psi(0.5 * (x0 + x1)) + psi(x1)) / 6.0;
      s += avg.dot(b.core_loop_values[h][j]);
    }
  }
  return s;
}

double smeared_pairing(const AssembledBody& b, const VectorField& psi) {
  double s = 0.0;
  for (std::size_t t = 0; t < b.full_mesh.num_triangles(); ++t)
    if (!b.source[t].isZero(0.0)) s += psi(b.full_mesh.centroid(t)).dot(b.source[t]);
  return s;
}

double target_pairing(const TargetMeasure& mu, const Rect& omega, const VectorField& psi, int cells) {
  if (mu.atomic()) {
    double s = 0.0;
    for (const auto& a : mu.atoms) s += psi(a.position).dot(a.burgers);
    return s;
  }
  if (!mu.density) return 0.0;
  double hx = omega.width() / cells, hy = omega.height() / cells, s = 0.0;
  for (int i = 0; i < cells; ++i)
    for (int j = 0; j < cells; ++j)
      for (int p = 0; p < 8; ++p)
        for (int q = 0; q < 8; ++q) {
          Vec2 x = omega.lo + Vec2(hx * (i + 0.5 * (1 + kGl8x[p])), hy * (j + 0.5 * (1 + kGl8x[q])));
          s += kGl8w[p] * kGl8w[q] * psi(x).dot(mu.density(x));
        }
  return s * 0.25 * hx * hy;
}

BurgersConvergence burgers_convergence_check(const std::vector<const AssembledBody*>& bodies,
                                             const TargetMeasure& mu, const std::vector<VectorField>& fields) {
  BurgersConvergence r;
  if (bodies.empty()) return r;
  const Rect& omega = bodies.front()->measure.domain;
  for (const auto* b : bodies) r.eps.push_back(b->measure.eps);
  for (const auto& psi : fields) {
    double target = target_pairing(mu, omega, psi);
    r.targets.push_back(target);
    double scale = std::abs(target) > 1e-12 ? std::abs(target) : 1.0;
    std::vector<double> g, gs;
    for (const auto* b : bodies) {
      double norm = b->measure.n_eps * b->measure.eps;
      g.push_back(std::abs(torsion_functional(*b, psi) / norm - target) / scale);
      gs.push_back(std::abs(smeared_pairing(*b, psi) / norm - target) / scale);
    }
    bool mono = true;
    for (std::size_t i = 1; i < g.size(); ++i)
      if (g[i] > g[i - 1]) mono = false;
    r.monotone.push_back(mono);
    r.final_max_gap = std::max(r.final_max_gap, g.back());
    r.gaps.push_back(g);
    r.smeared_gaps.push_back(gs);
  }
  return r;
}

std::vector<VectorField> standard_test_fields(const Rect& omega) {
  Rect o = omega;
  auto unit = [o](const Vec2& x) {
    return Vec2((x.x() - o.lo.x()) / o.width(), (x.y() - o.lo.y()) / o.height());
  };
  return {
      [unit](const Vec2& x) {
        Vec2 u = unit(x);
        return Vec2(std::sin(kPi * u.x()) * std::sin(kPi * u.y()), std::sin(kTwoPi * u.x()) * std::sin(kPi * u.y()));
      },
      [unit](const Vec2& x) {
        Vec2 u = unit(x);
        return Vec2(16.0 * u.x() * (1 - u.x()) * u.y() * (1 - u.y()), 0.0);
      },
      [unit](const Vec2& x) {
        Vec2 u = unit(x);
        double s = std::sin(kPi * u.x());
        return Vec2(s * s * std::sin(kPi * u.y()), u.x() * u.y() * (1 - u.x()) * (1 - u.y()));
      },
  };
}

}  // namespace dislo
