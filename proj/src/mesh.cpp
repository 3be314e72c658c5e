#include "dislo/mesh.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>

namespace dislo {

Mat2 Mesh::edge_matrix(std::size_t t) const {
  const auto& tr = triangles[t];
  Mat2 e;
  e << vertices[tr[1]] - vertices[tr[0]], vertices[tr[2]] - vertices[tr[0]];
  return e;
}

double Mesh::area(std::size_t t) const { return 0.5 * edge_matrix(t).determinant(); }

Vec2 Mesh::centroid(std::size_t t) const {
  const auto& tr = triangles[t];
  return (vertices[tr[0]] + vertices[tr[1]] + vertices[tr[2]]) / 3.0;
}

Eigen::Matrix<double, 2, 3> Mesh::basis_gradients(std::size_t t) const {
  Mat2 eit = edge_matrix(t).inverse().transpose();
  Eigen::Matrix<double, 2, 3> g;
  g.col(1) = eit.col(0);
  g.col(2) = eit.col(1);
  g.col(0) = -(g.col(1) + g.col(2));
  return g;
}

Edges build_edges(const Mesh& m) {
  Edges e;
  std::map<std::pair<int, int>, int> index;
  e.of_triangle.resize(m.triangles.size());
  e.sign.resize(m.triangles.size());
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& tr = m.triangles[t];
    for (int k = 0; k < 3; ++k) {
      int a = tr[k], b = tr[(k + 1) % 3];
      auto key = std::minmax(a, b);
      auto it = index.find(key);
      int id;
      if (it == index.end()) {
        id = static_cast<int>(e.vertices.size());
        index.emplace(key, id);
        e.vertices.push_back({key.first, key.second});
        e.triangles.push_back({static_cast<int>(t), -1});
      } else {
        id = it->second;
        e.triangles[id][1] = static_cast<int>(t);
      }
      e.of_triangle[t][k] = id;
      e.sign[t][k] = (a < b) ? 1 : -1;
    }
  }
  return e;
}

namespace {

void add_oriented(Mesh& m, int a, int b, int c) {
  Vec2 e1 = m.vertices[b] - m.vertices[a], e2 = m.vertices[c] - m.vertices[a];
  if (cross(e1, e2) < 0) std::swap(b, c);
  m.triangles.push_back({a, b, c});
}

// Quads between two vertex rings of equal length n (periodic).
void stitch_rings(Mesh& m, const std::vector<int>& in, const std::vector<int>& out, int parity) {
  const int n = static_cast<int>(in.size());
  for (int j = 0; j < n; ++j) {
    int a = in[j], b = in[(j + 1) % n], c = out[(j + 1) % n], d = out[j];
    if ((j + parity) % 2 == 0) {
      add_oriented(m, a, d, c);
      add_oriented(m, a, c, b);
    } else {
      add_oriented(m, a, d, b);
      add_oriented(m, d, c, b);
    }
  }
}

std::vector<double> graded_radii(double r_in, double r_out, int cpd, const std::vector<double>& extra) {
  int nr = std::max(2, static_cast<int>(std::ceil(std::log10(r_out / r_in) * cpd - 1e-9)));
  std::vector<double> r(nr + 1);
  for (int i = 0; i <= nr; ++i) r[i] = r_in * std::pow(r_out / r_in, static_cast<double>(i) / nr);
  r.front() = r_in;
  r.back() = r_out;
  for (double x : extra) {
    if (!(x > r_in && x < r_out)) continue;
    // move the nearest interior radius onto x
    std::size_t best = 1;
    for (std::size_t i = 1; i + 1 < r.size(); ++i)
      if (std::abs(std::log(r[i] / x)) < std::abs(std::log(r[best] / x))) best = i;
    if (r.size() > 2) r[best] = x;
  }
  std::sort(r.begin(), r.end());
  r.erase(std::unique(r.begin(), r.end()), r.end());
  return r;
}

}  // namespace

Mesh annulus_mesh(const Vec2& center, double r_in, double r_out, int cells_per_decade, int n_theta,
                 double angle0) {
  if (!(r_in > 0.0 && r_out > r_in) || n_theta < 3 || cells_per_decade < 1)
    throw Error(ErrorKind::InvalidInput, "bad annulus mesh parameters");
  Mesh m;
  auto radii = graded_radii(r_in, r_out, cells_per_decade, {});
  std::vector<std::vector<int>> rings;
  for (double r : radii) {
    std::vector<int> ring(n_theta);
    for (int j = 0; j < n_theta; ++j) {
      double t = angle0 + kTwoPi * j / n_theta;
      ring[j] = static_cast<int>(m.vertices.size());
      m.vertices.push_back(center + r * Vec2(std::cos(t), std::sin(t)));
    }
    rings.push_back(std::move(ring));
  }
  for (std::size_t i = 0; i + 1 < rings.size(); ++i) stitch_rings(m, rings[i], rings[i + 1], static_cast<int>(i));
  m.core.assign(m.triangles.size(), 0);
  m.site.assign(m.triangles.size(), 0);
  m.hole_loops.push_back(rings.front());
  m.hole_centers.push_back(center);
  return m;
}

Mesh cell_grid_mesh(const CellGridSpec& s) {
  if (s.nx < 1 || s.ny < 1 || s.per_side < 2 || static_cast<int>(s.cell_site.size()) != s.nx * s.ny)
    throw Error(ErrorKind::InvalidInput, "bad cell grid specification");
  Mesh m;
  const int k = s.per_side;
  const int NI = s.nx * k + 1, NJ = s.ny * k + 1;
  const double h = s.cell / k;
  std::vector<int> lattice(static_cast<std::size_t>(NI) * NJ, -1);
  auto lat = [&](int I, int J) {
    int& id = lattice[static_cast<std::size_t>(I) * NJ + J];
    if (id < 0) {
      id = static_cast<int>(m.vertices.size());
      m.vertices.push_back(s.origin + Vec2(I * h, J * h));
    }
    return id;
  };
  auto push_tri_tags = [&](std::size_t from, int core, int site) {
    m.core.resize(m.triangles.size(), core);
    m.site.resize(m.triangles.size(), site);
    for (std::size_t t = from; t < m.triangles.size(); ++t) {
      m.core[t] = core;
      m.site[t] = site;
    }
  };

  for (int cy = 0; cy < s.ny; ++cy)
    for (int cx = 0; cx < s.nx; ++cx) {
      const int site = s.cell_site[static_cast<std::size_t>(cy) * s.nx + cx];
      const int I0 = cx * k, J0 = cy * k;
      if (site < 0) {
        std::size_t from = m.triangles.size();
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j) {
            int a = lat(I0 + i, J0 + j), b = lat(I0 + i + 1, J0 + j), c = lat(I0 + i + 1, J0 + j + 1),
                d = lat(I0 + i, J0 + j + 1);
            if ((I0 + i + J0 + j) % 2 == 0) {
              add_oriented(m, a, b, c);
              add_oriented(m, a, c, d);
            } else {
              add_oriented(m, a, b, d);
              add_oriented(m, b, c, d);
            }
          }
        push_tri_tags(from, 0, -1);
        continue;
      }
      const SiteSpec& sp = s.sites.at(site);
      const int n = 4 * k;
      const double rho0 = s.ring_fraction * s.cell;
      if (!(sp.hole_radius > 0.0 && sp.hole_radius < rho0))
        throw Error(ErrorKind::Resolution, "hole radius must lie below the polar ring radius");
      // square boundary, ccw from the lower-left corner
      std::vector<int> square(n);
      for (int j = 0; j < n; ++j) {
        int side = j / k, t = j % k;
        int I = I0, J = J0;
        switch (side) {
          case 0: I = I0 + t; J = J0; break;
          case 1: I = I0 + k; J = J0 + t; break;
          case 2: I = I0 + k - t; J = J0 + k; break;
          default: I = I0; J = J0 + k - t; break;
        }
        square[j] = lat(I, J);
      }
      auto ring_at = [&](double r) {
        std::vector<int> ring(n);
        for (int j = 0; j < n; ++j) {
          double t = -0.75 * kPi + kTwoPi * j / n;
          ring[j] = static_cast<int>(m.vertices.size());
          m.vertices.push_back(sp.center + r * Vec2(std::cos(t), std::sin(t)));
        }
        return ring;
      };
      std::size_t from = m.triangles.size();
      // core fill
      std::vector<int> prev;
      if (sp.fill_core) {
        int c = static_cast<int>(m.vertices.size());
        m.vertices.push_back(sp.center);
        std::vector<int> inner = ring_at(sp.hole_radius / (s.core_rings + 1));
        for (int j = 0; j < n; ++j) add_oriented(m, c, inner[j], inner[(j + 1) % n]);
        for (int q = 2; q <= s.core_rings; ++q) {
          std::vector<int> nxt = ring_at(sp.hole_radius * q / (s.core_rings + 1));
          stitch_rings(m, inner, nxt, q);
          inner = std::move(nxt);
        }
        prev = std::move(inner);
      }
      std::vector<int> hole = ring_at(sp.hole_radius);
      if (sp.fill_core) stitch_rings(m, prev, hole, 0);
      push_tri_tags(from, 1, site);
      from = m.triangles.size();
      m.hole_loops.push_back(hole);
      m.hole_centers.push_back(sp.center);
      auto radii = graded_radii(sp.hole_radius, rho0, s.cells_per_decade, s.extra_radii);
      std::vector<int> cur = hole;
      for (std::size_t i = 1; i < radii.size(); ++i) {
        std::vector<int> nxt = ring_at(radii[i]);
        stitch_rings(m, cur, nxt, static_cast<int>(i));
        cur = std::move(nxt);
      }
      // blend the outer circle to the square boundary
      std::vector<Vec2> circ(n);
      for (int j = 0; j < n; ++j) circ[j] = m.vertices[cur[j]];
      int layers = std::max(2, static_cast<int>(std::ceil((0.5 - s.ring_fraction) * k * 1.5)));
      for (int l = 1; l <= layers; ++l) {
        std::vector<int> nxt(n);
        if (l == layers) {
          nxt = square;
        } else {
          double t = static_cast<double>(l) / layers;
          for (int j = 0; j < n; ++j) {
            nxt[j] = static_cast<int>(m.vertices.size());
            m.vertices.push_back((1 - t) * circ[j] + t * m.vertices[square[j]]);
          }
        }
        stitch_rings(m, cur, nxt, static_cast<int>(radii.size() + l));
        cur = std::move(nxt);
      }
      push_tri_tags(from, 0, site);
    }
  return m;
}

Mesh extract_triangles(const Mesh& m, const std::function<bool(std::size_t)>& keep) {
  Mesh out;
  std::vector<int> map(m.vertices.size(), -1);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    if (!keep(t)) continue;
    std::array<int, 3> tr;
    for (int k = 0; k < 3; ++k) {
      int v = m.triangles[t][k];
      if (map[v] < 0) {
        map[v] = static_cast<int>(out.vertices.size());
        out.vertices.push_back(m.vertices[v]);
      }
      tr[k] = map[v];
    }
    out.triangles.push_back(tr);
    out.core.push_back(m.core.empty() ? 0 : m.core[t]);
    out.site.push_back(m.site.empty() ? -1 : m.site[t]);
  }
  for (std::size_t h = 0; h < m.hole_loops.size(); ++h) {
    std::vector<int> loop;
    for (int v : m.hole_loops[h])
      if (map[v] >= 0) loop.push_back(map[v]);
    out.hole_loops.push_back(loop);
    out.hole_centers.push_back(m.hole_centers[h]);
  }
  return out;
}

std::vector<int> ring_vertices(const Mesh& m, const Vec2& center, double radius, double tol) {
  std::vector<std::pair<double, int>> found;
  for (std::size_t v = 0; v < m.vertices.size(); ++v) {
    Vec2 d = m.vertices[v] - center;
    if (std::abs(d.norm() - radius) <= tol) found.push_back({std::atan2(d.y(), d.x()), static_cast<int>(v)});
  }
  std::sort(found.begin(), found.end());
  std::vector<int> out;
  for (auto& f : found) out.push_back(f.second);
  return out;
}

}  // namespace dislo
