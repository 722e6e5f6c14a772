#include "rbcv/fem2d.hpp"

#include "rbcv/error.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace rbcv::fem {

double TriMesh::area(int t) const {
  const auto& tri = triangles[static_cast<std::size_t>(t)];
  const Point& a = vertices[static_cast<std::size_t>(tri[0])];
  const Point& b = vertices[static_cast<std::size_t>(tri[1])];
  const Point& c = vertices[static_cast<std::size_t>(tri[2])];
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

Point TriMesh::centroid(int t) const {
  const auto& tri = triangles[static_cast<std::size_t>(t)];
  Point out;
  for (int v : tri) {
    out.x += vertices[static_cast<std::size_t>(v)].x;
    out.y += vertices[static_cast<std::size_t>(v)].y;
  }
  out.x /= 3.0;
  out.y /= 3.0;
  return out;
}

TriMesh build_mesh(int n) {
  if (n < 2) throw ConfigError("build_mesh: n_per_side must be >= 2");
  TriMesh mesh;
  const double h = 2.0 / n;
  const int side = n + 1;
  mesh.vertices.reserve(static_cast<std::size_t>(side * side));
  mesh.is_boundary.reserve(static_cast<std::size_t>(side * side));
  for (int j = 0; j < side; ++j) {
    for (int i = 0; i < side; ++i) {
      // i * h keeps grid coordinates exactly mirror-symmetric in x and y.
      mesh.vertices.push_back({i * h, j * h});
      const bool boundary = i == 0 || j == 0 || i == n || j == n;
      mesh.is_boundary.push_back(boundary);
      if (boundary) mesh.boundary_vertices.push_back(j * side + i);
    }
  }

  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v00 = j * side + i;
      const int v10 = v00 + 1;
      const int v01 = v00 + side;
      const int v11 = v01 + 1;
      const int lower = static_cast<int>(mesh.triangles.size());
      mesh.triangles.push_back({v00, v10, v11});
      mesh.triangles.push_back({v00, v11, v01});
      const double cx = (i + 0.5) * h - 0.5;
      const double cy = (j + 0.5) * h - 0.5;
      const double dist = cx * cx + cy * cy;
      if (dist < best) {
        best = dist;
        mesh.qoi_triangle = lower;
      }
    }
  }
  return mesh;
}

Tensor2 diffusion_tensor(double mu, std::array<double, 2> z, double x, double y, double floor) {
  if (z[0] == 0.0) throw DomainError("diffusion_tensor: z1 must be nonzero");
  const double two_pi = 2.0 * std::numbers::pi;
  const Tensor2 d{13.0 + mu * std::sin(two_pi * x / z[0]) + 0.5 * z[1],
                  13.0 + mu * std::sin(two_pi * y / z[0]) + 0.5 * z[1]};
  if (!(std::min(d.d11, d.d22) > floor)) {
    std::ostringstream os;
    os << "degenerate diffusion tensor at (x,y)=(" << x << "," << y << ") for mu=" << mu
       << ", z=(" << z[0] << "," << z[1] << "): D11=" << d.d11 << ", D22=" << d.d22;
    throw DegenerateCoefficientError(os.str(), mu, z[0], z[1], x, y);
  }
  return d;
}

double source(double x, double y) {
  return std::exp(-(x - 1.0) * (x - 1.0) - (y - 1.0) * (y - 1.0));
}

Eigen::SparseMatrix<double> assemble_stiffness(const TriMesh& mesh, const TensorField& tensor) {
  const auto nv = static_cast<Eigen::Index>(mesh.vertices.size());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(mesh.triangles.size() * 9);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = mesh.area(static_cast<int>(t));
    const Point c = mesh.centroid(static_cast<int>(t));
    const Tensor2 d = tensor(c.x, c.y);
    std::array<double, 3> gx{}, gy{};
    for (int k = 0; k < 3; ++k) {
      const Point& p1 = mesh.vertices[static_cast<std::size_t>(tri[(k + 1) % 3])];
      const Point& p2 = mesh.vertices[static_cast<std::size_t>(tri[(k + 2) % 3])];
      gx[k] = (p1.y - p2.y) / (2.0 * area);
      gy[k] = (p2.x - p1.x) / (2.0 * area);
    }
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const double v = area * (d.d11 * gx[a] * gx[b] + d.d22 * gy[a] * gy[b]);
        triplets.emplace_back(tri[a], tri[b], v);
      }
    }
  }
  Eigen::SparseMatrix<double> k(nv, nv);
  k.setFromTriplets(triplets.begin(), triplets.end());
  return k;
}

Eigen::VectorXd assemble_load(const TriMesh& mesh) {
  Eigen::VectorXd load = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.vertices.size()));
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const Point c = mesh.centroid(static_cast<int>(t));
    const double share = source(c.x, c.y) * mesh.area(static_cast<int>(t)) / 3.0;
    for (int v : mesh.triangles[t]) load[v] += share;
  }
  return load;
}

SparseSystem eliminate_dirichlet(const TriMesh& mesh, const Eigen::SparseMatrix<double>& full,
                                 const Eigen::VectorXd& full_rhs) {
  SparseSystem sys;
  sys.vertex_count = mesh.vertices.size();
  std::vector<int> unknown(mesh.vertices.size(), -1);
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (!mesh.is_boundary[v]) {
      unknown[v] = static_cast<int>(sys.interior.size());
      sys.interior.push_back(static_cast<int>(v));
    }
  }
  const auto ni = static_cast<Eigen::Index>(sys.interior.size());
  std::vector<Eigen::Triplet<double>> triplets;
  for (Eigen::Index col = 0; col < full.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(full, col); it; ++it) {
      const int r = unknown[static_cast<std::size_t>(it.row())];
      const int c = unknown[static_cast<std::size_t>(it.col())];
      if (r >= 0 && c >= 0) triplets.emplace_back(r, c, it.value());
    }
  }
  sys.matrix.resize(ni, ni);
  sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
  sys.rhs.resize(ni);
  for (Eigen::Index i = 0; i < ni; ++i) sys.rhs[i] = full_rhs[sys.interior[static_cast<std::size_t>(i)]];
  return sys;
}

SparseSystem assemble(const TriMesh& mesh, double mu, std::array<double, 2> z, double floor) {
  const auto tensor = [&](double x, double y) { return diffusion_tensor(mu, z, x, y, floor); };
  return eliminate_dirichlet(mesh, assemble_stiffness(mesh, tensor), assemble_load(mesh));
}

NodalField solve_dirichlet(const SparseSystem& system) {
  NodalField field;
  field.values.assign(system.vertex_count, 0.0);
  if (system.rhs.size() == 0) return field;

  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(system.matrix);
  if (llt.info() != Eigen::Success)
    throw NumericalError("solve_dirichlet: Cholesky factorisation failed (matrix not SPD)");
  const Eigen::VectorXd u = llt.solve(system.rhs);
  if (llt.info() != Eigen::Success) throw NumericalError("solve_dirichlet: triangular solve failed");

  const double rhs_norm = system.rhs.norm();
  const double residual = (system.matrix * u - system.rhs).norm();
  if (!(residual <= 1e-10 * rhs_norm) && rhs_norm > 0.0)
    throw NumericalError("solve_dirichlet: residual " + std::to_string(residual) +
                         " exceeds tolerance");
  for (std::size_t i = 0; i < system.interior.size(); ++i)
    field.values[static_cast<std::size_t>(system.interior[i])] = u[static_cast<Eigen::Index>(i)];
  return field;
}

double qoi_average(const NodalField& field, const TriMesh& mesh) {
  const auto& tri = mesh.triangles[static_cast<std::size_t>(mesh.qoi_triangle)];
  double sum = 0.0;
  for (int v : tri) sum += field.values[static_cast<std::size_t>(v)];
  return sum / 3.0;
}

FemContext::FemContext(int n_per_side, double floor)
    : mesh(build_mesh(n_per_side)), ellipticity_floor(floor) {
  const Eigen::SparseMatrix<double> ones = assemble_stiffness(mesh, [](double, double) {
    return Tensor2{1.0, 1.0};
  });
  SparseSystem base = eliminate_dirichlet(mesh, ones, assemble_load(mesh));
  pattern_ = std::move(base.matrix);
  pattern_.makeCompressed();
  rhs_ = std::move(base.rhs);
  interior_ = std::move(base.interior);

  std::vector<int> unknown(mesh.vertices.size(), -1);
  for (std::size_t i = 0; i < interior_.size(); ++i) unknown[static_cast<std::size_t>(interior_[i])] = static_cast<int>(i);
  const auto coord_index = [this](double v) {
    for (std::size_t i = 0; i < coords_.size(); ++i)
      if (coords_[i] == v) return static_cast<int>(i);
    coords_.push_back(v);
    return static_cast<int>(coords_.size() - 1);
  };
  elements_.resize(mesh.triangles.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = mesh.area(static_cast<int>(t));
    const Point c = mesh.centroid(static_cast<int>(t));
    Element& e = elements_[t];
    e.cx = coord_index(c.x);
    e.cy = coord_index(c.y);
    std::array<double, 3> gx{}, gy{};
    for (int k = 0; k < 3; ++k) {
      const Point& p1 = mesh.vertices[static_cast<std::size_t>(tri[(k + 1) % 3])];
      const Point& p2 = mesh.vertices[static_cast<std::size_t>(tri[(k + 2) % 3])];
      gx[k] = (p1.y - p2.y) / (2.0 * area);
      gy[k] = (p2.x - p1.x) / (2.0 * area);
    }
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const int k = 3 * a + b;
        e.kxx[k] = area * gx[a] * gx[b];
        e.kyy[k] = area * gy[a] * gy[b];
        const int r = unknown[static_cast<std::size_t>(tri[a])];
        const int col = unknown[static_cast<std::size_t>(tri[b])];
        e.slot[k] = -1;
        if (r < 0 || col < 0) continue;
        const auto* begin = pattern_.innerIndexPtr() + pattern_.outerIndexPtr()[col];
        const auto* end = pattern_.innerIndexPtr() + pattern_.outerIndexPtr()[col + 1];
        const auto* it = std::lower_bound(begin, end, r);
        e.slot[k] = static_cast<int>(it - pattern_.innerIndexPtr());
      }
    }
  }
}

SparseSystem FemContext::system(double mu, std::array<double, 2> z) const {
  if (z[0] == 0.0) throw DomainError("diffusion_tensor: z1 must be nonzero");
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> sines(coords_.size());
  for (std::size_t i = 0; i < coords_.size(); ++i) sines[i] = std::sin(two_pi * coords_[i] / z[0]);

  SparseSystem sys;
  sys.matrix = pattern_;
  sys.rhs = rhs_;
  sys.interior = interior_;
  sys.vertex_count = mesh.vertices.size();
  double* values = sys.matrix.valuePtr();
  std::fill(values, values + sys.matrix.nonZeros(), 0.0);
  const double shift = 13.0 + 0.5 * z[1];
  for (std::size_t t = 0; t < elements_.size(); ++t) {
    const Element& e = elements_[t];
    const double d11 = shift + mu * sines[static_cast<std::size_t>(e.cx)];
    const double d22 = shift + mu * sines[static_cast<std::size_t>(e.cy)];
    if (!(std::min(d11, d22) > ellipticity_floor)) {
      const Point c = mesh.centroid(static_cast<int>(t));
      diffusion_tensor(mu, z, c.x, c.y, ellipticity_floor);
    }
    for (int k = 0; k < 9; ++k)
      if (e.slot[k] >= 0) values[e.slot[k]] += d11 * e.kxx[k] + d22 * e.kyy[k];
  }
  return sys;
}

NodalField FemContext::solve(double mu, std::array<double, 2> z) const {
  const SparseSystem sys = system(mu, z);
  NodalField field;
  field.values.assign(sys.vertex_count, 0.0);
  if (sys.rhs.size() == 0) return field;
  std::unique_ptr<Solver> llt;
  {
    std::lock_guard lock(pool_mutex_);
    if (!pool_.empty()) {
      llt = std::move(pool_.back());
      pool_.pop_back();
    }
  }
  if (!llt) {
    llt = std::make_unique<Solver>();
    llt->analyzePattern(pattern_);
  }
  llt->factorize(sys.matrix);
  if (llt->info() != Eigen::Success)
    throw NumericalError("solve_dirichlet: Cholesky factorisation failed (matrix not SPD)");
  const Eigen::VectorXd u = llt->solve(sys.rhs);
  {
    std::lock_guard lock(pool_mutex_);
    pool_.push_back(std::move(llt));
  }
  const double rhs_norm = sys.rhs.norm();
  const double residual = (sys.matrix * u - sys.rhs).norm();
  if (!(residual <= 1e-10 * rhs_norm) && rhs_norm > 0.0)
    throw NumericalError("solve_dirichlet: residual " + std::to_string(residual) +
                         " exceeds tolerance");
  for (std::size_t i = 0; i < sys.interior.size(); ++i)
    field.values[static_cast<std::size_t>(sys.interior[i])] = u[static_cast<Eigen::Index>(i)];
  return field;
}

double FemContext::quantity_of_interest(double mu, std::array<double, 2> z) const {
  return qoi_average(solve(mu, z), mesh);
}

void write_mesh_csv(const TriMesh& mesh, std::ostream& vertices, std::ostream& triangles) {
  vertices.precision(17);
  vertices << "index,x,y,boundary\n";
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
    vertices << v << ',' << mesh.vertices[v].x << ',' << mesh.vertices[v].y << ','
             << (mesh.is_boundary[v] ? 1 : 0) << '\n';
  triangles << "index,v0,v1,v2,qoi\n";
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    triangles << t << ',' << tri[0] << ',' << tri[1] << ',' << tri[2] << ','
              << (static_cast<int>(t) == mesh.qoi_triangle ? 1 : 0) << '\n';
  }
}

}  // namespace rbcv::fem
