#pragma once

// P1 finite elements for -div(D grad u) = r on (0,2)^2 with u = 0 on the
// boundary, D = diag(D11, D22),
//   D11 = 13 + mu sin(2 pi x / z1) + 0.5 z2,
//   D22 = 13 + mu sin(2 pi y / z1) + 0.5 z2,
//   r   = exp(-(x-1)^2 - (y-1)^2).

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <array>
#include <functional>
#include <memory>
#include <mutex>
#include <ostream>
#include <vector>

namespace rbcv::fem {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct TriMesh {
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;  ///< counter-clockwise
  std::vector<int> boundary_vertices;         ///< sorted ascending
  std::vector<bool> is_boundary;              ///< per vertex
  int qoi_triangle = 0;

  double area(int t) const;
  Point centroid(int t) const;
};

/// Structured mesh of (0,2)^2 with n cells per side; each cell split by its
/// SW-NE diagonal. The QoI triangle is the lower triangle of the cell whose
/// centroid is nearest to (0.5, 0.5) (first in row-major order on ties).
TriMesh build_mesh(int n_per_side);

struct Tensor2 {
  double d11 = 0.0;
  double d22 = 0.0;
};

inline constexpr double kDefaultEllipticityFloor = 1e-6;

/// Diagonal diffusion tensor at (x, y). Throws DegenerateCoefficientError when
/// min(D11, D22) <= floor and DomainError when z1 == 0.
Tensor2 diffusion_tensor(double mu, std::array<double, 2> z, double x, double y,
                         double floor = kDefaultEllipticityFloor);

double source(double x, double y);

using TensorField = std::function<Tensor2(double x, double y)>;

/// Full (all-vertex) stiffness with centroid quadrature of the tensor field.
Eigen::SparseMatrix<double> assemble_stiffness(const TriMesh& mesh, const TensorField& tensor);

/// Full load vector with centroid quadrature of the source.
Eigen::VectorXd assemble_load(const TriMesh& mesh);

struct SparseSystem {
  Eigen::SparseMatrix<double> matrix;  ///< interior x interior
  Eigen::VectorXd rhs;
  std::vector<int> interior;           ///< interior unknown -> mesh vertex
  std::size_t vertex_count = 0;
};

/// Restricts a full system to interior vertices (homogeneous Dirichlet).
SparseSystem eliminate_dirichlet(const TriMesh& mesh, const Eigen::SparseMatrix<double>& full,
                                 const Eigen::VectorXd& full_rhs);

SparseSystem assemble(const TriMesh& mesh, double mu, std::array<double, 2> z,
                      double floor = kDefaultEllipticityFloor);

struct NodalField {
  std::vector<double> values;  ///< one per mesh vertex
};

/// Sparse Cholesky solve; throws NumericalError on factorisation failure or
/// when the residual exceeds 1e-10 * ||rhs||.
NodalField solve_dirichlet(const SparseSystem& system);

/// Average of u over the QoI triangle (exact for P1 fields).
double qoi_average(const NodalField& field, const TriMesh& mesh);

/// Shared, immutable FEM setup for the heat2d family. The sparsity pattern,
/// element gradients, load vector and symbolic factorisation are built once;
/// each solve only refills the stiffness values.
class FemContext {
 public:
  explicit FemContext(int n_per_side, double floor = kDefaultEllipticityFloor);

  TriMesh mesh;
  double ellipticity_floor = kDefaultEllipticityFloor;

  double quantity_of_interest(double mu, std::array<double, 2> z) const;
  NodalField solve(double mu, std::array<double, 2> z) const;
  /// Interior stiffness matrix for (mu, z) on the precomputed pattern.
  SparseSystem system(double mu, std::array<double, 2> z) const;

 private:
  struct Element {
    std::array<double, 9> kxx{};  ///< area * dphi_a/dx * dphi_b/dx
    std::array<double, 9> kyy{};
    std::array<int, 9> slot{};    ///< index into the value array, -1 on the boundary
    int cx = 0;                   ///< index of the centroid x in coords_
    int cy = 0;
  };

  std::vector<double> coords_;  ///< distinct centroid coordinates
  std::vector<Element> elements_;
  Eigen::SparseMatrix<double> pattern_;
  Eigen::VectorXd rhs_;
  std::vector<int> interior_;
  using Solver = Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>;
  /// Solvers with the symbolic analysis done, reused across calls and threads.
  mutable std::vector<std::unique_ptr<Solver>> pool_;
  mutable std::mutex pool_mutex_;
};

void write_mesh_csv(const TriMesh& mesh, std::ostream& vertices, std::ostream& triangles);

}  // namespace rbcv::fem
