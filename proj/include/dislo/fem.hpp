#pragma once

#include "dislo/density.hpp"
#include "dislo/mesh.hpp"

#include <Eigen/Sparse>

#include <array>
#include <vector>

namespace dislo {

using SpMat = Eigen::SparseMatrix<double>;

/// Row-major vec of grad(u) B as a linear map of the six vertex displacements (a * 2 + i).
Eigen::Matrix<double, 4, 6> strain_operator(const Eigen::Matrix<double, 2, 3>& g, const Mat2& b);

/// P1 Laplacian stiffness.
SpMat assemble_laplacian(const Mesh& m);

std::vector<char> boundary_vertex_mask(const Mesh& m, const Edges& e);

struct CgStats {
  int iterations = 0;
  double residual = 0.0;
};

/// Solves K phi = load with phi = 0 where `fixed` is set; Jacobi-preconditioned CG.
Eigen::VectorXd solve_dirichlet(const SpMat& K, const Eigen::VectorXd& load, const std::vector<char>& fixed,
                                double tol, CgStats* stats = nullptr);

/**
 * @brief Stiffness of u -> sum_T w_T W(grad(u) B_T) |T| for a quadratic form W.
 * Missing B or w default to identity / one.
 */
SpMat assemble_elasticity(const Mesh& m, const QuadraticForm& w, const std::vector<Mat2>* right = nullptr,
                          const std::vector<double>* weight = nullptr);

/// Load -d/du sum_T w_T |T| W(P_T + grad(u) B_T) at u = 0 for a per-triangle eigenstrain P.
Eigen::VectorXd eigenstrain_load(const Mesh& m, const QuadraticForm& w, const std::vector<Mat2>& p,
                                 const std::vector<Mat2>* right = nullptr, const std::vector<double>* weight = nullptr);

/// Three displacement dofs that remove rigid motions: both components of the leftmost
/// vertex and the y component of the rightmost one.
std::array<int, 3> gauge_dofs(const Mesh& m);

/// Solves K u = f with the listed dofs held at zero (sparse LDL^T).
Eigen::VectorXd solve_with_fixed(const SpMat& K, const Eigen::VectorXd& f, const std::vector<int>& fixed,
                                 double* residual = nullptr);

/// Per-triangle differential of a vertex map.
Mat2 triangle_gradient(const Mesh& m, std::size_t t, const std::vector<Vec2>& f);

}  // namespace dislo
