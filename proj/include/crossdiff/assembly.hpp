#pragma once

#include <cmath>
#include <functional>
#include <optional>

#include "crossdiff/fe_space.hpp"
#include "crossdiff/models.hpp"

namespace crossdiff {

enum class Formulation { Primal, MixedImplicitCurrent };

// Weak Dirichlet data imposed by Nitsche terms on the spatial boundary.
struct DirichletConfig {
  double eta{1.0};
  bool left{true};
  bool right{true};
  SpaceTimeFn data;  // rho_D on the boundary lines
};

struct SchemeConfig {
  double epsilon{0.0};
  int quadrature_order{-1};  // -1: 2p+2
  Formulation formulation{Formulation::Primal};
  std::optional<DirichletConfig> dirichlet;
  // Prescribed boundary flux A(rho) d_x rho . nu on spatial facets without
  // Dirichlet data; empty means the homogeneous (closed-system) condition.
  SpaceTimeFn neumann_flux;
};

struct ResidualContext {
  const FeSpace* space{nullptr};          // order p, the entropy variable w
  const FeSpace* current_space{nullptr};  // order q, mixed formulation only
  const CrossDiffusionSystem* system{nullptr};
  std::function<StateVec(double x)> rho0;
  SchemeConfig config;

  int volume_quadrature_degree() const {
    if (config.quadrature_order > 0) return config.quadrature_order;
    int p = space->order;
    if (current_space) p = std::max(p, current_space->order);
    return 2 * p + 2;
  }
  int w_dofs() const { return space->total_dofs(); }
  int total_dofs() const {
    return w_dofs() + (config.formulation == Formulation::MixedImplicitCurrent
                           ? current_space->total_dofs()
                           : 0);
  }
  bool closed_system() const { return !config.dirichlet.has_value() && !neumann_present(); }
  bool neumann_present() const { return static_cast<bool>(config.neumann_flux); }
};

// Gram matrix of (f,g) = sum_i int f_i g_i + d_x f_i d_x g_i + eps d_t f_i d_t g_i.
SparseMatrix h1_eps_product_matrix(const FeSpace& space, double epsilon);

Vector residual_primal(const ResidualContext& ctx, const Vector& w);
SparseMatrix jacobian_primal(const ResidualContext& ctx, const Vector& w);
void assemble_primal(const ResidualContext& ctx, const Vector& w, Vector* residual,
                     SparseMatrix* jacobian);

// Mixed implicit-current scheme; unknown layout [w; J].
Vector residual_mixed(const ResidualContext& ctx, const Vector& wj);
SparseMatrix jacobian_mixed(const ResidualContext& ctx, const Vector& wj);
void assemble_mixed(const ResidualContext& ctx, const Vector& wj, Vector* residual,
                    SparseMatrix* jacobian);

void assemble(const ResidualContext& ctx, const Vector& unknowns, Vector* residual,
              SparseMatrix* jacobian);

struct EntropyLedger {
  bool applicable{false};
  double lhs{0.0};
  double rhs{0.0};
  double regularization{0.0};     // eps ||w||^2_{H1_eps}
  double final_entropy{0.0};      // int s(u(w(T)))
  double dissipation{0.0};        // gamma int |d_x u|^2  (mixed: gamma int |M(u) J|^2)
  double initial_entropy{0.0};    // int s(rho_0)
  double reaction_bound{0.0};     // C_f |Omega| T
};

EntropyLedger entropy_ledger(const ResidualContext& ctx, const Vector& unknowns);

// lhs <= rhs up to the relative slack plus an absolute floor covering
// quadrature rounding of near-equilibrium states (both sides ~ 1e-18).
inline bool ledger_satisfied(const EntropyLedger& ledger, double rel_slack = 1e-8) {
  return ledger.lhs <= ledger.rhs + rel_slack * std::abs(ledger.rhs) + 1e-12;
}

struct BoundednessAudit {
  long total{0};
  long violations{0};
};

// Checks u(w_h) at every volume quadrature point against the strict interior
// of the image of u.
BoundednessAudit audit_boundedness(const ResidualContext& ctx, const Vector& unknowns);

}  // namespace crossdiff
