"""Stationary states: the exponential profile and its perturbed neighbours.

For constant kernels K = F = 2 the profile exp(-x / sqrt(rho)) balances
coagulation against fragmentation.  On the grid it leaves a small residual
that halves with every refinement; Newton removes it and returns the exact
stationary state of the discrete problem.  Perturbing the kernels moves that
state by an amount proportional to epsilon.

Run:  python demos/01_stationary_state.py
"""
import numpy as np

from coagfrag import (assemble, build_grid, builtin_kernel, closed_form_equilibrium,
                      detailed_balance_residual, equilibrium_moment_audit, find_equilibrium,
                      weighted_l1_norm)

rho = 1.0

print("residual of the sampled profile under refinement")
for n in (128, 256, 512, 1024):
    res = closed_form_equilibrium(build_grid(n, 25.0), rho).residual_l1
    print(f"  n={n:5d}  |C + F|_1 = {res:.3e}")

grid = build_grid(512, 25.0)
const = find_equilibrium(assemble(grid, builtin_kernel("constant", 0.0)), rho)
print(f"\nNewton on the constant kernels: {const.iterations} iterations, "
      f"residual {const.residual_l1:.1e}")

print("\nperturbed equilibria (smooth-product kernels)")
print("   eps    |Q_eps - Q_0|_{1,1}   ratio   balance defect   M0 <= bound   M2 <= bound")
for eps in (0.025, 0.05, 0.1, 0.2):
    spec = builtin_kernel("smooth-product", eps)
    res = find_equilibrium(assemble(grid, spec), rho)
    d = weighted_l1_norm(res.state - const.state, 1)
    audit = equilibrium_moment_audit(res, eps)
    bal = float(detailed_balance_residual(spec, res.state))
    print(f"  {eps:5.3f}   {d:.4e}          {d / eps:.4f}  {bal:.3e}       "
          f"{audit.moments[0]:.3f} <= {audit.bounds[0]:.3f}  "
          f"{audit.moments[2]:.3f} <= {audit.bounds[2]:.3f}")

x = grid.nodes
q = const.state.values
print(f"\nlog-slope of Q_0 between x=1 and x=10: "
      f"{np.polyfit(x[(x > 1) & (x < 10)], np.log(q[(x > 1) & (x < 10)]), 1)[0]:.6f}")
