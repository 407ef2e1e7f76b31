"""Viscous channel flow and a manufactured convergence study.

First solves the channel problem whose parabolic profile the quadratic
velocity space represents exactly, then runs a trigonometric manufactured
solution through a mesh sequence to confirm second-order accuracy of the
velocity gradients.
"""

import numpy as np

import shapederiv as sd
from shapederiv.fields import ConstantForce, LeftEdgeTraction, trig_manufactured

# Channel: walls top and bottom, traction (2, 0) pushing in from the left.
mesh = sd.unit_square_mesh(8, {"left", "right"})
system = sd.assemble(mesh, ConstantForce(value=(0.0, 0.0)), LeftEdgeTraction(value=(2.0, 0.0)))
solution = sd.solve_stokes(system)
space = system.space

u_full = space.expand_velocity(solution.u)
u_exact = np.zeros_like(u_full)
u_exact[0::2] = space.node_coords[:, 1] * (1.0 - space.node_coords[:, 1])
print(f"channel flow: max dof error vs y(1-y) profile = {np.abs(u_full - u_exact).max():.2e}")
print(f"pressure vs 2(1-x): {np.abs(solution.lam - 2 * (1 - mesh.vertices[:, 0])).max():.2e}")
print(f"energy = {sd.energy(system, solution):.12f} (closed form: -1/6)")
print(f"discrete inf-sup constant: {sd.inf_sup_constant(system):.4f}")

# Manufactured solution: velocity is the curl of a smooth bump, so it is
# divergence-free and vanishes on the whole boundary; force and traction
# follow by substitution.
print("\nmanufactured convergence (H1 velocity error):")
rows = sd.convergence_study(trig_manufactured(), [4, 8, 16, 32])
for row in rows:
    order = "   --" if row.order is None else f"{row.order:5.2f}"
    print(f"  n = {row.n:3d}   error = {row.h1_error:.4e}   order = {order}")
