# The error-representation identities behind the flux error bound.
#
# For any boundary data psi, the flux error pairs with psi exactly as a
# combination of interpolation errors and the discrete dual solution:
#
#   Nitsche:   (sigma - Sigma, psi)_G = a_h(u - pi u, phi) - m_psi(u - pi u)
#   multiplier: (lambda - lambda_h, psi)_G
#             = A_h(pi u - u, pi lambda - lambda; phi, theta)
#               + (psi, lambda - pi lambda)_G
#
# Both are algebraic identities of the discrete systems: the residual
# below is pure quadrature and solver noise.

from fluxfem import (
    NitscheConfig,
    P1Space,
    SaddleConfig,
    TraceDG0Space,
    assemble_nitsche,
    assemble_saddle,
    build_unit_square_mesh,
    error_representation_residual,
    lm_error_representation_residual,
    rademacher_boundary_field,
    solve_spd,
    solve_sym_indefinite,
    trig_problem,
)

problem = trig_problem()
cfg = NitscheConfig(beta=10.0)
scfg = SaddleConfig(alpha=10.0)

for n in (8, 16, 32):
    mesh = build_unit_square_mesh(n)
    space, trace = P1Space(mesh), TraceDG0Space(mesh)
    u = solve_spd(assemble_nitsche(space, cfg, problem.f, problem.g, volume_degree=6)).x
    saddle = assemble_saddle(space, trace, scfg, problem.f, problem.g, volume_degree=6)
    uu, lam = saddle.split(solve_sym_indefinite(saddle).x)
    worst_n = worst_l = 0.0
    for seed in range(5):
        psi = rademacher_boundary_field(mesh, seed)  # rough +-1 per facet
        worst_n = max(
            worst_n,
            error_representation_residual(problem, u, space, cfg, psi, volume_degree=6),
        )
        worst_l = max(
            worst_l,
            lm_error_representation_residual(
                problem, uu, lam, space, trace, scfg, psi, volume_degree=6
            ),
        )
    print(f"n={n:3d}: worst relative residual  nitsche {worst_n:.3e}  multiplier {worst_l:.3e}")
