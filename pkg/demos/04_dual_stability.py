# Stability of the discrete dual problem with L2 boundary data.
#
# Rough per-facet +-1 data psi drives the dual solve; the report
# measures the weighted gradient (Q1, weight max(0, dist - h)), the
# h-scaled gradient (Q2), the supremum of |phi| over offset contours
# (Q3), the domain norm (Q4), and for the multiplier method the scaled
# multiplier norm (Q5), all relative to |psi|^2.
#
# The summed ratio staying in a narrow band across levels witnesses the
# boundedness constant. Note two measured effects: Q4 decays under
# refinement (rough data has a vanishing harmonic extension), and the
# multiplier method needs its stabilization below 1/2 on this mesh
# family; at alpha = 10 the dual blows up erratically.

from fluxfem import dual_stability_report

LEVELS = [8, 16, 32, 64]

for method, alpha in (("nitsche", 10.0), ("lagrange", 0.25), ("lagrange", 10.0)):
    for kappa in (0.0, 10.0):
        reports = dual_stability_report(method, LEVELS, kappa=kappa, alpha=alpha, seed=0)
        print(f"== {method}, alpha={alpha}, kappa={kappa} ==")
        for r in reports:
            ratios = " ".join(f"{k}={v:9.4f}" for k, v in r.ratios().items())
            print(f"  n={r.grid_n:3d}: {ratios}")
        sums = [sum(r.ratios().values()) for r in reports]
        print(f"  summed ratio spread: {max(sums) / min(sums):.3f}")
