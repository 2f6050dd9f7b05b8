"""Acceptance suite: one test per numbered criterion.

Each test name carries its criterion number, so the verbose pytest
report doubles as the per-criterion pass/fail table. Three sub-criteria
fail by measurement, not by accident, and each failing test explains the
mathematics and points to its passing companion:

* the variational flux superconverges (~h^1.5) on this uniform mesh
  family, overshooting the [0.9, 1.15] slope band;
* at stabilization alpha = 10 the saddle operator is outside its
  stability regime (the inverse-inequality constant is 1/2 here, and
  alpha = 1/2 is exactly singular), so the multiplier slope and
  triple-norm bands fail there while alpha = 0.25 reproduces the
  expected first-order rates;
* the domain-L2 dual ratio Q4 decays under refinement for rough
  (per-facet Rademacher) data, so a two-sided factor-2 band per ratio
  cannot hold even though the upper bound it witnesses does; the summed
  ratio stays within a 1.12x band.
"""

import time

import numpy as np
import pytest

from fluxfem.analysis import (
    boundary_l2_error,
    boundary_l2_norm,
    dual_stability_report,
    error_representation_residual,
    fit_rate,
    interp_error_scan,
    l2_error,
    lm_error_representation_residual,
    rademacher_boundary_field,
    triple_norm_error,
    energy_error,
)
from fluxfem.cli import StudyConfig, level_grid_n, records_to_csv, run_convergence, run_patch_test
from fluxfem.fem import P1Space, TraceDG0Space
from fluxfem.flux import (
    ExactFluxField,
    multiplier_flux,
    nitsche_flux,
    project_pointwise_flux,
    variational_flux,
)
from fluxfem.lagrange import SaddleConfig, assemble_saddle
from fluxfem.linsolve import solve_spd, solve_sym_indefinite
from fluxfem.mesh import build_unit_square_mesh
from fluxfem.nitsche import NitscheConfig, assemble_nitsche
from fluxfem.problems import trig_problem

BETA = 10.0
ALPHA_STUDY = 10.0
ALPHA_STABLE = 0.25
KS = list(range(4, 11))
LEVELS = [level_grid_n(k) for k in KS]


@pytest.fixture(scope="module")
def problem():
    return trig_problem()


@pytest.fixture(scope="module")
def nitsche_study(problem):
    """Per-level Nitsche quantities for k = 4..10 plus elapsed seconds."""
    cfg = NitscheConfig(beta=BETA)
    rows = {}
    start = time.perf_counter()
    for n in LEVELS:
        space = P1Space(build_unit_square_mesh(n))
        mesh = space.mesh
        exact = ExactFluxField(problem, mesh)
        u = solve_spd(assemble_nitsche(space, cfg, problem.f, problem.g)).x
        pointwise = nitsche_flux(u, problem.g, space, cfg)
        variational = variational_flux(u, problem.g, problem.f, space)
        projected = project_pointwise_flux(u, problem.g, space, cfg)
        rows[n] = {
            "h": mesh.h_grid,
            "flux_pointwise": boundary_l2_error(pointwise, exact, mesh),
            "flux_variational": boundary_l2_error(variational, exact, mesh),
            "projection_distance": boundary_l2_error(variational, projected, mesh),
            "energy": energy_error(problem, u, space),
            "l2": l2_error(problem, u, space),
        }
    return rows, time.perf_counter() - start


def _lagrange_rows(problem, alpha):
    rows = {}
    for n in LEVELS:
        mesh = build_unit_square_mesh(n)
        space, trace = P1Space(mesh), TraceDG0Space(mesh)
        system = assemble_saddle(space, trace, SaddleConfig(alpha=alpha), problem.f, problem.g)
        u, lam = system.split(solve_sym_indefinite(system).x)
        rows[n] = {
            "h": mesh.h_grid,
            "flux_multiplier": boundary_l2_error(
                multiplier_flux(lam, mesh), ExactFluxField(problem, mesh), mesh
            ),
            "triple": triple_norm_error(problem, u, lam, space),
            "l2": l2_error(problem, u, space),
        }
    return rows


@pytest.fixture(scope="module")
def lagrange_study(problem):
    start = time.perf_counter()
    rows = _lagrange_rows(problem, ALPHA_STUDY)
    return rows, time.perf_counter() - start


@pytest.fixture(scope="module")
def lagrange_study_stable(problem):
    return _lagrange_rows(problem, ALPHA_STABLE)


def _slope(rows, field):
    return fit_rate([(row["h"], row[field]) for row in rows.values()])


def test_criterion_1_patch_tests_both_methods():
    start = time.perf_counter()
    failures = run_patch_test(StudyConfig(method="nitsche", beta=BETA))
    failures += run_patch_test(StudyConfig(method="lagrange", alpha=ALPHA_STUDY))
    elapsed = time.perf_counter() - start
    print(f"criterion 1: patch failures {failures}, {elapsed:.2f}s")
    assert failures == []
    assert elapsed < 1.0


def test_criterion_2_pointwise_flux_slope(nitsche_study):
    rows, elapsed = nitsche_study
    slope = _slope(rows, "flux_pointwise")
    print(f"criterion 2 (pointwise): slope {slope:.4f}, study {elapsed:.1f}s")
    assert elapsed < 120.0
    assert 0.9 <= slope <= 1.15


def test_criterion_2_variational_flux_slope(nitsche_study):
    """Stated band [0.9, 1.15]. The measured slope is ~1.59: projecting
    the pointwise flux onto the continuous boundary trace cancels its
    mesh-periodic oscillation on this translation-invariant mesh family,
    which is superconvergence past the band, not a defect. The companion
    test pins the two honest facts: slope >= 0.9 and errors strictly
    below the pointwise ones."""
    rows, _ = nitsche_study
    slope = _slope(rows, "flux_variational")
    print(f"criterion 2 (variational): slope {slope:.4f}")
    assert 0.9 <= slope <= 1.15, (
        f"variational flux superconverges: fitted slope {slope:.4f} exceeds 1.15; "
        "see test_variational_flux_superconvergence_companion"
    )


def test_variational_flux_superconvergence_companion(nitsche_study):
    rows, _ = nitsche_study
    slope = _slope(rows, "flux_variational")
    assert slope >= 0.9
    for n, row in rows.items():
        assert row["flux_variational"] < row["flux_pointwise"]


def test_criterion_2_multiplier_flux_slope(lagrange_study):
    """Stated band [0.9, 1.2] at alpha = 10. That value sits far above
    the inverse-inequality constant (1/2 on this family): the saddle
    operator has spurious near-null modes, the error sequence is not even
    monotone, and the fitted slope lands near 0.67. The companion test
    shows the clean first-order rate at alpha = 0.25."""
    rows, elapsed = lagrange_study
    slope = _slope(rows, "flux_multiplier")
    errs = [row["flux_multiplier"] for row in rows.values()]
    print(f"criterion 2 (multiplier, alpha=10): slope {slope:.4f}, errors {errs}")
    assert elapsed < 120.0
    assert 0.9 <= slope <= 1.2, (
        f"multiplier flux at alpha=10 is outside the stable regime: slope {slope:.4f}, "
        "errors non-monotone; see test_multiplier_flux_slope_stable_companion"
    )


def test_multiplier_flux_slope_stable_companion(lagrange_study_stable):
    rows = lagrange_study_stable
    slope = _slope(rows, "flux_multiplier")
    print(f"multiplier flux slope at alpha={ALPHA_STABLE}: {slope:.4f}")
    assert 0.9 <= slope <= 1.2
    errs = [row["flux_multiplier"] for row in rows.values()]
    assert all(a >= b for a, b in zip(errs, errs[1:]))


def test_criterion_3_energy_slope(nitsche_study):
    rows, _ = nitsche_study
    slope = _slope(rows, "energy")
    print(f"criterion 3 (energy): slope {slope:.4f}")
    assert 0.9 <= slope <= 1.1


def test_criterion_3_triple_norm_slope(lagrange_study):
    """Stated band [0.9, 1.1] at alpha = 10; the instability shaves the
    fitted slope to ~0.88. The companion at alpha = 0.25 sits at ~1.03."""
    rows, _ = lagrange_study
    slope = _slope(rows, "triple")
    print(f"criterion 3 (triple norm, alpha=10): slope {slope:.4f}")
    assert 0.9 <= slope <= 1.1, (
        f"triple-norm slope {slope:.4f} at alpha=10; "
        "see test_triple_norm_slope_stable_companion"
    )


def test_triple_norm_slope_stable_companion(lagrange_study_stable):
    slope = _slope(lagrange_study_stable, "triple")
    print(f"triple norm slope at alpha={ALPHA_STABLE}: {slope:.4f}")
    assert 0.9 <= slope <= 1.1


def test_criterion_4_error_representation_identities(problem):
    start = time.perf_counter()
    worst = {"nitsche": 0.0, "lagrange": 0.0}
    for n in (8, 16, 32):
        mesh = build_unit_square_mesh(n)
        space, trace = P1Space(mesh), TraceDG0Space(mesh)
        cfg = NitscheConfig(beta=BETA)
        u = solve_spd(assemble_nitsche(space, cfg, problem.f, problem.g, volume_degree=6)).x
        scfg = SaddleConfig(alpha=ALPHA_STUDY)
        system = assemble_saddle(space, trace, scfg, problem.f, problem.g, volume_degree=6)
        uu, lam = system.split(solve_sym_indefinite(system).x)
        for seed in range(5):
            psi = rademacher_boundary_field(mesh, seed)
            worst["nitsche"] = max(
                worst["nitsche"],
                error_representation_residual(problem, u, space, cfg, psi, volume_degree=6),
            )
            worst["lagrange"] = max(
                worst["lagrange"],
                lm_error_representation_residual(
                    problem, uu, lam, space, trace, scfg, psi, volume_degree=6
                ),
            )
    elapsed = time.perf_counter() - start
    print(f"criterion 4: worst residuals {worst}, {elapsed:.1f}s")
    assert elapsed < 30.0
    assert worst["nitsche"] <= 1e-6
    assert worst["lagrange"] <= 1e-6


def test_criterion_5_variational_projection_identity(nitsche_study):
    rows, _ = nitsche_study
    distances = {n: row["projection_distance"] for n, row in rows.items()}
    print(f"criterion 5: projection distances {distances}")
    assert all(d <= 1e-9 for d in distances.values())


def test_criterion_6_dual_stability_per_ratio_bands():
    """Stated: every ratio Qi/|psi|^2 (Q1..Q4 Nitsche, Q1..Q5 multiplier,
    kappa in {0, 10}, alpha = beta = 10) stays within a factor 2 over
    n in {8, 16, 32, 64}. Two measured effects break the band: Q4 decays
    under refinement for Rademacher data in every configuration (the
    witnessed estimate is one-sided), and the alpha = 10 saddle operator
    is outside its stability regime, so the multiplier ratios jump by
    factors of 10..100. The summed-ratio witnesses pass in the companion
    tests."""
    start = time.perf_counter()
    offenders = []
    for method in ("nitsche", "lagrange"):
        for kappa in (0.0, 10.0):
            reports = dual_stability_report(
                method, [8, 16, 32, 64], kappa=kappa, seed=0, beta=BETA, alpha=ALPHA_STUDY
            )
            names = reports[0].ratios().keys()
            for name in names:
                values = [r.ratios()[name] for r in reports]
                spread = max(values) / min(values)
                if spread > 2.0:
                    offenders.append(f"{method} kappa={kappa} {name}: spread {spread:.2f}")
    elapsed = time.perf_counter() - start
    print(f"criterion 6: offenders {offenders}, {elapsed:.1f}s")
    assert elapsed < 60.0
    assert not offenders, "; ".join(offenders)


@pytest.mark.parametrize("kappa", [0.0, 10.0])
def test_dual_stability_sum_witness_nitsche_companion(kappa):
    reports = dual_stability_report("nitsche", [8, 16, 32, 64], kappa=kappa, seed=0, beta=BETA)
    sums = [sum(r.ratios().values()) for r in reports]
    spread = max(sums) / min(sums)
    print(f"nitsche kappa={kappa}: summed ratio spread {spread:.3f}")
    assert spread <= 2.0


@pytest.mark.parametrize("kappa", [0.0, 10.0])
def test_dual_stability_sum_witness_lagrange_stable_companion(kappa):
    reports = dual_stability_report(
        "lagrange", [8, 16, 32, 64], kappa=kappa, seed=0, alpha=ALPHA_STABLE
    )
    sums = [sum(r.ratios().values()) for r in reports]
    spread = max(sums) / min(sums)
    print(f"lagrange alpha={ALPHA_STABLE} kappa={kappa}: summed ratio spread {spread:.3f}")
    assert spread <= 2.0


def test_criterion_7_interpolation_scan(problem):
    values, grads = [], []
    for n in (16, 32, 64):
        scan = interp_error_scan(problem, P1Space(build_unit_square_mesh(n)))
        values.append((scan.h_grid, scan.sup_value_error))
        grads.append((scan.h_grid, scan.sup_gradient_error))
    value_order = fit_rate(values)
    grad_order = fit_rate(grads)
    print(f"criterion 7: value order {value_order:.3f}, gradient order {grad_order:.3f}")
    assert value_order >= 1.9
    assert grad_order >= 0.9


def test_criterion_8_exact_flux_norm(problem):
    mesh = build_unit_square_mesh(4)
    value = boundary_l2_norm(ExactFluxField(problem, mesh), mesh)
    print(f"criterion 8: |sigma| = {value!r}")
    assert value == pytest.approx(2.0 * np.sqrt(2.0) * np.pi, abs=1e-10)


def test_criterion_9_byte_identical_reruns():
    config = StudyConfig(kmin=0, kmax=3, seed=1)
    first = records_to_csv(run_convergence(config)).encode()
    second = records_to_csv(run_convergence(config)).encode()
    print(f"criterion 9: outputs identical ({len(first)} bytes)")
    assert first == second


def test_converged_study_errors_monotone(nitsche_study, lagrange_study_stable):
    """Flux, energy, and domain errors shrink monotonically over the last
    four levels of the converged studies."""
    rows, _ = nitsche_study
    for field in ("flux_pointwise", "flux_variational", "energy", "l2"):
        tail = [rows[n][field] for n in LEVELS[-4:]]
        assert all(a >= b for a, b in zip(tail, tail[1:])), field
    for field in ("flux_multiplier", "triple", "l2"):
        tail = [lagrange_study_stable[n][field] for n in LEVELS[-4:]]
        assert all(a >= b for a, b in zip(tail, tail[1:])), field
