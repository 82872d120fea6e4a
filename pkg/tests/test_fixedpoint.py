import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sktlab.analysis import regrid, scale_transform
from sktlab.fixedpoint import (ConvergenceError, ModelParams, PicardConfig, approximation_gap, cube_window,
                               picard_solve, reference_solve, restrict)
from sktlab.mesh import Field, Grid, ParabolicCube, SpaceTimeField, TensorField, TimeAxis
from sktlab.parabolic import energy_report, weak_residual

TIGHT = PicardConfig(max_iterations=300, l2_tolerance=1e-12)


def _bump(g, amp=0.4, base=0.1):
    return Field.from_function(g, lambda x, y: base + amp * np.exp(-20 * ((x - 0.4) ** 2 + (y - 0.6) ** 2)))


def test_model_params_validation():
    for bad in (dict(alpha=-1), dict(lam=0), dict(theta=0), dict(theta=1.5), dict(Lambda=0.5),
                dict(alpha=np.inf)):
        with pytest.raises(ValueError):
            ModelParams(**bad)
    with pytest.raises(ValueError):
        PicardConfig(l2_tolerance=0)
    with pytest.raises(ValueError):
        PicardConfig(relaxation=1.5)


def test_zero_is_a_fixed_point():
    g = Grid.unit(6, 6)
    ax = TimeAxis(0, 1, 4)
    res = picard_solve(ModelParams(), TensorField.identity(g), SpaceTimeField.constant(g, ax, 0.7),
                       Field.constant(g, 0.0))
    assert np.array_equal(res.u.values, np.zeros_like(res.u.values))


def test_capacity_is_a_fixed_point_without_forcing():
    g = Grid.unit(6, 6)
    ax = TimeAxis(0, 1, 4)
    p = ModelParams(alpha=2.0, lam=4.0, theta=0.5)
    res = picard_solve(p, TensorField.identity(g), SpaceTimeField.constant(g, ax, 0.0),
                       Field.constant(g, 0.25))
    assert np.allclose(res.u.values, 0.25, atol=1e-12)


def test_rejects_initial_data_outside_bracket():
    g = Grid.unit(4, 4)
    ax = TimeAxis(0, 1, 2)
    c = SpaceTimeField.constant(g, ax, 0.0)
    with pytest.raises(ValueError, match="lam"):
        picard_solve(ModelParams(lam=2.0), TensorField.identity(g), c, Field.constant(g, 0.6))
    with pytest.raises(ValueError, match="lam"):
        picard_solve(ModelParams(), TensorField.identity(g), c, Field.constant(g, 0.5), initial=2.0)
    with pytest.raises(ValueError, match="non-negative"):
        picard_solve(ModelParams(), TensorField.identity(g), SpaceTimeField.constant(g, ax, -1.0),
                     Field.constant(g, 0.5))


def test_no_convergence_carries_history():
    g = Grid.unit(6, 6)
    ax = TimeAxis(0, 1, 4)
    with pytest.raises(ConvergenceError, match="no convergence") as info:
        picard_solve(ModelParams(), TensorField.identity(g), SpaceTimeField.constant(g, ax, 0.0), _bump(g),
                     PicardConfig(max_iterations=2, l2_tolerance=1e-14))
    assert len(info.value.history) == 2


def _newton_oracle(u0, h, dt, steps, alpha, lam, theta):
    """Damped Newton on the fully coupled backward-Euler system, written from scratch."""
    n = len(u0)

    def residual(z):
        U = np.vstack([u0, z.reshape(steps, n)])
        out = []
        for m in range(1, steps + 1):
            u = U[m]
            coef = 1 + alpha * lam * u
            r = (u - U[m - 1]) / dt - theta ** 2 * u * (1 - lam * u)
            for i in range(n - 1):
                D = 0.5 * (coef[i] + coef[i + 1])
                flux = D * (u[i + 1] - u[i]) / h ** 2
                r[i] -= flux
                r[i + 1] += flux
            out.append(r)
        return np.concatenate(out)

    z = np.tile(u0, steps).astype(float)
    for _ in range(50):
        F = residual(z)
        if np.linalg.norm(F) < 1e-14:
            break
        J = np.empty((z.size, z.size))
        for k in range(z.size):
            e = np.zeros(z.size)
            e[k] = 1e-7
            J[:, k] = (residual(z + e) - residual(z - e)) / 2e-7
        step = np.linalg.solve(J, -F)
        t = 1.0
        while np.linalg.norm(residual(z + t * step)) > (1 - 1e-4 * t) * np.linalg.norm(F) and t > 1e-6:
            t *= 0.5
        z = z + t * step
    return z.reshape(steps, n)


def test_matches_newton_on_four_cells():
    g = Grid.unit(4)
    ax = TimeAxis(0, 0.2, 2)
    u0 = np.array([0.2, 0.4, 0.6, 0.8])
    res = picard_solve(ModelParams(alpha=1, lam=1, theta=1), TensorField.identity(g),
                       SpaceTimeField.constant(g, ax, 0.0), Field(g, u0), TIGHT)
    oracle = _newton_oracle(u0, g.h[0], ax.dt, ax.steps, 1.0, 1.0, 1.0)
    assert np.max(np.abs(res.u.values[1:] - oracle)) < 1e-6


def test_converged_solution_has_small_weak_residual():
    g = Grid.unit(10, 10)
    ax = TimeAxis(0, 0.5, 10)
    p = ModelParams(alpha=1.0, lam=2.0, theta=0.6, Lambda=2.0)
    A = TensorField.isotropic(g, 1 + 0.3 * np.sin(4 * g.centers[0]))
    c = SpaceTimeField.from_function(g, ax, lambda t, x, y: 1 + x * y + t)
    res = picard_solve(p, A, c, _bump(g), TIGHT)
    phi = SpaceTimeField.from_function(g, ax, lambda t, x, y: np.cos(np.pi * x) * (1 + t) + y)
    assert abs(weak_residual(res.u, p, A, c, phi)) < 1e-10


@settings(max_examples=15, deadline=None)
@given(st.floats(0, 3), st.floats(0.2, 5), st.floats(0.1, 1), st.floats(0, 4), st.integers(0, 1000))
def test_every_iterate_stays_in_bracket(alpha, lam, theta, c_amp, seed):
    rng = np.random.default_rng(seed)
    g = Grid.unit(8, 8)
    ax = TimeAxis(0, 0.5, 6)
    p = ModelParams(alpha=alpha, lam=lam, theta=theta, Lambda=2.0)
    u0 = Field(g, rng.uniform(0, 1 / lam, g.shape))
    c = SpaceTimeField(g, ax, c_amp * rng.uniform(0, 1, (ax.steps + 1,) + g.shape))
    A = TensorField.isotropic(g, rng.uniform(0.5, 2.0, g.shape))
    res = picard_solve(p, A, c, u0, initial=float(rng.uniform(0, 1 / lam)))
    for lo, hi in res.bounds:
        assert lo >= -1e-10
        assert lam * hi <= 1 + 1e-10
    assert res.history[-1] <= 1e-9


def test_uniqueness_from_opposite_initial_iterates():
    g = Grid.unit(12, 12)
    ax = TimeAxis(0, 0.5, 8)
    p = ModelParams(alpha=1.0, lam=2.0, theta=0.8, Lambda=1.0)
    A = TensorField.identity(g)
    c = SpaceTimeField.constant(g, ax, 0.5)
    cfg = PicardConfig(l2_tolerance=1e-10)
    lo = picard_solve(p, A, c, _bump(g), cfg, initial=0.0).u
    hi = picard_solve(p, A, c, _bump(g), cfg, initial=1 / p.lam).u
    gap = np.sqrt(((lo.values - hi.values)[1:] ** 2).sum() * g.cell_volume * ax.dt)
    assert gap <= 10 * cfg.l2_tolerance


def test_energy_is_controlled_by_data_across_a_sweep():
    g = Grid.unit(10, 10)
    ax = TimeAxis(0, 0.5, 8)
    ratios = []
    for lam in (0.5, 1.0, 2.0):
        for amp in (0.0, 1.0, 4.0):
            p = ModelParams(alpha=1.0, lam=lam, theta=0.7)
            c = SpaceTimeField.from_function(g, ax, lambda t, x, y: amp * (1 + np.sin(3 * x)) + 0 * t)
            u0 = Field.from_function(g, lambda x, y: (0.5 + 0.4 * np.cos(np.pi * x)) / lam)
            u = picard_solve(p, TensorField.identity(g), c, u0).u
            e = energy_report(u, c)
            ratios.append(e.lhs / e.rhs_sum)
    assert max(ratios) <= 10 * np.median(ratios)
    assert max(ratios) <= 2.0


def test_scaling_covariance_of_the_discrete_scheme():
    g = Grid.unit(10, 10)
    ax = TimeAxis(0, 0.5, 8)
    p = ModelParams(alpha=1.0, lam=1.5, theta=0.4, Lambda=2.0)
    A = TensorField.isotropic(g, 1 + 0.2 * g.centers[1])
    c = SpaceTimeField.from_function(g, ax, lambda t, x, y: 1 + x + 0 * t)
    phi = SpaceTimeField.from_function(g, ax, lambda t, x, y: np.cos(np.pi * x) * np.cos(np.pi * y) * (1 + t))
    u = picard_solve(p, A, c, _bump(g, amp=0.3), TIGHT).u
    r = weak_residual(u, p, A, c, phi)
    for s in (2.0, 0.5):
        u2, p2 = scale_transform(u, p, s)
        r2 = weak_residual(u2, p2, regrid(A, s), regrid(c, s), regrid(phi, s))
        assert abs(r2) <= 2 * abs(r) * max(1.0, s ** -3) + 1e-15
    # on an arbitrary field the residual transforms exactly by s^-(n+1)
    junk = SpaceTimeField.from_function(g, ax, lambda t, x, y: 0.3 + 0.2 * np.sin(x + 2 * y + t))
    r = weak_residual(junk, p, A, c, phi)
    j2, p2 = scale_transform(junk, p, 2.0)
    assert weak_residual(j2, p2, regrid(A, 2.0), regrid(c, 2.0), regrid(phi, 2.0)) == pytest.approx(r / 8, rel=1e-10)


def _solve_whole(g, ax, p, A, u0):
    return picard_solve(p, A, SpaceTimeField.constant(g, ax, 0.0), u0, TIGHT).u


def test_reference_solve_reproduces_constant_coefficient_solution():
    g = Grid.unit(16, 16)
    ax = TimeAxis(0, 0.5, 16)
    p = ModelParams(alpha=1.0, lam=2.0, theta=0.7, Lambda=2.0)
    A = TensorField.identity(g, 1.5)
    u = _solve_whole(g, ax, p, A, _bump(g))
    cube = ParabolicCube((0.5, 0.5), 0.25, 0.3)
    v = reference_solve(p, A, cube, u, TIGHT)
    w = restrict(u, cube)
    assert np.max(np.abs(v.values - w.values)) < 1e-8
    lam_v = p.lam * v.values
    assert lam_v.min() >= -1e-10 and lam_v.max() <= 1 + 1e-10


def test_reference_solve_zero_boundary_data():
    g = Grid.unit(12, 12)
    ax = TimeAxis(0, 0.5, 8)
    u = SpaceTimeField.constant(g, ax, 0.0)
    v = reference_solve(ModelParams(), TensorField.identity(g), ParabolicCube((0.5, 0.5), 0.25, 0.3), u)
    assert np.array_equal(v.values, np.zeros_like(v.values))


def test_reference_solve_rejects_cube_outside_domain():
    g = Grid.unit(8, 8)
    ax = TimeAxis(0, 0.5, 8)
    u = SpaceTimeField.constant(g, ax, 0.1)
    with pytest.raises(ValueError, match="leaves"):
        reference_solve(ModelParams(), TensorField.identity(g), ParabolicCube((0.1, 0.5), 0.25, 0.3), u)
    with pytest.raises(ValueError, match="leaves"):
        cube_window(g, ax, ParabolicCube((0.5, 0.5), 0.25, 0.6))


def test_gap_shrinks_with_coefficient_oscillation():
    g = Grid.unit(16, 16)
    ax = TimeAxis(0, 0.5, 16)
    p = ModelParams(alpha=1.0, lam=2.0, theta=0.7, Lambda=2.0)
    cube = ParabolicCube((0.5, 0.5), 0.25, 0.3)
    gaps = []
    for amp in (0.4, 0.2, 0.05):
        A = TensorField.isotropic(g, 1 + amp * np.sin(8 * np.pi * g.centers[0]) * np.sin(8 * np.pi * g.centers[1]))
        u = _solve_whole(g, ax, p, A, _bump(g))
        v = reference_solve(p, A, cube, u, TIGHT)
        w = restrict(u, cube)
        inner = ParabolicCube(cube.center, cube.s, cube.radius)
        gaps.append(approximation_gap(w, v, inner)[0])
    assert gaps[0] > gaps[1] > gaps[2] > 0


def test_approximation_gap_trivial_cases():
    g = Grid.unit(10, 10)
    ax = TimeAxis(0, 1, 10)
    u = SpaceTimeField.from_function(g, ax, lambda t, x, y: x * y + t)
    cube = ParabolicCube((0.5, 0.5), 0.5, 0.3)
    assert approximation_gap(u, u, cube) == (0.0, 0.0)
    v = SpaceTimeField(g, ax, u.values - 1.0)
    l2, h1 = approximation_gap(u, v, cube)
    measure = cube.space_mask(g).sum() * cube.time_mask(ax).sum() * g.cell_volume * ax.dt
    assert l2 == pytest.approx(measure, rel=1e-14)
    assert h1 == 0.0


def test_approximation_gap_matches_loop_quadrature():
    rng = np.random.default_rng(7)
    g = Grid.unit(9, 7)
    ax = TimeAxis(0, 1, 6)
    u = SpaceTimeField(g, ax, rng.normal(size=(7, 9, 7)))
    v = SpaceTimeField(g, ax, rng.normal(size=(7, 9, 7)))
    cube = ParabolicCube((0.45, 0.5), 0.5, 0.35)
    l2, h1 = approximation_gap(u, v, cube)
    X, Y = g.centers
    t = ax.times
    a, b = cube.time_interval
    e_l2 = e_h1 = 0.0
    inside = lambda i, j: (X[i, j] - 0.45) ** 2 + (Y[i, j] - 0.5) ** 2 < 0.35 ** 2 * (1 - 1e-9)
    for m in range(7):
        if not (a + 1e-9 * ax.dt < t[m] <= b + 1e-9 * ax.dt):
            continue
        d = u.values[m] - v.values[m]
        for i in range(9):
            for j in range(7):
                if inside(i, j):
                    e_l2 += d[i, j] ** 2 * g.cell_volume * ax.dt
                    if i + 1 < 9 and inside(i + 1, j):
                        e_h1 += ((d[i + 1, j] - d[i, j]) / g.h[0]) ** 2 * g.cell_volume * ax.dt
                    if j + 1 < 7 and inside(i, j + 1):
                        e_h1 += ((d[i, j + 1] - d[i, j]) / g.h[1]) ** 2 * g.cell_volume * ax.dt
    assert l2 == pytest.approx(e_l2, rel=1e-12)
    assert h1 == pytest.approx(e_h1, rel=1e-12)
