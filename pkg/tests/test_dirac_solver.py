import csv
import math

import numpy as np
import pytest

from diraclimit.dirac_solver import (
    InnerAbort,
    MinMaxConfig,
    continuation_sweep,
    initial_guess,
    inner_maximize,
    lift_upper,
    outer_minimize,
    residual,
)
from diraclimit.nls import gaussian_two_spinor
from diraclimit.spectral import norm, project_pm


def test_lift_lands_on_positive_sphere(grid16, params):
    w = lift_upper(gaussian_two_spinor(grid16), grid16, params)
    assert abs(norm(w, grid16) - 1) < 1e-12
    assert norm(project_pm(w, grid16, params, -1), grid16) < 1e-12


def test_guess_width_validation(grid16, pot16, params):
    with pytest.raises(ValueError):
        initial_guess(grid16, pot16, params, width=0.0)
    with pytest.raises(ValueError):
        initial_guess(grid16, pot16, params, width=grid16.half_width)


def test_inner_maximization(grid16, pot16, params):
    w = initial_guess(grid16, pot16, params)
    res = inner_maximize(w, pot16, params)
    assert res.converged and res.tangent_norm < 1e-8
    e = np.array(res.energies)
    assert np.all(np.diff(e) >= -1e-13 * np.abs(e[:-1]))
    assert norm(project_pm(res.u_minus, grid16, params, +1), grid16) < 1e-12
    assert abs(norm(res.u, grid16) - 1) < 1e-12
    # the max over S_W is at least the value at u_minus = 0
    from diraclimit.nonlinearity import energy_Ic

    assert res.energy >= energy_Ic(w, pot16, params) - 1e-12


def test_inner_cap_raises(grid16, pot16, params, rand_spinor):
    w = project_pm(rand_spinor(grid16, 3), grid16, params, +1)
    w /= norm(w, grid16)
    warm = 0.5 * project_pm(rand_spinor(grid16, 4), grid16, params, -1)
    with pytest.raises(InnerAbort):
        inner_maximize(w, pot16, params, MinMaxConfig(minus_norm_cap=1e-6), warm=warm / norm(warm, grid16) * 1e-3)


def test_outer_converges_with_trace(grid16, pot16, params, tmp_path):
    trace = tmp_path / "trace.csv"
    cfg = MinMaxConfig(trace_path=str(trace))
    res = outer_minimize(initial_guess(grid16, pot16, params), pot16, params, cfg)
    assert res.converged, res.message
    mc2 = params.m * params.c**2
    assert 0 < res.omega < mc2
    assert res.energy < mc2
    assert residual(res.u, res.omega, pot16, params) < 1e-7
    rows = list(csv.reader(trace.open()))
    assert rows[0] == ["iteration", "energy", "residual", "omega", "minus_norm"]
    assert float(rows[-1][2]) < 1e-7
    e = np.array(res.energies)
    assert np.all(np.diff(e) <= 1e-13 * np.abs(e[:-1]))


def test_continuation_records_each_rung(grid16, pot16, params, tmp_path):
    cfg = MinMaxConfig(trace_path=str(tmp_path / "t.csv"))
    out = continuation_sweep([4.0, 6.0], pot16, params, cfg)
    assert [r.c for r in out] == [4.0, 6.0]
    assert all(r.converged for r in out)
    assert (tmp_path / "t_c4.csv").exists() and (tmp_path / "t_c6.csv").exists()
    with pytest.raises(ValueError):
        continuation_sweep([6.0, 4.0], pot16, params)


def test_config_validation():
    with pytest.raises(ValueError):
        MinMaxConfig(minus_norm_cap=1.0)
    with pytest.raises(ValueError):
        MinMaxConfig(inner_tol=0.0)
    assert math.isclose(MinMaxConfig().backtrack, 0.5)


def test_linear_inner_maximizer_is_w(grid16, pot16, params):
    lin = pot16.linear()
    w = initial_guess(grid16, lin, params)
    res = inner_maximize(w, lin, params)
    assert norm(res.u_minus, grid16) < 1e-12
    from diraclimit.nonlinearity import kinetic_dirac

    assert abs(res.energy - kinetic_dirac(w, grid16, params)) < 1e-10


def test_linear_outer_flow_reaches_rest_energy(grid16, pot16, params):
    lin = pot16.linear()
    res = outer_minimize(initial_guess(grid16, lin, params), lin, params, MinMaxConfig(outer_max_iter=200))
    mc2 = params.m * params.c**2
    # omega approaches mc^2 from above; the torus floor is exactly mc^2
    assert 0 <= res.omega - mc2 < 1e-3


def test_residual_identities(grid16, pot16, params):
    from diraclimit.spectral import lambda_xi

    lin = pot16.linear()
    k = np.array([1, 0, 2])
    xi = np.pi / grid16.half_width * k
    x, y, z = grid16.coords
    wave = np.exp(1j * (xi[0] * x + xi[1] * y + xi[2] * z)) * np.ones(grid16.shape)
    u = np.stack([wave, 0 * wave, 0 * wave, 0 * wave])
    u = project_pm(u, grid16, params, +1)
    u /= norm(u, grid16)
    lam = float(lambda_xi(xi, params))
    assert residual(u, lam, lin, params) < 1e-12
    assert abs(residual(u, lam + 0.37, lin, params) - 0.37) < 1e-12


def test_saddle_structure_and_bracket(grid16, pot16, params, rand_spinor):
    from diraclimit.nonlinearity import energy_Ic

    w = initial_guess(grid16, pot16, params)
    res = inner_maximize(w, pot16, params)
    # upper end of the bracket: the maximum over S_W never exceeds ||w||_c^2
    assert res.energy <= norm(w, grid16, "C", params=params) ** 2 + 1e-10
    mc2 = params.m * params.c**2
    for seed in range(10):
        h = project_pm(rand_spinor(grid16, 50 + seed, cutoff=1 / 3), grid16, params, -1)
        h = h + 0.3 * (seed % 3) * w
        h /= norm(h, grid16)
        eps = 1e-3
        # second variation of I - omega ||.||^2 along h
        q = (
            energy_Ic(res.u + eps * h, pot16, params)
            - 2 * res.energy
            + energy_Ic(res.u - eps * h, pot16, params)
        ) / eps**2 - 2 * res.omega
        assert q <= 1e-6 * mc2, (seed, q)


def test_phase_gauge_and_unit_mass(grid16, pot16, params):
    w0 = initial_guess(grid16, pot16, params) * np.exp(0.8j)
    res = outer_minimize(w0, pot16, params)
    z = np.vdot(w0, res.u) * grid16.cell_volume
    assert abs(z.imag) < 1e-12 and z.real > 0
    assert abs(norm(res.u, grid16) - 1) < 1e-8


def test_single_rung_sweep_matches_direct_solve(grid16, pot16, params):
    (one,) = continuation_sweep([params.c], pot16, params)
    direct = outer_minimize(initial_guess(grid16, pot16, params), pot16, params)
    assert one.omega == direct.omega and one.energy == direct.energy


def test_guess_lower_part_shrinks_with_c(grid16):
    from diraclimit.spectral import PhysParams

    v = gaussian_two_spinor(grid16)
    vv = np.concatenate([v, np.zeros_like(v)])
    vals = [norm(project_pm(vv, grid16, PhysParams(c=c), -1), grid16, "H1") for c in (2.0, 4.0, 8.0, 16.0)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
