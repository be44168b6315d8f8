import math

import numpy as np
import pytest

from diraclimit.limit_harness import (
    CSV_COLUMNS,
    SweepRecord,
    align,
    consistency_report,
    fit_decay_rate,
    fit_order,
    records_from_csv,
    records_to_csv,
)
from diraclimit.nls import gaussian_two_spinor
from diraclimit.spectral import GridSpec, norm

G48 = GridSpec(48, 12.0)


def test_fit_order_exact_power_law():
    xs = [4.0, 8.0, 16.0, 32.0]
    assert abs(fit_order(xs, [1 / x for x in xs]) + 1) < 1e-12
    assert abs(fit_order(xs, [3.0] * 4)) < 1e-12
    assert abs(fit_order(xs, [x**1.5 for x in xs]) - 1.5) < 1e-12


def test_fit_order_rejects_bad_input():
    with pytest.raises(ValueError):
        fit_order([1, 2, 3], [1, 0, 2])
    with pytest.raises(ValueError):
        fit_order([1, 2], [1, 2])


def test_decay_fit_recovers_exponential():
    u = np.exp(-2 * G48.radius) * np.ones(G48.shape)
    fit = fit_decay_rate(u[None], G48, (3.0, 6.0))
    assert abs(fit.delta - 2) < 0.05
    assert fit.linear


def test_decay_fit_flags_gaussian():
    u = np.exp(-(G48.radius**2)) * np.ones(G48.shape)
    fit = fit_decay_rate(u[None], G48, (1.5, 3.5))
    assert fit.r2 < 0.99 and not fit.linear


def test_decay_fit_window_rules():
    u = np.exp(-G48.radius)[None] * np.ones(G48.shape)
    with pytest.raises(ValueError, match="bins"):
        fit_decay_rate(u, G48, (3.0, 4.0))
    with pytest.raises(ValueError):
        fit_decay_rate(u, G48, (3.0, 7.0))
    # tail below 1e-14 is dropped, leaving too few bins
    with pytest.raises(ValueError):
        fit_decay_rate(np.exp(-12 * G48.radius)[None] * np.ones(G48.shape), G48, (3.0, 6.0))


def make_record(c, omega, m=1.0, **kw):
    mc2 = m * c * c
    gap = mc2 - omega
    a_n = gap * (mc2 + omega) / c**2
    base = dict(
        g_H1=1 / c, f_dist_H1=0.1 / c, energy_gap=0.1 / c, decay_delta=1.0, converged=True, decay_r2=0.999
    )
    base.update(kw)
    return SweepRecord(c, omega, gap, a_n, (mc2 + omega) / c**2, green_delta=math.sqrt(a_n), **base)


def test_direct_formula_values():
    r = make_record(10.0, 99.5)
    assert abs(r.a_n - 0.9975) < 1e-12
    assert abs(r.b_n - 1.995) < 1e-12
    assert abs(r.green_delta**2 - r.a_n) < 1e-12


def test_synthetic_asymptotics_pass():
    nu, m = 0.3, 1.0
    recs = [make_record(c, m * c * c - nu / (2 * m) * (1 + 1 / c)) for c in (4.0, 8.0, 16.0, 32.0)]
    rep = consistency_report(recs, nu, m)
    assert rep["checks"]["a_n_to_nu"]["pass"]
    errs = rep["checks"]["a_n_to_nu"]["errors"]
    # O(1/c): halving ratio
    assert all(abs(a / b - 2) < 0.2 for a, b in zip(errs, errs[1:]))
    assert rep["multiplier_scaling"]["closer_to"] == "nu/(2m)"
    assert rep["checks"]["g_H1_order"]["pass"]


def test_report_needs_three_converged():
    recs = [make_record(c, c * c - 0.1) for c in (4.0, 8.0)]
    recs.append(make_record(16.0, 255.9, converged=False))
    with pytest.raises(ValueError):
        consistency_report(recs, 0.2)


def test_csv_round_trip_and_columns():
    recs = [make_record(c, c * c - 0.0088 - 1e-17 * c) for c in (4.0, 8.0, 16.0)]
    recs[1] = SweepRecord(**{**recs[1].__dict__, "converged": False, "decay_delta": math.nan})
    text = records_to_csv(recs, "config_hash=abc")
    lines = text.splitlines()
    assert lines[0] == "# config_hash=abc"
    assert tuple(lines[1].split(",")) == CSV_COLUMNS
    back = records_from_csv(text)
    for a, b in zip(recs, back):
        for name in CSV_COLUMNS:
            x, y = getattr(a, name), getattr(b, name)
            assert (x == y) or (isinstance(x, float) and math.isnan(x) and math.isnan(y))


def test_alignment_undoes_shift_and_spin_rotation():
    g = GridSpec(24, 12.0)
    h = gaussian_two_spinor(g, 1.5)
    theta = 0.7
    U = np.array([[np.cos(theta), -np.sin(theta) * np.exp(0.3j)], [np.sin(theta) * np.exp(-0.3j), np.cos(theta)]])
    f = np.roll(np.einsum("ab,bxyz->axyz", U, h) * np.exp(1.1j), (2, -1, 3), axis=(1, 2, 3))
    aligned, dist, raw = align(f, h, g)
    assert raw > 0.5
    assert dist < 1e-10


def test_alignment_never_increases_distance(rand_spinor):
    g = GridSpec(16, 12.0)
    for seed in range(5):
        f = rand_spinor(g, seed, components=2)
        h = rand_spinor(g, seed + 100, components=2)
        _, dist, raw = align(f, h, g)
        assert dist <= raw + 1e-14
        _, dist_self, _ = align(h, h, g)
        assert dist_self < 1e-12
