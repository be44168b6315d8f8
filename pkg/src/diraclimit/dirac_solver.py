"""Normalized solutions of the nonlinear Dirac equation by a min-max reduction.

For ``w`` on the unit sphere of the positive-energy subspace, the inner problem
maximizes the energy over ``u = t w + u_minus`` with ``u_minus`` in the
negative-energy subspace and ``t = sqrt(1 - ||u_minus||^2)``.  The outer problem
minimizes the resulting envelope over ``w``.  Both levels are first-order
methods with Armijo backtracking, preconditioned by Fourier multipliers that
commute with the spectral projectors.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .nonlinearity import PotentialSet, energy_and_grad_Ic
from .spectral import (
    GridSpec,
    PhysParams,
    fftn,
    fw_transform_hat,
    ifftn,
    lambda_grid,
    norm,
    project_pm_hat,
)
from .nls import gaussian_two_spinor

__all__ = [
    "MinMaxConfig",
    "DiracSolveResult",
    "InnerResult",
    "InnerAbort",
    "initial_guess",
    "lift_upper",
    "inner_maximize",
    "outer_minimize",
    "residual",
    "continuation_sweep",
]

log = logging.getLogger(__name__)


class InnerAbort(RuntimeError):
    """The negative-energy part grew past ``minus_norm_cap``."""


@dataclass(frozen=True)
class MinMaxConfig:
    inner_tol: float = 1e-8
    outer_tol: float = 1e-7
    inner_max_iter: int = 2000
    outer_max_iter: int = 500
    step0: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    minus_norm_cap: float = 0.9
    precond_shift: float = 0.25
    guess_width: float = 1.5
    warm_start: bool = True
    trace_path: str | None = None

    def __post_init__(self):
        if min(self.inner_tol, self.outer_tol, self.step0, self.precond_shift) <= 0:
            raise ValueError("tolerances, step0 and precond_shift must be positive")
        if not 0 < self.minus_norm_cap < 1:
            raise ValueError(f"minus_norm_cap must lie in (0, 1), got {self.minus_norm_cap}")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")


@dataclass
class InnerResult:
    u: np.ndarray
    u_minus: np.ndarray
    t: float
    energy: float
    grad: np.ndarray
    omega: float
    tangent_norm: float
    iterations: int
    converged: bool
    energies: list[float] = field(default_factory=list, repr=False)


@dataclass
class DiracSolveResult:
    u: np.ndarray
    omega: float
    energy: float
    residual: float
    inner_iterations: int
    outer_iterations: int
    converged: bool
    c: float = math.nan
    w: np.ndarray | None = field(default=None, repr=False)
    energies: list[float] = field(default_factory=list, repr=False)
    trace: list[tuple] = field(default_factory=list, repr=False)
    message: str = ""


def _slack(energy: float) -> float:
    """Energy differences below this are indistinguishable from roundoff."""
    return 1e-13 * max(1.0, abs(energy))


def _re(a: np.ndarray, b: np.ndarray, grid: GridSpec) -> float:
    return float(np.vdot(a, b).real * grid.cell_volume)


def _project(u: np.ndarray, grid: GridSpec, p: PhysParams, sign: int) -> np.ndarray:
    return ifftn(project_pm_hat(fftn(u), grid, p, sign))


def lift_upper(v: np.ndarray, grid: GridSpec, p: PhysParams) -> np.ndarray:
    """``P+ U_FW^{-1} (v, 0)``, normalized in L^2: a point of the positive-energy sphere."""
    u = np.concatenate([v, np.zeros_like(v)])
    u_hat = fw_transform_hat(fftn(u), grid, p, inverse=True)
    w = ifftn(project_pm_hat(u_hat, grid, p, +1))
    return w / norm(w, grid)


def initial_guess(grid: GridSpec, pot: PotentialSet, p: PhysParams, width: float = 1.5) -> np.ndarray:
    """Gaussian two-spinor lifted into the positive-energy sphere."""
    if width <= 0 or width > grid.half_width / 2:
        raise ValueError(f"Gaussian width {width} is degenerate on a box of half-width {grid.half_width}")
    return lift_upper(gaussian_two_spinor(grid, width), grid, p)


def residual(u: np.ndarray, omega: float, pot: PotentialSet, p: PhysParams) -> float:
    """``||D u - N(u) - omega u||_L2``."""
    grid = pot.grid
    if abs(norm(u, grid) - 1.0) > 1e-8:
        raise ValueError("residual needs ||u||_L2 = 1")
    _, grad = energy_and_grad_Ic(u, pot, p)
    return norm(0.5 * grad - omega * u, grid)


def _inner_state(w, u_minus, pot, p):
    grid = pot.grid
    nm2 = _re(u_minus, u_minus, grid)
    t = math.sqrt(max(1.0 - nm2, 0.0))
    u = t * w + u_minus
    energy, grad = energy_and_grad_Ic(u, pot, p)
    omega = 0.5 * _re(u, grad, grid)
    return u, t, energy, grad, omega


def _sw_tangent(w, u, grad, omega, grid, p):
    """Projection of ``grad/2 - omega u`` onto ``span{w} + E_minus``."""
    r = 0.5 * grad - omega * u
    return _project(r, grid, p, -1) + np.vdot(w, r) * grid.cell_volume * w


def inner_maximize(
    w: np.ndarray,
    pot: PotentialSet,
    p: PhysParams,
    cfg: MinMaxConfig = MinMaxConfig(),
    warm: np.ndarray | None = None,
) -> InnerResult:
    """Maximize the energy over ``S_W`` by preconditioned ascent in ``u_minus``.

    Raises :class:`InnerAbort` if ``||u_minus||`` reaches ``cfg.minus_norm_cap``.
    """
    grid = pot.grid
    if abs(norm(w, grid) - 1.0) > 1e-8:
        raise ValueError("inner_maximize needs ||w||_L2 = 1")
    u_minus = np.zeros_like(w) if warm is None else _project(warm, grid, p, -1)
    if norm(u_minus, grid) >= cfg.minus_norm_cap:
        u_minus = np.zeros_like(w)
    # Curvature in u_minus is about -2 (lambda + omega); use it as the metric.
    prec = 1.0 / (2.0 * (lambda_grid(grid, p) + p.m * p.c**2))
    u, t, energy, grad, omega = _inner_state(w, u_minus, pot, p)
    energies = [energy]
    alpha = cfg.step0
    it = 0
    tangent = math.inf
    for it in range(1, cfg.inner_max_iter + 1):
        tangent = norm(_sw_tangent(w, u, grad, omega, grid, p), grid)
        if tangent < cfg.inner_tol:
            it -= 1
            break
        ascent = _project(grad, grid, p, -1) - (_re(grad, w, grid) / t) * u_minus
        d = ifftn(prec * fftn(ascent))
        slope = _re(ascent, d, grid)
        accepted = None
        while alpha >= 1e-14:
            trial = u_minus + alpha * d
            if norm(trial, grid) >= cfg.minus_norm_cap:
                alpha *= cfg.backtrack
                continue
            state = _inner_state(w, trial, pot, p)
            gain = state[2] - energy
            if gain >= cfg.armijo * alpha * slope:
                accepted = state
                break
            if gain >= -_slack(energy):
                # energy change is below roundoff; demand a smaller tangent gradient instead
                if norm(_sw_tangent(w, state[0], state[3], state[4], grid, p), grid) < tangent:
                    accepted = state
                    break
            alpha *= cfg.backtrack
        if accepted is None:
            if norm(u_minus + cfg.step0 * d, grid) >= cfg.minus_norm_cap:
                raise InnerAbort(f"||u_minus|| reached the cap {cfg.minus_norm_cap} at inner iteration {it}")
            log.debug("inner ascent stalled at iteration %d, tangent %.3e", it, tangent)
            break
        state = accepted
        u_minus = trial
        u, t, energy, grad, omega = state
        energies.append(energy)
        alpha = min(2.0 * alpha, cfg.step0)
    else:
        tangent = norm(_sw_tangent(w, u, grad, omega, grid, p), grid)
    return InnerResult(u, u_minus, t, energy, grad, omega, tangent, it, tangent < cfg.inner_tol, energies)


def _phase_align(u: np.ndarray, ref: np.ndarray, grid: GridSpec) -> np.ndarray:
    z = np.vdot(ref, u) * grid.cell_volume
    if abs(z) == 0:
        return u
    return u * (abs(z) / z)


def _write_trace(path: str, rows: list[tuple]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "energy", "residual", "omega", "minus_norm"])
        for row in rows:
            writer.writerow([row[0]] + [repr(float(x)) for x in row[1:]])


def outer_minimize(
    w0: np.ndarray,
    pot: PotentialSet,
    p: PhysParams,
    cfg: MinMaxConfig = MinMaxConfig(),
    warm_minus: np.ndarray | None = None,
) -> DiracSolveResult:
    """Minimize the max-envelope over the positive-energy sphere, starting at ``w0``."""
    grid = pot.grid
    w = _project(np.asarray(w0, dtype=complex), grid, p, +1)
    w /= norm(w, grid)
    w_init = w.copy()
    mc2 = p.m * p.c**2
    prec = 1.0 / (lambda_grid(grid, p) - mc2 + cfg.precond_shift)

    inner = inner_maximize(w, pot, p, cfg, warm=warm_minus)
    inner_total = inner.iterations
    energies = [inner.energy]
    trace = []
    alpha = cfg.step0
    res = math.inf
    it = 0
    message = ""
    for it in range(1, cfg.outer_max_iter + 1):
        res = norm(0.5 * inner.grad - inner.omega * inner.u, grid)
        trace.append((it - 1, inner.energy, res, inner.omega, norm(inner.u_minus, grid)))
        if res < cfg.outer_tol:
            it -= 1
            break
        g = inner.t * _project(inner.grad, grid, p, +1)
        g = g - _re(w, g, grid) * w
        Mg = ifftn(prec * fftn(g))
        Mw = ifftn(prec * fftn(w))
        d = Mg - (_re(w, Mg, grid) / _re(w, Mw, grid)) * Mw
        slope = _re(g, d, grid)
        accepted = None
        while alpha >= 1e-12:
            trial = _project(w - alpha * d, grid, p, +1)
            trial /= norm(trial, grid)
            cand = inner_maximize(trial, pot, p, cfg, warm=inner.u_minus)
            inner_total += cand.iterations
            drop = inner.energy - cand.energy
            if drop >= cfg.armijo * alpha * slope:
                accepted = (trial, cand)
                break
            if drop >= -_slack(inner.energy):
                cand_res = norm(0.5 * cand.grad - cand.omega * cand.u, grid)
                if cand_res < res:
                    accepted = (trial, cand)
                    break
            alpha *= cfg.backtrack
        if accepted is None:
            message = f"line search failed at outer iteration {it}"
            log.warning("%s (residual %.3e)", message, res)
            break
        w, inner = accepted
        energies.append(inner.energy)
        alpha = min(1.5 * alpha, 4.0 * cfg.step0)
    else:
        res = norm(0.5 * inner.grad - inner.omega * inner.u, grid)
        trace.append((it, inner.energy, res, inner.omega, norm(inner.u_minus, grid)))
        message = "outer iteration cap reached"

    u = _phase_align(inner.u, w_init, grid)
    converged = res < cfg.outer_tol and inner.converged
    # without nonlinearity the torus spectrum bottom is exactly mc^2, so the window is closed there
    if converged and (pot.hartree_on or pot.local_on) and not 0 < inner.omega < mc2:
        raise AssertionError(f"converged multiplier {inner.omega} outside (0, mc^2 = {mc2})")
    if cfg.trace_path:
        _write_trace(cfg.trace_path, trace)
    return DiracSolveResult(
        u=u,
        omega=inner.omega,
        energy=inner.energy,
        residual=res,
        inner_iterations=inner_total,
        outer_iterations=it,
        converged=converged,
        c=p.c,
        w=_phase_align(w, w_init, grid),
        energies=energies,
        trace=trace,
        message=message,
    )


def upper_spinor_in_fw_frame(u: np.ndarray, grid: GridSpec, p: PhysParams) -> np.ndarray:
    """Upper two components of ``U_FW u``."""
    return ifftn(fw_transform_hat(fftn(u), grid, p)[:2])


def continuation_sweep(
    c_values,
    pot: PotentialSet,
    p: PhysParams,
    cfg: MinMaxConfig = MinMaxConfig(),
) -> list[DiracSolveResult]:
    """Solve along an ascending ladder of light speeds, warm-starting each rung."""
    c_values = [float(c) for c in c_values]
    if any(b <= a for a, b in zip(c_values, c_values[1:])):
        raise ValueError(f"c_values must be strictly ascending, got {c_values}")
    grid = pot.grid
    results: list[DiracSolveResult] = []
    prev = None
    for c in c_values:
        pc = p.with_c(c)
        if prev is not None and cfg.warm_start:
            w0 = lift_upper(upper_spinor_in_fw_frame(prev.u, grid, p.with_c(prev.c)), grid, pc)
        else:
            w0 = initial_guess(grid, pot, pc, cfg.guess_width)
        run_cfg = cfg
        if cfg.trace_path:
            run_cfg = replace(cfg, trace_path=str(Path(cfg.trace_path).with_suffix("")) + f"_c{c:g}.csv")
        try:
            res = outer_minimize(w0, pot, pc, run_cfg)
        except InnerAbort as exc:
            log.error("solve at c=%g aborted: %s", c, exc)
            res = DiracSolveResult(w0, math.nan, math.nan, math.inf, 0, 0, False, c=c, message=str(exc))
        if not res.converged:
            log.warning("c=%g did not converge: residual %.3e %s", c, res.residual, res.message)
        results.append(res)
        if res.converged or prev is None:
            prev = res
    return results
