"""Ground states of the limiting nonlinear Schrodinger system.

Minimizes ``E(g) = 1/2 |grad g|^2 - (m/kappa) int Gamma*(K|g|^k)K|g|^k - (2m/s) int P|g|^s``
over two-spinors with ``||g||_L2 = 1`` by preconditioned gradient descent on the
sphere.  The multiplier ``nu`` is read off the stationarity relation
``-Delta h + nu h = 2m N(h)`` once the flow has converged.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .nonlinearity import PotentialSet, nonlinear_parts
from .spectral import GridSpec, PhysParams, fftn, ifftn, norm

__all__ = [
    "NlsConfig",
    "NlsResult",
    "energy_E",
    "energy_and_grad_E",
    "nls_residual",
    "nls_ground_state",
    "gaussian_two_spinor",
    "rescale",
    "scaling_trial_energy",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NlsConfig:
    tol: float = 1e-9
    max_iter: int = 3000
    step0: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    shift: float = 0.5

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("NlsConfig needs tol > 0 and max_iter >= 1")


@dataclass
class NlsResult:
    h: np.ndarray
    nu: float
    energy: float
    residual: float
    iterations: int
    converged: bool
    energies: list[float] = field(default_factory=list, repr=False)


def _kinetic(g_hat: np.ndarray, grid: GridSpec) -> float:
    return grid.spectral_sum(grid.xi2, g_hat)


def energy_and_grad_E(g: np.ndarray, pot: PotentialSet, p: PhysParams) -> tuple[float, np.ndarray]:
    """Schrodinger energy and its L^2 gradient ``-Delta g - 2m N(g)``."""
    grid = pot.grid
    g_hat = fftn(g)
    kin = _kinetic(g_hat, grid)
    e_h, e_l, nl = nonlinear_parts(g, pot, p)
    energy = 0.5 * kin - p.m * e_h / p.kappa - 2.0 * p.m * e_l / p.s
    grad = ifftn(grid.xi2 * g_hat) - 2.0 * p.m * nl
    return energy, grad


def energy_E(g: np.ndarray, pot: PotentialSet, p: PhysParams) -> float:
    return energy_and_grad_E(g, pot, p)[0]


def _inner_re(a: np.ndarray, b: np.ndarray, grid: GridSpec) -> float:
    return float(np.vdot(a, b).real * grid.cell_volume)


def nls_residual(h: np.ndarray, nu: float, pot: PotentialSet, p: PhysParams) -> float:
    """``||-Delta h + nu h - 2m N(h)||_L2``."""
    _, grad = energy_and_grad_E(h, pot, p)
    return norm(grad + nu * h, pot.grid)


def nls_ground_state(
    g0: np.ndarray,
    pot: PotentialSet,
    p: PhysParams,
    cfg: NlsConfig = NlsConfig(),
) -> NlsResult:
    """Descend ``E`` on the unit L^2 sphere from ``g0`` until the residual drops below ``cfg.tol``."""
    grid = pot.grid
    if abs(norm(g0, grid) - 1.0) > 1e-8:
        raise ValueError("nls_ground_state needs a normalized initial guess")
    h = np.array(g0, dtype=complex)
    energy, grad = energy_and_grad_E(h, pot, p)
    energies = [energy]
    alpha = cfg.step0
    residual = math.inf
    nu = 0.0
    it = 0
    for it in range(1, cfg.max_iter + 1):
        nu = -_inner_re(h, grad, grid)
        residual = norm(grad + nu * h, grid)
        if residual < cfg.tol:
            it -= 1
            break
        # Sobolev-preconditioned direction, re-projected onto the sphere tangent.
        prec = 1.0 / (grid.xi2 + cfg.shift)
        Mg = ifftn(prec * fftn(grad))
        Mh = ifftn(prec * fftn(h))
        d = Mg - (_inner_re(h, Mg, grid) / _inner_re(h, Mh, grid)) * Mh
        slope = _inner_re(grad, d, grid)
        if slope <= 0:
            d, slope = grad + nu * h, residual**2
        accepted = False
        while alpha >= 1e-12:
            trial = h - alpha * d
            trial /= norm(trial, grid)
            e_trial, g_trial = energy_and_grad_E(trial, pot, p)
            if e_trial <= energy - cfg.armijo * alpha * slope:
                accepted = True
                break
            if e_trial <= energy + 1e-13 * max(1.0, abs(energy)):
                # below roundoff the energy cannot rank steps; the residual can
                nu_t = -_inner_re(trial, g_trial, grid)
                if norm(g_trial + nu_t * trial, grid) < residual:
                    accepted = True
                    break
            alpha *= cfg.backtrack
        if not accepted:
            log.warning("nls descent stalled at iteration %d (residual %.3e)", it, residual)
            break
        h, energy, grad = trial, e_trial, g_trial
        energies.append(energy)
        alpha = min(alpha * 1.5, 4.0 * cfg.step0)
    nu = -_inner_re(h, grad, grid)
    residual = norm(grad + nu * h, grid)
    return NlsResult(h, nu, energy, residual, it, residual < cfg.tol, energies)


def gaussian_two_spinor(grid: GridSpec, width: float = 1.5, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Normalized spin-up Gaussian ``(G, 0)``."""
    x, y, z = grid.coords
    r2 = (x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2
    g = np.zeros((2,) + grid.shape, dtype=complex)
    g[0] = np.exp(-r2 / (2.0 * width**2))
    return g / norm(g, grid)


def _interp_matrix(grid: GridSpec, points: np.ndarray) -> np.ndarray:
    """Trigonometric interpolation matrix from grid samples to ``points`` along one axis."""
    k = grid.freq_axis
    shift = points[:, None] - grid.axis[0]
    E = np.exp(1j * k[None, :] * shift)
    nyq = np.abs(grid.index) == grid.n // 2
    E[:, nyq] = np.cos(k[nyq][None, :] * shift)
    return E / grid.n


def rescale(v: np.ndarray, epsilon: float, grid: GridSpec, mass_tol: float = 1e-10) -> np.ndarray:
    """Mass-preserving dilation ``eps^{3/2} v(eps x)`` by Fourier interpolation."""
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    if epsilon == 1:
        return np.array(v, dtype=complex)
    # v(eps x) samples v only on [-eps L, eps L)^3; mass outside would be lost.
    inside = np.abs(grid.axis) < epsilon * grid.half_width
    mask = inside[:, None, None] & inside[None, :, None] & inside[None, None, :]
    dens = np.sum(np.abs(v) ** 2, axis=0)
    outside = float(np.sum(dens[~mask]) / np.sum(dens))
    if outside > mass_tol:
        raise ValueError(f"epsilon={epsilon} rescales {outside:.2e} of the mass out of the box")
    E = _interp_matrix(grid, epsilon * grid.axis)
    v_hat = fftn(v)
    out = np.einsum("ia,qabd->qibd", E, v_hat, optimize=True)
    out = np.einsum("jb,qibd->qijd", E, out, optimize=True)
    out = np.einsum("kd,qijd->qijk", E, out, optimize=True)
    return epsilon**1.5 * out


def scaling_trial_energy(v: np.ndarray, epsilon: float, pot: PotentialSet, p: PhysParams) -> float:
    """``E(v_eps)`` for the dilated trial state ``v_eps(x) = eps^{3/2} v(eps x)``."""
    if abs(norm(v, pot.grid) - 1.0) > 1e-8:
        raise ValueError("scaling_trial_energy needs a normalized v")
    return energy_E(rescale(v, epsilon, pot.grid), pot, p)
