"""Potentials, Hartree/local nonlinear terms and the Dirac energy functional.

The nonlocal term is ``Gamma * (K |u|^kappa) K |u|^(kappa-2) u`` with
``Gamma(x) = |x|^-tau``; the local term is ``P |u|^(s-2) u``.  Here ``|u|`` is
the pointwise Euclidean norm over spinor components, so every routine in this
module works for 2- and 4-component fields alike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .spectral import GridSpec, PhysParams, apply_dirac_hat, fftn, ifftn

__all__ = [
    "PotentialSet",
    "build_potentials",
    "gamma_multiplier",
    "gamma_real_kernel",
    "convolve_gamma",
    "hartree_term",
    "local_term",
    "hartree_energy",
    "local_energy",
    "kinetic_dirac",
    "energy_Ic",
    "grad_Ic",
    "energy_and_grad_Ic",
    "multiplier_omega",
]


@dataclass(frozen=True, eq=False)
class PotentialSet:
    """Sampled ``K``, ``P`` and the Fourier multiplier of convolution with ``Gamma``."""

    grid: GridSpec
    K: np.ndarray
    P: np.ndarray
    gamma_hat: np.ndarray

    @property
    def hartree_on(self) -> bool:
        return bool(np.any(self.K))

    @property
    def local_on(self) -> bool:
        return bool(np.any(self.P))

    def without(self, hartree: bool = False, local: bool = False) -> "PotentialSet":
        """Copy with the chosen nonlinear terms switched off (their weight set to 0)."""
        K = np.zeros_like(self.K) if hartree else self.K
        P = np.zeros_like(self.P) if local else self.P
        return PotentialSet(self.grid, K, P, self.gamma_hat)

    def linear(self) -> "PotentialSet":
        return self.without(hartree=True, local=True)


def gamma_multiplier(grid: GridSpec, tau: float, radius: float | None = None) -> np.ndarray:
    """Fourier multiplier of convolution with ``|x|^-tau`` truncated at ``radius`` (default L).

    The truncated kernel fits inside the periodic cell, so for densities that
    are negligible beyond ``L/2`` the periodic convolution reproduces the
    free-space one near the origin.  The multiplier is
    ``4 pi / |xi| int_0^R r^{1-tau} sin(|xi| r) dr``, evaluated once per distinct
    ``|xi|``; at ``xi = 0`` it is ``4 pi R^{3-tau} / (3-tau)``.  Unlike the
    untruncated transform it changes sign at high frequencies.
    """
    if not 0 < tau < 3:
        raise ValueError(f"tau must lie in (0, 3) for a locally integrable kernel, got {tau}")
    R = grid.half_width if radius is None else float(radius)
    if not 0 < R <= grid.half_width:
        raise ValueError(f"truncation radius must lie in (0, L], got {R}")
    idx = grid.index
    k2 = idx[:, None, None] ** 2 + idx[None, :, None] ** 2 + idx[None, None, :] ** 2
    uniq, inv = np.unique(k2, return_inverse=True)
    vals = np.empty(uniq.size)
    for i, q in enumerate(uniq):
        if q == 0:
            vals[i] = 4.0 * math.pi * R ** (3.0 - tau) / (3.0 - tau)
            continue
        xi = math.pi / grid.half_width * math.sqrt(q)
        # algebraic weight near the origin (singular for tau > 1), sine weight beyond
        r0 = min(R, 1.0 / xi)
        integral, _ = quad(lambda r: xi * np.sinc(xi * r / math.pi), 0.0, r0, weight="alg", wvar=(2.0 - tau, 0.0))
        if r0 < R:
            integral += quad(lambda r: r ** (1.0 - tau), r0, R, weight="sin", wvar=xi, limit=200)[0]
        vals[i] = 4.0 * math.pi * integral / xi
    return vals[inv].reshape(k2.shape)


def gamma_real_kernel(grid: GridSpec, gamma_hat: np.ndarray) -> np.ndarray:
    """Real-space periodic kernel whose discrete transform is ``gamma_hat``.

    Index ``[i, j, k]`` holds the kernel at displacement ``h * (i, j, k)`` (mod the box).
    """
    return np.real(ifftn(gamma_hat)) / grid.cell_volume


def build_potentials(grid: GridSpec, p: PhysParams, *, hartree: bool = True, local: bool = True) -> PotentialSet:
    """Sample ``K = exp(-a d)``, ``P = 1/(1 + d^mu)`` and the ``Gamma`` multiplier.

    ``d`` is the minimum-image distance to the origin.  Passing ``hartree=False``
    or ``local=False`` zeroes the corresponding weight.
    """
    if p.validate and not 0 < p.tau < 7 - 3 * p.kappa:
        raise ValueError(f"tau={p.tau} outside admissible window (0, {7 - 3 * p.kappa:g})")
    d = grid.radius
    K = np.exp(-p.a * d) if hartree else np.zeros(grid.shape)
    P = 1.0 / (1.0 + d**p.mu) if local else np.zeros(grid.shape)
    return PotentialSet(grid, K, P, gamma_multiplier(grid, p.tau))


def modulus(u: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(u.real**2 + u.imag**2, axis=0))


def _safe_power(mod: np.ndarray, expo: float) -> np.ndarray:
    if expo == 0:
        return np.ones_like(mod)
    return np.power(mod, expo, out=np.zeros_like(mod), where=mod > 0)


def convolve_gamma(rho: np.ndarray, pot: PotentialSet, dealias: bool = True) -> np.ndarray:
    """``Gamma * rho`` for a real density, 2/3-dealiased before the product."""
    rho_hat = fftn(rho)
    if dealias:
        rho_hat = rho_hat * pot.grid.dealias_mask
    return np.real(ifftn(pot.gamma_hat * rho_hat))


def _hartree_parts(u, pot, p, mod=None):
    mod = modulus(u) if mod is None else mod
    rho = pot.K * _safe_power(mod, p.kappa)
    V = convolve_gamma(rho, pot)
    return rho, V, mod


def hartree_term(u: np.ndarray, pot: PotentialSet, p: PhysParams) -> np.ndarray:
    if not pot.hartree_on:
        return np.zeros_like(u)
    _, V, mod = _hartree_parts(u, pot, p)
    return (V * pot.K * _safe_power(mod, p.kappa - 2.0)) * u


def local_term(u: np.ndarray, pot: PotentialSet, p: PhysParams) -> np.ndarray:
    """``P |u|^(s-2) u``, continuously extended by 0 where ``u`` vanishes."""
    if not pot.local_on:
        return np.zeros_like(u)
    return (pot.P * _safe_power(modulus(u), p.s - 2.0)) * u


def hartree_energy(u: np.ndarray, pot: PotentialSet, p: PhysParams) -> float:
    """``int Gamma*(K|u|^kappa) K|u|^kappa``."""
    if not pot.hartree_on:
        return 0.0
    rho, V, _ = _hartree_parts(u, pot, p)
    return pot.grid.integrate(V * rho)


def local_energy(u: np.ndarray, pot: PotentialSet, p: PhysParams) -> float:
    """``int P |u|^s``."""
    if not pot.local_on:
        return 0.0
    return pot.grid.integrate(pot.P * _safe_power(modulus(u), p.s))


def nonlinear_parts(u: np.ndarray, pot: PotentialSet, p: PhysParams):
    """Return ``(hartree energy, local energy, hartree field + local field)`` sharing work."""
    grid = pot.grid
    mod = modulus(u)
    e_h = 0.0
    weight = np.zeros(grid.shape)
    if pot.hartree_on:
        rho, V, _ = _hartree_parts(u, pot, p, mod)
        e_h = grid.integrate(V * rho)
        weight = weight + V * pot.K * _safe_power(mod, p.kappa - 2.0)
    e_l = 0.0
    if pot.local_on:
        ms2 = _safe_power(mod, p.s - 2.0)
        e_l = grid.integrate(pot.P * ms2 * mod**2)
        weight = weight + pot.P * ms2
    return e_h, e_l, weight * u


def kinetic_dirac(u: np.ndarray, grid: GridSpec, p: PhysParams) -> float:
    """``<u, D_c u>_{L^2}`` evaluated spectrally."""
    u_hat = fftn(u)
    val = np.vdot(u_hat, apply_dirac_hat(u_hat, grid, p))
    return float(val.real * grid.cell_volume / grid.n**3)


def _combine(kin, e_h, e_l, p):
    return kin - e_h / p.kappa - 2.0 * e_l / p.s


def energy_Ic(u: np.ndarray, pot: PotentialSet, p: PhysParams) -> float:
    """Dirac energy ``<u, D u> - (1/kappa) int Gamma*(K|u|^k)K|u|^k - (2/s) int P|u|^s``."""
    e_h = hartree_energy(u, pot, p)
    e_l = local_energy(u, pot, p)
    return _combine(kinetic_dirac(u, pot.grid, p), e_h, e_l, p)


def energy_and_grad_Ic(u: np.ndarray, pot: PotentialSet, p: PhysParams) -> tuple[float, np.ndarray]:
    """Energy and its L^2 gradient ``2 (D u - N(u))`` in one pass."""
    grid = pot.grid
    u_hat = fftn(u)
    Du_hat = apply_dirac_hat(u_hat, grid, p)
    kin = float(np.vdot(u_hat, Du_hat).real * grid.cell_volume / grid.n**3)
    e_h, e_l, nl = nonlinear_parts(u, pot, p)
    grad = 2.0 * (ifftn(Du_hat) - nl)
    return _combine(kin, e_h, e_l, p), grad


def grad_Ic(u: np.ndarray, pot: PotentialSet, p: PhysParams) -> np.ndarray:
    return energy_and_grad_Ic(u, pot, p)[1]


def multiplier_omega(u: np.ndarray, pot: PotentialSet, p: PhysParams, grad: np.ndarray | None = None) -> float:
    """Constraint multiplier ``omega(u) = Re<grad I(u), u> / 2`` on the unit sphere."""
    grid = pot.grid
    nrm2 = grid.integrate(np.abs(u) ** 2)
    if abs(math.sqrt(nrm2) - 1.0) > 1e-8:
        raise ValueError(f"multiplier_omega needs ||u||_L2 = 1, got {math.sqrt(nrm2):.12g}")
    if grad is None:
        grad = grad_Ic(u, pot, p)
    return 0.5 * float(np.vdot(u, grad).real * grid.cell_volume)
