"""Periodic-box pseudospectral machinery for 3D spinor fields.

Fields are plain ``numpy`` arrays of shape ``(ncomp, n, n, n)`` indexed
``[component, ix, iy, iz]`` on the box ``[-L, L)^3``.  Fourier coefficients use
the unnormalized ``scipy.fft`` convention, so Parseval reads
``sum |u|^2 h^3 == (h^3 / n^3) sum |u_hat|^2``.  Multipliers are sampled at the
angular frequencies ``xi = (pi / L) * k`` with integer ``k`` in ``[-n/2, n/2)``;
this is the discrete analogue of the unitary angular-frequency transform, and
any Fourier multiplier ``m(xi)`` acts on a plane wave ``exp(i xi.x)`` as
multiplication by ``m(xi)``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft

__all__ = [
    "GridSpec",
    "PhysParams",
    "fftn",
    "ifftn",
    "lambda_xi",
    "dirac_symbol",
    "apply_dirac",
    "project_pm",
    "fw_transform",
    "frac_laplacian_quarter",
    "norm",
    "inner",
    "sigma_dot",
    "ALPHA",
    "BETA",
]

SIGMA = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
BETA = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)
ALPHA = tuple(np.block([[np.zeros((2, 2)), s], [s, np.zeros((2, 2))]]) for s in SIGMA)


def _workers() -> int:
    return int(os.environ.get("DIRACLIMIT_WORKERS", "1"))


def fftn(u: np.ndarray) -> np.ndarray:
    """Forward transform over the three trailing (spatial) axes."""
    return scipy.fft.fftn(u, axes=(-3, -2, -1), workers=_workers())


def ifftn(u_hat: np.ndarray) -> np.ndarray:
    return scipy.fft.ifftn(u_hat, axes=(-3, -2, -1), workers=_workers())


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid with ``n`` points per axis on ``[-L, L)^3``."""

    n: int = 48
    half_width: float = 12.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise ValueError(f"grid n must be an even integer >= 8, got {self.n}")
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise ValueError(f"half_width must be positive, got {self.half_width}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def cell_volume(self) -> float:
        return self.spacing**3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.n)

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        a = self.axis
        return np.meshgrid(a, a, a, indexing="ij", sparse=True)

    @cached_property
    def radius(self) -> np.ndarray:
        """Distance to the origin; inside the box this is the minimum-image distance."""
        x, y, z = self.coords
        return np.sqrt(x**2 + y**2 + z**2)

    @cached_property
    def index(self) -> np.ndarray:
        """Signed integer frequency index per axis, in FFT order."""
        return np.rint(np.fft.fftfreq(self.n) * self.n).astype(int)

    @cached_property
    def freq_axis(self) -> np.ndarray:
        return (math.pi / self.half_width) * self.index

    @cached_property
    def xi(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        k = self.freq_axis
        return np.meshgrid(k, k, k, indexing="ij", sparse=True)

    @cached_property
    def xi2(self) -> np.ndarray:
        kx, ky, kz = self.xi
        return kx**2 + ky**2 + kz**2

    @cached_property
    def xi_abs(self) -> np.ndarray:
        return np.sqrt(self.xi2)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keeps modes with ``|k| < n/3`` on every axis."""
        keep = np.abs(self.index) < self.n / 3
        return keep[:, None, None] & keep[None, :, None] & keep[None, None, :]

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(values) * self.cell_volume)

    def spectral_sum(self, weight: np.ndarray, u_hat: np.ndarray) -> float:
        """``sum_k weight(k) |u_hat(k)|^2`` scaled to match a real-space integral."""
        dens = np.sum(np.abs(u_hat) ** 2, axis=0) if u_hat.ndim == 4 else np.abs(u_hat) ** 2
        return float(np.sum(weight * dens) * self.cell_volume / self.n**3)


@dataclass(frozen=True)
class PhysParams:
    """Mass, light speed and nonlinearity exponents.

    The exponent windows are the ones under which the normalized solutions
    exist: ``kappa in [2, 7/3)``, ``s in (2, 8/3]``, ``mu in (0, (10-3s)/2)``,
    ``tau in (0, 7-3kappa)``.
    """

    m: float = 1.0
    c: float = 8.0
    kappa: float = 2.0
    s: float = 2.5
    a: float = 1.0
    mu: float = 1.0
    tau: float = 0.5
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        if not self.validate:
            return
        for key in ("m", "c", "a"):
            if not getattr(self, key) > 0:
                raise ValueError(f"{key} must be > 0, got {getattr(self, key)}")
        for key, value, lo, hi, lo_closed, hi_closed in self.windows():
            ok_lo = value >= lo if lo_closed else value > lo
            ok_hi = value <= hi if hi_closed else value < hi
            if not (ok_lo and ok_hi):
                lb = "[" if lo_closed else "("
                rb = "]" if hi_closed else ")"
                raise ValueError(f"{key}={value} outside admissible window {lb}{lo:g}, {hi:g}{rb}")

    def windows(self):
        """``(name, value, lo, hi, lo_closed, hi_closed)`` for each exponent."""
        return [
            ("kappa", self.kappa, 2.0, 7.0 / 3.0, True, False),
            ("s", self.s, 2.0, 8.0 / 3.0, False, True),
            ("mu", self.mu, 0.0, (10.0 - 3.0 * self.s) / 2.0, False, False),
            ("tau", self.tau, 0.0, 7.0 - 3.0 * self.kappa, False, False),
        ]

    @property
    def rest_energy(self) -> float:
        return self.m * self.c**2

    def with_c(self, c: float) -> "PhysParams":
        return PhysParams(self.m, c, self.kappa, self.s, self.a, self.mu, self.tau, self.validate)


def lambda_xi(xi, p: PhysParams):
    """Positive branch of the free Dirac spectrum, ``sqrt(m^2 c^4 + c^2 |xi|^2)``."""
    xi = np.asarray(xi, dtype=float)
    xi2 = np.sum(xi**2, axis=-1) if xi.ndim else xi**2
    return np.sqrt(p.m**2 * p.c**4 + p.c**2 * xi2)


def dirac_symbol(xi, p: PhysParams) -> np.ndarray:
    """4x4 Fourier symbol of the free Dirac operator at a single frequency."""
    xi = np.asarray(xi, dtype=float)
    out = p.m * p.c**2 * BETA.copy()
    for k in range(3):
        out = out + p.c * xi[k] * ALPHA[k]
    return out


def sigma_dot(kx, ky, kz, v0, v1):
    """``(sigma . k) v`` for a two-spinor given componentwise."""
    return kz * v0 + (kx - 1j * ky) * v1, (kx + 1j * ky) * v0 - kz * v1


def _symbol_apply(u_hat: np.ndarray, grid: GridSpec, p: PhysParams) -> np.ndarray:
    kx, ky, kz = grid.xi
    mc2 = p.m * p.c**2
    s_lo = sigma_dot(kx, ky, kz, u_hat[2], u_hat[3])
    s_up = sigma_dot(kx, ky, kz, u_hat[0], u_hat[1])
    return np.stack(
        [
            mc2 * u_hat[0] + p.c * s_lo[0],
            mc2 * u_hat[1] + p.c * s_lo[1],
            p.c * s_up[0] - mc2 * u_hat[2],
            p.c * s_up[1] - mc2 * u_hat[3],
        ]
    )


def _check_spinor(u: np.ndarray, grid: GridSpec, ncomp: int | None = 4) -> None:
    if u.shape[-3:] != grid.shape or (ncomp is not None and u.shape[0] != ncomp):
        raise ValueError(f"field of shape {u.shape} does not live on a {grid.n}^3 grid with {ncomp} components")


def lambda_grid(grid: GridSpec, p: PhysParams) -> np.ndarray:
    return np.sqrt(p.m**2 * p.c**4 + p.c**2 * grid.xi2)


def apply_dirac_hat(u_hat: np.ndarray, grid: GridSpec, p: PhysParams) -> np.ndarray:
    return _symbol_apply(u_hat, grid, p)


def apply_dirac(u: np.ndarray, grid: GridSpec, p: PhysParams) -> np.ndarray:
    """Free Dirac operator ``-i c alpha.grad + m c^2 beta`` applied spectrally."""
    _check_spinor(u, grid)
    return ifftn(_symbol_apply(fftn(u), grid, p))


def project_pm_hat(u_hat: np.ndarray, grid: GridSpec, p: PhysParams, sign: int) -> np.ndarray:
    lam = lambda_grid(grid, p)
    return 0.5 * (u_hat + sign * _symbol_apply(u_hat, grid, p) / lam)


def project_pm(u: np.ndarray, grid: GridSpec, p: PhysParams, sign: int | str) -> np.ndarray:
    """Spectral projector onto the positive (``+``) or negative (``-``) energy subspace."""
    _check_spinor(u, grid)
    sgn = _sign(sign)
    return ifftn(project_pm_hat(fftn(u), grid, p, sgn))


def _sign(sign) -> int:
    if sign in (1, "+", "plus"):
        return 1
    if sign in (-1, "-", "minus"):
        return -1
    raise ValueError(f"sign must be '+' or '-', got {sign!r}")


def fw_transform_hat(u_hat: np.ndarray, grid: GridSpec, p: PhysParams, inverse: bool = False) -> np.ndarray:
    lam = lambda_grid(grid, p)
    mc2 = p.m * p.c**2
    ups_plus = np.sqrt(0.5 * (1.0 + mc2 / lam))
    ups_minus = np.sqrt(np.maximum(0.5 * (1.0 - mc2 / lam), 0.0))
    xi_abs = grid.xi_abs
    # Upsilon_-(0) = 0 removes the 0/0 of alpha.xi/|xi| at the zero mode.
    coef = np.divide(ups_minus, xi_abs, out=np.zeros_like(xi_abs), where=xi_abs > 0)
    if inverse:
        coef = -coef
    kx, ky, kz = grid.xi
    s_lo = sigma_dot(kx, ky, kz, u_hat[2], u_hat[3])
    s_up = sigma_dot(kx, ky, kz, u_hat[0], u_hat[1])
    # beta (alpha.xi) = [[0, sigma.xi], [-sigma.xi, 0]]
    return np.stack(
        [
            ups_plus * u_hat[0] + coef * s_lo[0],
            ups_plus * u_hat[1] + coef * s_lo[1],
            ups_plus * u_hat[2] - coef * s_up[0],
            ups_plus * u_hat[3] - coef * s_up[1],
        ]
    )


def fw_transform(u: np.ndarray, grid: GridSpec, p: PhysParams, direction: str = "forward") -> np.ndarray:
    """Foldy-Wouthuysen transform; ``forward`` block-diagonalizes the Dirac operator."""
    _check_spinor(u, grid)
    if direction not in ("forward", "inverse"):
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    return ifftn(fw_transform_hat(fftn(u), grid, p, inverse=direction == "inverse"))


def frac_laplacian_quarter(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """``(-Delta)^{1/4}`` applied componentwise (multiplier ``|xi|^{1/2}``)."""
    return ifftn(np.sqrt(grid.xi_abs) * fftn(u))


def gradient(u: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    u_hat = fftn(u)
    return tuple(ifftn(1j * k * u_hat) for k in grid.xi)


def laplacian(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    return ifftn(-grid.xi2 * fftn(u))


def inner(u: np.ndarray, v: np.ndarray, grid: GridSpec) -> complex:
    """``<u, v>_{L^2}``, conjugate-linear in the first slot."""
    return complex(np.vdot(u, v) * grid.cell_volume)


def norm(
    u: np.ndarray,
    grid: GridSpec,
    which: str = "L2",
    *,
    p: float | None = None,
    params: PhysParams | None = None,
) -> float:
    """Quadrature norms of a multi-component field.

    ``which`` is one of ``L2``, ``Lp`` (exponent ``p``), ``H1``, ``H12`` or
    ``C`` (the Dirac energy norm ``||u||_c``; needs ``params``).
    """
    if not np.all(np.isfinite(u)):
        raise FloatingPointError("norm of a nonfinite field")
    u = u if u.ndim == 4 else u[None]
    if which == "L2":
        return math.sqrt(grid.integrate(np.abs(u) ** 2))
    if which == "Lp":
        if p is None or not 1 <= p < math.inf:
            raise ValueError(f"Lp norm needs a finite exponent p >= 1, got {p}")
        mod = np.sqrt(np.sum(np.abs(u) ** 2, axis=0))
        return grid.integrate(mod**p) ** (1.0 / p)
    u_hat = fftn(u)
    if which == "H1":
        return math.sqrt(grid.spectral_sum(1.0 + grid.xi2, u_hat))
    if which == "H12":
        return math.sqrt(grid.spectral_sum(np.sqrt(1.0 + grid.xi2), u_hat))
    if which in ("C", "C_norm"):
        if params is None:
            raise ValueError("the c-norm needs PhysParams")
        return math.sqrt(grid.spectral_sum(lambda_grid(grid, params), u_hat))
    raise ValueError(f"unknown norm {which!r}")
