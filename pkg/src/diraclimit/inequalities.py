"""Monte-Carlo ratio tests for the functional inequalities behind the existence theory.

Each ``check_*`` returns a :class:`RatioSample` whose ``ratio = lhs / rhs`` must
stay bounded over random band-limited fields.  Nothing here asserts a value for
the unknown constants; :func:`run_suite` only checks that the sample supremum
settles (doubling the sample moves it by at most 10%) and that the exact
homogeneity relations hold.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .nonlinearity import PotentialSet, _safe_power, convolve_gamma, hartree_energy, modulus
from .spectral import GridSpec, PhysParams, fftn, ifftn, norm, project_pm

__all__ = [
    "RatioSample",
    "RejectedSample",
    "random_field",
    "check_gn",
    "check_hartree_bound",
    "check_trilinear",
    "check_lipschitz",
    "check_splitting",
    "run_suite",
    "report_json",
]


class RejectedSample(ValueError):
    """The sample is degenerate for this inequality (zero field, 0/0, ...)."""


@dataclass(frozen=True)
class RatioSample:
    seed: int | None
    descriptor: str
    lhs: float
    rhs: float
    ratio: float

    def __post_init__(self):
        if not self.rhs > 0 or not math.isfinite(self.ratio):
            raise RejectedSample(f"{self.descriptor}: rhs={self.rhs}, ratio={self.ratio}")


def random_field(seed: int, grid: GridSpec, cutoff_fraction: float = 2 / 3, components: int = 4) -> np.ndarray:
    """Field whose Fourier coefficients are i.i.d. standard complex Gaussians up to the cutoff.

    Modes with ``|k_i| <= cutoff_fraction * n/2`` on every axis are kept; the
    rest are zero.  A vanishing cutoff keeps the zero mode only.
    """
    if not 0 <= cutoff_fraction <= 2 / 3 + 1e-15:
        raise ValueError(f"cutoff_fraction must lie in [0, 2/3], got {cutoff_fraction}")
    rng = np.random.default_rng(seed)
    kmax = math.floor(cutoff_fraction * grid.n / 2)
    keep1 = np.abs(grid.index) <= kmax
    keep = keep1[:, None, None] & keep1[None, :, None] & keep1[None, None, :]
    shape = (components,) + grid.shape
    coef = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    return ifftn(coef * keep)


def _quarter_norm(u: np.ndarray, grid: GridSpec) -> float:
    """``||(-Delta)^{1/4} u||_{L^2}``."""
    return math.sqrt(grid.spectral_sum(grid.xi_abs, fftn(u)))


def _nonzero(u, grid, what):
    if norm(u, grid) == 0:
        raise RejectedSample(f"{what} is the zero field")


def check_gn(u: np.ndarray, s: float, pot: PotentialSet, seed: int | None = None) -> RatioSample:
    """``int P|u|^s`` against ``||(-Delta)^{1/4}u||^{3s-6} ||u||^{6-2s}``."""
    if not 2 <= s <= 3:
        raise ValueError(f"s must lie in [2, 3], got {s}")
    grid = pot.grid
    _nonzero(u, grid, "u")
    lhs = grid.integrate(pot.P * modulus(u) ** s)
    rhs = _quarter_norm(u, grid) ** (3 * s - 6) * norm(u, grid) ** (6 - 2 * s)
    return RatioSample(seed, f"gn s={s}", lhs, rhs, lhs / rhs)


def check_hartree_bound(u: np.ndarray, pot: PotentialSet, p: PhysParams, seed: int | None = None) -> RatioSample:
    grid = pot.grid
    _nonzero(u, grid, "u")
    lhs = hartree_energy(u, pot, p)
    rhs = _quarter_norm(u, grid) ** 2 * norm(u, grid) ** (2 * p.kappa - 2)
    return RatioSample(seed, "hartree", lhs, rhs, lhs / rhs)


def _hartree_potential(u, pot, p):
    return convolve_gamma(pot.K * _safe_power(modulus(u), p.kappa), pot)


def check_trilinear(u, v, w, pot: PotentialSet, p: PhysParams, seed: int | None = None) -> RatioSample:
    """``int Gamma*(K|u|^k) K|u|^{k-2}|v||w|`` against ``||u||_2^{2k-3} ||u||_3 ||v||_2 ||w||_3``."""
    if not 2 <= p.kappa < 7 / 3:
        raise ValueError(f"kappa must lie in [2, 7/3), got {p.kappa}")
    grid = pot.grid
    for name, f in (("u", u), ("v", v), ("w", w)):
        _nonzero(f, grid, name)
    V = _hartree_potential(u, pot, p)
    lhs = grid.integrate(V * pot.K * _safe_power(modulus(u), p.kappa - 2) * modulus(v) * modulus(w))
    rhs = (
        norm(u, grid) ** (2 * p.kappa - 3)
        * norm(u, grid, "Lp", p=3)
        * norm(v, grid)
        * norm(w, grid, "Lp", p=3)
    )
    return RatioSample(seed, "trilinear", lhs, rhs, lhs / rhs)


def _hartree_map(u, pot, p):
    """``Gamma*(K|u|^k) K|u|^{k-1}``: a scalar field depending on ``|u|`` only."""
    return _hartree_potential(u, pot, p) * pot.K * _safe_power(modulus(u), p.kappa - 1)


def check_lipschitz(u1, u2, p_exp: float, pot: PotentialSet, p: PhysParams, seed: int | None = None) -> RatioSample:
    if not 2 <= p_exp <= 3:
        raise ValueError(f"p_exp must lie in [2, 3], got {p_exp}")
    grid = pot.grid
    diff = norm(u1 - u2, grid, "H12")
    if diff == 0:
        raise RejectedSample("u1 == u2")
    lhs = norm(_hartree_map(u1, pot, p) - _hartree_map(u2, pot, p), grid, "Lp", p=p_exp)
    rhs = (norm(u1, grid, "H12") + norm(u2, grid, "H12")) ** (2 * p.kappa - 2) * diff
    return RatioSample(seed, f"lipschitz p={p_exp}", lhs, rhs, lhs / rhs)


def check_splitting(u: np.ndarray, pot: PotentialSet, p: PhysParams, seed: int | None = None) -> dict:
    """Largest ``C`` with ``int P|u|^s >= C (int P|w|^s - ||u-||^2 ||w||_{H^1/2}^2 - ||u-||_{H^1/2}^2)``.

    ``w = P+u / ||P+u||`` and ``u- = P-u``.  When the bracket is not positive
    every ``C > 0`` works and ``C = inf`` is reported.
    """
    grid = pot.grid
    if abs(norm(u, grid) - 1.0) > 1e-8:
        raise ValueError("check_splitting needs ||u||_L2 = 1")
    up = project_pm(u, grid, p, +1)
    up_norm = norm(up, grid)
    if up_norm < 1e-12:
        raise RejectedSample("u has no positive-energy part")
    w = up / up_norm
    um = project_pm(u, grid, p, -1)
    lhs = grid.integrate(pot.P * modulus(u) ** p.s)
    terms = (
        grid.integrate(pot.P * modulus(w) ** p.s),
        norm(um, grid) ** 2 * norm(w, grid, "H12") ** 2,
        norm(um, grid, "H12") ** 2,
    )
    bracket = terms[0] - terms[1] - terms[2]
    C = lhs / bracket if bracket > 0 else math.inf
    return {"seed": seed, "lhs": lhs, "terms": list(terms), "C": C}


# ---------------------------------------------------------------------------
# Monte-Carlo driver


def _sample_field(base_seed: int, index: int, slot: int, grid: GridSpec, cutoff: float) -> np.ndarray:
    seed = int(np.random.default_rng([base_seed, index, slot]).integers(0, 2**63 - 1))
    u = random_field(seed, grid, cutoff)
    return u / norm(u, grid)


def _stability(values: list[float], n: int) -> float:
    first = max(values[:n])
    return max(values) / first if first > 0 else math.inf


def _homogeneity_gn(u, pot, p):
    a, b = check_gn(u, p.s, pot), check_gn(2 * u, p.s, pot)
    return max(abs(b.lhs / a.lhs - 2**p.s), abs(b.rhs / a.rhs - 2**p.s)) / 2**p.s


def _homogeneity_hartree(u, pot, p):
    a, b = check_hartree_bound(u, pot, p), check_hartree_bound(2 * u, pot, p)
    k = 2 ** (2 * p.kappa)
    return max(abs(b.lhs / a.lhs - k), abs(b.rhs / a.rhs - k)) / k


def _homogeneity_trilinear(u, v, w, pot, p):
    a, b = check_trilinear(u, v, w, pot, p), check_trilinear(u, 3 * v, w, pot, p)
    same = check_trilinear(u, u, u, pot, p)
    sub = abs(same.lhs - hartree_energy(u, pot, p)) / abs(same.lhs)
    return max(abs(b.lhs / a.lhs - 3), abs(b.rhs / a.rhs - 3)) / 3, sub


def _homogeneity_lipschitz(u1, u2, p_exp, pot, p):
    a = check_lipschitz(u1, u2, p_exp, pot, p)
    b = check_lipschitz(2 * u1, 2 * u2, p_exp, pot, p)
    k = 2 ** (2 * p.kappa - 1)
    # the map depends on |u| only, so a phase rotation leaves it unchanged
    phase = norm(_hartree_map(u1, pot, p) - _hartree_map(np.exp(0.7j) * u1, pot, p), pot.grid, "Lp", p=p_exp)
    scale = norm(_hartree_map(u1, pot, p), pot.grid, "Lp", p=p_exp)
    return max(abs(b.lhs / a.lhs - k), abs(b.rhs / a.rhs - k)) / k, phase / scale


def run_suite(
    pot: PotentialSet,
    p: PhysParams,
    seed: int = 0,
    n_samples: int = 500,
    growth_max: float = 1.10,
    homogeneity_tol: float = 1e-10,
    cutoff_fraction: float = 2 / 3,
) -> dict:
    """Draw ``2 * n_samples`` fields per check and report sup-stability and homogeneity.

    Stability compares the maximum ratio over all samples with the maximum
    over the first half.  For the splitting constant, whose interesting
    extreme is the infimum, the comparison is mirrored.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    grid = pot.grid
    total = 2 * n_samples
    ratios: dict[str, list[float]] = {k: [] for k in ("gn", "hartree", "trilinear", "lipschitz_p2", "lipschitz_p3")}
    homog: dict[str, float] = {k: 0.0 for k in ratios}
    split_C: list[float] = []
    rejected = 0
    for i in range(total):
        u = _sample_field(seed, i, 0, grid, cutoff_fraction)
        v = _sample_field(seed, i, 1, grid, cutoff_fraction)
        w = _sample_field(seed, i, 2, grid, cutoff_fraction)
        ratios["gn"].append(check_gn(u, p.s, pot, i).ratio)
        ratios["hartree"].append(check_hartree_bound(u, pot, p, i).ratio)
        ratios["trilinear"].append(check_trilinear(u, v, w, pot, p, i).ratio)
        ratios["lipschitz_p2"].append(check_lipschitz(u, v, 2.0, pot, p, i).ratio)
        ratios["lipschitz_p3"].append(check_lipschitz(u, v, 3.0, pot, p, i).ratio)
        try:
            split_C.append(check_splitting(u, pot, p, i)["C"])
        except RejectedSample:
            rejected += 1
        if i < 5:
            homog["gn"] = max(homog["gn"], _homogeneity_gn(u, pot, p))
            homog["hartree"] = max(homog["hartree"], _homogeneity_hartree(u, pot, p))
            h_tri, sub = _homogeneity_trilinear(u, v, w, pot, p)
            homog["trilinear"] = max(homog["trilinear"], h_tri, sub)
            for key, pe in (("lipschitz_p2", 2.0), ("lipschitz_p3", 3.0)):
                homog[key] = max(homog[key], *_homogeneity_lipschitz(u, v, pe, pot, p))

    report: dict = {"seed": seed, "n_samples": n_samples, "cutoff_fraction": cutoff_fraction, "checks": {}}
    for key, vals in ratios.items():
        stab = _stability(vals, n_samples)
        report["checks"][key] = {
            "samples": len(vals),
            "max_ratio": max(vals),
            "max_ratio_first_half": max(vals[:n_samples]),
            "stability_ratio": stab,
            "homogeneity_error": homog[key],
            "pass": bool(stab <= growth_max and homog[key] <= homogeneity_tol),
        }
    finite = [C for C in split_C[:n_samples] if math.isfinite(C)]
    finite_all = [C for C in split_C if math.isfinite(C)]
    if finite and finite_all:
        inf_half, inf_all = min(finite), min(finite_all)
        stab = inf_half / inf_all
        ok = inf_all > 0 and stab <= growth_max
    else:
        # every bracket non-positive: the inequality holds for all C > 0
        inf_half = inf_all = math.inf
        stab, ok = 1.0, True
    report["checks"]["splitting"] = {
        "samples": len(split_C),
        "rejected": rejected,
        "finite_constants": len(finite_all),
        "min_C": inf_all,
        "min_C_first_half": inf_half,
        "stability_ratio": stab,
        "pass": bool(ok),
    }
    report["pass"] = all(c["pass"] for c in report["checks"].values())
    return report


def report_json(report: dict) -> str:
    def clean(x):
        if isinstance(x, float) and not math.isfinite(x):
            return repr(x)
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, list):
            return [clean(v) for v in x]
        return x

    return json.dumps(clean(report), indent=2, sort_keys=True)

