"""Helical chains as direct integrals over Bloch momentum.

The Bloch Hamiltonian at momentum ``theta`` is the flux-threaded ring
``NecklaceModel(spec).hamiltonian(x, theta)``.  Gap ``k`` (1-based) separates
band ``k-1`` from band ``k`` (0-based levels); the filled set below it is
``range(k)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .berry import curvature_traces
from .errors import ConvergenceError, GapClosureError, ModelError, QuantizationError
from .loop import DeformationLoop
from .model import NecklaceModel, NecklaceSpec
from .spectral import CLUSTER_TOL

__all__ = [
    "BandStructure",
    "ChernRecord",
    "band_structure",
    "floquet_symmetry_check",
    "axial_curvature_integral",
    "chern_number",
    "chern_numbers",
    "pump_charge",
    "gap_opening_order",
    "gap_opening_slope",
    "band_edge_gaps",
    "table_order",
    "table_chern",
    "pump_rule",
]


# ---------------------------------------------------------------------------
# closed-form table
# ---------------------------------------------------------------------------


def _check_gap(p: int, gap_index: int) -> None:
    if not 1 <= gap_index <= p - 1:
        raise ModelError(f"gap index must be in 1..{p - 1}, got {gap_index}")


def table_order(p: int, gap_index: int) -> int:
    """Perturbative order at which gap ``gap_index`` opens under shear."""
    _check_gap(p, gap_index)
    j, odd = divmod(gap_index, 2)
    return (p - 1) // 2 - j if odd else j


def table_chern(p: int, gap_index: int) -> int:
    """Chern number of gap ``gap_index`` for a counterclockwise shear cycle."""
    _check_gap(p, gap_index)
    j, odd = divmod(gap_index, 2)
    return -(p - 1) // 2 + j if odd else j


def pump_rule(p: int, q: int) -> int:
    """Charge per cycle with ``q`` electrons per pitch: ``q/2`` or ``-(p-q)/2``."""
    _check_gap(p, q)
    return q // 2 if q % 2 == 0 else -(p - q) // 2


# ---------------------------------------------------------------------------
# band structure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BandStructure:
    p: int
    x: complex
    grid: np.ndarray
    energies: np.ndarray  # (p, n_theta)
    gaps: np.ndarray  # (p-1,) band gaps, min of band k minus max of band k-1

    def to_csv(self, fh=None) -> str:
        """Columns ``theta, E_1..E_p`` at 17 significant digits."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta"] + [f"E_{k + 1}" for k in range(self.p)])
        for j, t in enumerate(self.grid):
            w.writerow([f"{t:.17g}"] + [f"{e:.17g}" for e in self.energies[:, j]])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def band_structure(spec: NecklaceSpec, x: complex = 0.0, n_theta: int = 256) -> BandStructure:
    """Spectrum of the Bloch Hamiltonian on ``theta = -pi + 2 pi k / n_theta``."""
    if n_theta < 64:
        raise ModelError("n_theta must be at least 64")
    grid = -np.pi + 2 * np.pi * np.arange(n_theta) / n_theta
    w = np.linalg.eigvalsh(NecklaceModel(spec).hamiltonian(complex(x), grid))
    gaps = w[:, 1:].min(axis=0) - w[:, :-1].max(axis=0)
    return BandStructure(spec.p, complex(x), grid, w.T.copy(), gaps)


def floquet_symmetry_check(spec: NecklaceSpec, x: complex = 0.0) -> float:
    """``||H(x,0) U + U H(x,pi)||`` with ``U = diag((-1)^j)``.

    Also raises :class:`ConvergenceError` if the spectra at ``0`` and ``pi``
    are not mirror images to 1e-11.
    """
    if spec.p % 2 == 0:
        raise ModelError("the momentum-pi mirror symmetry needs odd p")
    model = NecklaceModel(spec)
    H0, Hpi = model.hamiltonian(complex(x), np.array([0.0, np.pi]))
    U = np.diag((-1.0) ** np.arange(1, spec.p + 1))
    residual = float(np.linalg.norm(H0 @ U + U @ Hpi))
    mirror = np.max(np.abs(np.linalg.eigvalsh(Hpi) + np.linalg.eigvalsh(H0)[::-1]))
    if mirror > 1e-11:
        raise ConvergenceError(f"spectra at theta=0 and pi are not mirrored (defect {mirror:.3g})")
    return residual


def band_edge_gaps(spec: NecklaceSpec, x) -> np.ndarray:
    """True band gaps from the band edges at ``theta in {0, pi}``; shape ``x.shape + (p-1,)``."""
    x = np.asarray(x, dtype=complex)
    w = np.linalg.eigvalsh(NecklaceModel(spec).hamiltonian(x[..., None], np.array([0.0, np.pi])))
    return w[..., 1:].min(axis=-2) - w[..., :-1].max(axis=-2)


# ---------------------------------------------------------------------------
# axial curvature integral
# ---------------------------------------------------------------------------


def _graded_nodes(order: int, depth: int = 48):
    """Gauss-Legendre nodes on ``[-pi, pi]`` graded geometrically toward ``0`` and ``+-pi``."""
    gx, gw = np.polynomial.legendre.leggauss(order)
    half = np.pi / 2
    edges = half * 2.0 ** -np.arange(depth + 1)
    edges = np.append(edges, 0.0)  # [half, half/2, ..., 0]
    lo, hi = edges[1:], edges[:-1]
    t = (0.5 * (hi - lo))[:, None] * gx[None, :] + (0.5 * (hi + lo))[:, None]
    w = (0.5 * (hi - lo))[:, None] * gw[None, :]
    t, w = t.ravel(), w.ravel()
    # distance from a singular point: mirror onto the four quarter intervals
    nodes = np.concatenate([t, -t, np.pi - t, -np.pi + t])
    weights = np.concatenate([w, w, w, w])
    return nodes, weights


def axial_curvature_integral(spec: NecklaceSpec, x: complex, band: Sequence[int],
                             n_theta: int = 256, quadrature: str = "graded",
                             fd_step: float = 1e-5, flux_bond: Optional[int] = None) -> complex:
    """``(1/2 pi) int Tr Omega_{theta x}(P(x, theta)) d theta`` over the Brillouin zone.

    ``quadrature="graded"`` uses Gauss-Legendre panels that shrink
    geometrically toward the band-edge momenta ``0`` and ``+-pi`` where the
    curvature peaks (``n_theta // 16`` nodes per panel, panels down to a
    hundredth of the peak width); ``"uniform"`` is the periodic trapezoid
    rule on ``n_theta`` points.

    The integrand depends on the momentum gauge through an ``x``-derivative
    (which drops out of any closed-loop integral); ``flux_bond`` selects the
    gauge as in :class:`NecklaceModel`.
    """
    model = NecklaceModel(spec, flux_bond=flux_bond)
    band = sorted(set(int(b) for b in band))
    if len(band) in (0, spec.p):
        return 0j
    if quadrature == "graded":
        w_edge = np.linalg.eigvalsh(model.hamiltonian(complex(x), np.array([0.0, np.pi])))
        k = band[-1] + 1 if band[-1] + 1 < spec.p else band[0]
        edge_gap = max(float(np.min(np.abs(w_edge[:, k] - w_edge[:, k - 1]))), 1e-14)
        width = edge_gap * spec.p / spec.hopping.h1
        depth = int(np.clip(np.ceil(np.log2((np.pi / 2) / (1e-2 * width))), 6, 60))
        nodes, weights = _graded_nodes(max(4, n_theta // 16), depth)
    elif quadrature == "uniform":
        nodes = -np.pi + 2 * np.pi * np.arange(n_theta) / n_theta
        weights = np.full(n_theta, 2 * np.pi / n_theta)
    else:
        raise ValueError(f"unknown quadrature {quadrature!r}")
    w = np.linalg.eigvalsh(model.hamiltonian(complex(x), nodes))
    inside = np.zeros(spec.p, dtype=bool)
    inside[band] = True
    edges = np.nonzero(inside[1:] != inside[:-1])[0]
    gap = np.min(w[:, edges + 1] - w[:, edges], axis=1)
    if np.any(gap < CLUSTER_TOL):
        k = int(np.argmin(gap))
        raise GapClosureError(f"band gap closes ({gap[k]:.3g}) at momentum theta={nodes[k]:.17g}")
    curv = curvature_traces(model, complex(x), nodes, band, fd_step)
    return complex(np.sum(weights * curv) / (2 * np.pi))


# ---------------------------------------------------------------------------
# Chern numbers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChernRecord:
    gap_index: int
    opening_order: Optional[int]
    chern: int
    plaquette_field_residual: float
    n_s: int = 0
    n_theta: int = 0


def _momentum_grid(n_theta: int, min_gap: float, f_scale: float):
    """Uniform momenta plus geometric refinement around ``0`` and ``pi``.

    Band-edge crossings at small shear rotate the filled frame over a
    momentum window of width ``~ gap / f_scale``; the extra nodes keep every
    link between neighbouring frames well conditioned.
    """
    base = -np.pi + 2 * np.pi * np.arange(n_theta) / n_theta
    step = 2 * np.pi / n_theta
    width = max(min_gap / f_scale, 1e-12)
    extra = []
    d = 0.25 * width
    while d < step:
        extra.append(d)
        d *= 1.6
    extra = np.array(extra)
    pts = np.concatenate([base, extra, -extra, np.pi - extra, -np.pi + extra])
    pts = np.unique(np.round(np.mod(pts + np.pi, 2 * np.pi) - np.pi, 15))
    return pts


def _fhs(frames):
    """Plaquette phases of the filled frames on a periodic ``(n_s, n_t)`` grid."""
    Fh = np.conj(np.swapaxes(frames, -1, -2))
    u_s = np.linalg.det(Fh @ np.roll(frames, -1, axis=0))
    u_t = np.linalg.det(Fh @ np.roll(frames, -1, axis=1))
    loop = u_s * np.roll(u_t, -1, axis=0) * np.conj(np.roll(u_s, -1, axis=1)) * np.conj(u_t)
    links = np.minimum(np.abs(u_s).min(), np.abs(u_t).min())
    return np.angle(loop), float(links)


def chern_number(spec: NecklaceSpec, gap_index: int, eps: float = 0.05, n_s: int = 48,
                 n_theta: int = 48, center: complex = 0.0, max_doublings: int = 3,
                 measure_order: bool = True) -> ChernRecord:
    """Chern number of the bands below ``gap_index`` over the torus (shear loop) x (momentum).

    The loop is the counterclockwise circle ``|x - center| = eps``.  The
    Fukui-Hatsugai-Suzuki plaquette sum is taken with the orientation that
    makes the result the charge pumped per cycle (the negative of the sum in
    ``(s, theta)`` order).  The grid doubles until every plaquette phase is
    below ``pi/3`` and every link determinant exceeds ``0.2``.
    """
    _check_gap(spec.p, gap_index)
    model = NecklaceModel(spec)
    filled = list(range(gap_index))
    last = None
    for _ in range(max_doublings + 1):
        loop = DeformationLoop.circle(eps, n_s, center=center)
        xs = loop.samples
        edge_gaps = band_edge_gaps(spec, xs)[:, gap_index - 1]
        min_gap = float(edge_gaps.min())
        if min_gap < CLUSTER_TOL:
            k = int(np.argmin(edge_gaps))
            raise GapClosureError(f"gap {gap_index} closes on the loop at x={complex(xs[k])}")
        thetas = _momentum_grid(n_theta, min_gap, spec.hopping.h1 / spec.p)
        w, V = np.linalg.eigh(model.hamiltonian(xs[:, None], thetas[None, :]))
        gaps = w[..., gap_index] - w[..., gap_index - 1]
        if gaps.min() < CLUSTER_TOL:
            i, j = np.unravel_index(np.argmin(gaps), gaps.shape)
            raise GapClosureError(
                f"gap {gap_index} closes at x={complex(xs[i])}, theta={thetas[j]:.17g}"
            )
        phases, link_min = _fhs(V[..., filled])
        total = -phases.sum() / (2 * np.pi)
        chern = int(np.rint(total))
        residual = abs(total - chern)
        last = (chern, residual, n_s, thetas.size)
        if np.abs(phases).max() < np.pi / 3 and link_min > 0.2 and residual < 1e-6:
            break
        n_s, n_theta = 2 * n_s, 2 * n_theta
    else:
        raise QuantizationError(
            f"plaquette sum for gap {gap_index} not settled (residual {last[1]:.3g}); refine the grid"
        )
    order = None
    if measure_order:
        try:
            order = gap_opening_order(spec, gap_index)
        except ConvergenceError:
            order = None
    return ChernRecord(gap_index, order, chern, float(residual), last[2], last[3])


def chern_numbers(spec: NecklaceSpec, eps: float = 0.05, **kw):
    """:func:`chern_number` for every gap ``1..p-1``."""
    return [chern_number(spec, k, eps, **kw) for k in range(1, spec.p)]


def pump_charge(spec: NecklaceSpec, q_electrons: int, eps: float = 0.05, **kw) -> int:
    """Charge per shear cycle with ``q_electrons`` per pitch (Fermi level in gap ``q``)."""
    _check_gap(spec.p, q_electrons)
    return chern_number(spec, q_electrons, eps, measure_order=False, **kw).chern


# ---------------------------------------------------------------------------
# gap opening order
# ---------------------------------------------------------------------------


DEFAULT_EPS_SWEEP = tuple(np.logspace(-3, -2, 6))


def gap_opening_slope(spec: NecklaceSpec, gap_index: int, eps_sweep=DEFAULT_EPS_SWEEP,
                      direction: complex = np.exp(0.3j)) -> float:
    """Log-log slope of the band gap width against the shear amplitude."""
    _check_gap(spec.p, gap_index)
    eps = np.asarray(eps_sweep, dtype=float)
    if eps.size < 2 or eps.max() / eps.min() < 10 * (1 - 1e-9):
        raise ModelError("eps sweep must span at least one decade")
    widths = band_edge_gaps(spec, eps * direction)[:, gap_index - 1]
    if np.any(widths <= 0):
        raise ConvergenceError(f"gap {gap_index} is not open over the whole sweep")
    return float(np.polyfit(np.log(eps), np.log(widths), 1)[0])


def gap_opening_order(spec: NecklaceSpec, gap_index: int, eps_sweep=DEFAULT_EPS_SWEEP,
                      direction: complex = np.exp(0.3j), tol: float = 0.1) -> int:
    """Nearest integer to :func:`gap_opening_slope`.

    Raises :class:`ConvergenceError` if the slope is more than ``tol`` from
    an integer, which signals contamination by higher orders in the shear.
    """
    slope = gap_opening_slope(spec, gap_index, eps_sweep, direction)
    order = int(np.rint(slope))
    if abs(slope - order) > tol or order < 1:
        raise ConvergenceError(
            f"gap {gap_index}: slope {slope:.3f} is not near an integer; use smaller eps"
        )
    return order
