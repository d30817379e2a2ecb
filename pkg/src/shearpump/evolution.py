"""Time-dependent Schrödinger evolution along slow deformation paths.

Scaled time ``s = t / tau`` runs over ``[0, 1]`` and ``i dU/ds = tau H(x(s), theta) U``
(``hbar = e = 1``).  Step propagators are exact exponentials of Hermitian
Magnus generators, so every step is unitary to rounding.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .berry import _band_list
from .errors import GapClosureError, UnitarityError
from .spectral import CLUSTER_TOL, Projection, check_band

__all__ = [
    "Schedule",
    "EvolutionResult",
    "IdentityReport",
    "AdiabaticityWarning",
    "evolve",
    "adiabatic_generator",
    "operator_identity_residual",
    "transported_charge_dynamical",
]

UNITARITY_TOL = 1e-8
CHUNK = 2048


class AdiabaticityWarning(RuntimeWarning):
    """The run is outside the regime where the adiabatic expansion applies."""


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    """A path ``x(s)``, ``s in [0, 1]``, traversed in scaled time ``tau``.

    ``x_dot`` is ``dx/ds``; when omitted it is taken by central differences
    of ``x_path``.  ``n_steps=None`` picks ``tau |H| ds < 0.1``.
    """

    tau: float
    x_path: Callable[[np.ndarray], np.ndarray]
    n_steps: Optional[int] = None
    x_dot: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    closed: bool = False

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        ends = np.abs(self.velocity(np.array([0.0, 1.0])))
        if ends.max() > 1e-10:
            raise ValueError(f"path must switch on and off smoothly; |x'(0)|, |x'(1)| = {ends}")

    def position(self, s):
        return np.asarray(self.x_path(np.asarray(s, dtype=float)), dtype=complex)

    def velocity(self, s):
        s = np.asarray(s, dtype=float)
        if self.x_dot is not None:
            return np.asarray(self.x_dot(s), dtype=complex)
        h = 1e-6
        return (self.position(s + h) - self.position(s - h)) / (2 * h)

    def with_tau(self, tau: float, n_steps: Optional[int] = None) -> "Schedule":
        return Schedule(tau, self.x_path, n_steps, self.x_dot, self.closed)

    @classmethod
    def circle(cls, eps: float, tau: float, n_steps: Optional[int] = None, center: complex = 0.0,
               orientation: int = 1) -> "Schedule":
        """One turn around ``|x - center| = eps`` with angular speed ``~ sin^2(pi s)``."""
        center = complex(center)

        def angle(s):
            return 2 * np.pi * orientation * (s - np.sin(2 * np.pi * s) / (2 * np.pi))

        def path(s):
            return center + eps * np.exp(1j * angle(s))

        def vel(s):
            rate = 2 * np.pi * orientation * (1 - np.cos(2 * np.pi * s))
            return 1j * rate * eps * np.exp(1j * angle(s))

        return cls(tau, path, n_steps, vel, closed=True)

    @classmethod
    def static(cls, x0: complex, tau: float, n_steps: Optional[int] = None) -> "Schedule":
        x0 = complex(x0)
        return cls(tau, lambda s: np.full(np.shape(s), x0, dtype=complex), n_steps,
                   lambda s: np.zeros(np.shape(s), dtype=complex), closed=True)


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------


@dataclass
class EvolutionResult:
    U: np.ndarray
    rho: Projection
    unitarity_defect: float
    s: np.ndarray
    current: np.ndarray  # Tr(rho d_theta H) at every grid point
    snapshots: dict = field(default_factory=dict, repr=False)  # step index -> rho

    def to_csv(self, residual: Optional[np.ndarray] = None, fh=None) -> str:
        """Columns ``s, current, residual`` at 17 significant digits."""
        res = np.full(self.s.shape, np.nan) if residual is None else np.asarray(residual)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "current", "residual"])
        for a, b, c in zip(self.s, self.current, res):
            w.writerow([f"{a:.17g}", f"{b:.17g}", f"{c:.17g}"])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def _expm_herm(K):
    """``exp(-i K)`` for a stack of Hermitian ``K``."""
    w, V = np.linalg.eigh(K)
    return (V * np.exp(-1j * w)[..., None, :]) @ np.conj(np.swapaxes(V, -1, -2))


def _prefix_products(steps):
    """``out[k] = steps[k] @ ... @ steps[0]`` by log-depth doubling."""
    out = steps.copy()
    d = 1
    n = out.shape[0]
    while d < n:
        out[d:] = out[d:] @ out[:-d]
        d *= 2
    return out


def _projector(model, x, theta, band):
    w, V = np.linalg.eigh(model.hamiltonian(x, theta))
    check_band(w, band)
    Vb = V[..., band]
    return Vb @ np.conj(np.swapaxes(Vb, -1, -2)), w


def _p_dot(model, x, xdot, theta, band, h=1e-5):
    """Directional derivative ``dP/ds = d_x P x' + d_xbar P conj(x')`` by central differences."""
    x = np.asarray(x, dtype=complex)
    xdot = np.asarray(xdot, dtype=complex)
    speed = np.abs(xdot)
    step = np.where(speed > 0, h / np.maximum(speed, 1e-300), 0.0)
    Pp, _ = _projector(model, x + step * xdot, theta, band)
    Pm, _ = _projector(model, x - step * xdot, theta, band)
    dP = (Pp - Pm) / np.where(step > 0, 2 * step, 1.0)[..., None, None]
    return np.where((speed > 0)[..., None, None], dP, 0.0)


def adiabatic_generator(model, x, x_dot, theta: float = 0.0, band: Sequence[int] = (0,),
                        tau: float = 1.0):
    """``H_A = H + (i / tau) [dP/ds, P]``, the generator that never leaves the band.

    Broadcasts over arrays of ``x`` and ``x_dot``.
    """
    band = _band_list(band, model.dim)
    x, x_dot = np.broadcast_arrays(np.asarray(x, dtype=complex), np.asarray(x_dot, dtype=complex))
    H = model.hamiltonian(x, theta)
    P, _ = _projector(model, x, theta, band)
    Pd = _p_dot(model, x, x_dot, theta, band)
    return H + (1j / tau) * (Pd @ P - P @ Pd)


def _generator(model, schedule, theta, s, adiabatic_band):
    x = schedule.position(s)
    if adiabatic_band is None:
        return model.hamiltonian(x, theta)
    return adiabatic_generator(model, x, schedule.velocity(s), theta, adiabatic_band, schedule.tau)


def _default_steps(model, schedule, theta):
    s = np.linspace(0, 1, 33)
    norm = np.max(np.abs(np.linalg.eigvalsh(model.hamiltonian(schedule.position(s), theta))))
    return int(np.ceil(10 * schedule.tau * max(norm, 1e-12)))


def evolve(model, schedule: Schedule, theta: float = 0.0, P0=(0,), order: int = 2,
           adiabatic_band: Optional[Sequence[int]] = None, snapshots: Sequence[int] = ()) -> EvolutionResult:
    """Propagate ``rho = U P0 U^dagger`` along ``schedule``.

    ``P0`` is a :class:`Projection` or a band index set (the spectral
    projection at ``x(0)``).  ``order=2`` is the exponential midpoint rule,
    ``order=4`` the two-point Gauss Magnus scheme.  With ``adiabatic_band``
    the generator is :func:`adiabatic_generator` for that band.  ``snapshots``
    lists grid indices at which ``rho`` is stored.
    """
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    n = schedule.n_steps or _default_steps(model, schedule, theta)
    if isinstance(P0, Projection):
        P0m = np.asarray(P0.matrix, dtype=complex)
    else:
        P0m, _ = _projector(model, schedule.position(0.0), theta, _band_list(P0, model.dim))
    tau, ds = schedule.tau, 1.0 / n
    s_grid = np.arange(n + 1) * ds
    dH = model.d_theta(schedule.position(s_grid), theta)
    want = set(int(k) for k in snapshots)
    current = np.empty(n + 1)
    store = {}
    U = np.eye(model.dim, dtype=complex)
    current[0] = np.real(np.trace(P0m @ dH[0]))
    if 0 in want:
        store[0] = P0m.copy()
    for start in range(0, n, CHUNK):
        k = np.arange(start, min(start + CHUNK, n))
        if order == 2:
            Hm = _generator(model, schedule, theta, (k + 0.5) * ds, adiabatic_band)
            K = tau * ds * Hm
        else:
            c = np.sqrt(3) / 6
            H1 = _generator(model, schedule, theta, (k + 0.5 - c) * ds, adiabatic_band)
            H2 = _generator(model, schedule, theta, (k + 0.5 + c) * ds, adiabatic_band)
            comm = H2 @ H1 - H1 @ H2
            K = 0.5 * tau * ds * (H1 + H2) - 1j * (np.sqrt(3) / 12) * (tau * ds) ** 2 * comm
            K = 0.5 * (K + np.conj(np.swapaxes(K, -1, -2)))
        Us = _prefix_products(_expm_herm(K)) @ U
        rho = Us @ P0m @ np.conj(np.swapaxes(Us, -1, -2))
        current[k + 1] = np.real(np.einsum("kij,kji->k", rho, dH[k + 1]))
        for j in want.intersection(range(start + 1, k[-1] + 2)):
            store[j] = rho[j - start - 1]
        U = Us[-1]
    defect = float(np.linalg.norm(np.conj(U.T) @ U - np.eye(model.dim)))
    if defect > UNITARITY_TOL:
        raise UnitarityError(f"unitarity defect {defect:.3g}; increase n_steps")
    rho_end = U @ P0m @ np.conj(U.T)
    rank = int(round(np.real(np.trace(P0m))))
    return EvolutionResult(U, Projection(rho_end, rank), defect, s_grid, current, store)


# ---------------------------------------------------------------------------
# operator identity
# ---------------------------------------------------------------------------


@dataclass
class IdentityReport:
    taus: np.ndarray
    max_residual: np.ndarray
    slope: Optional[float]
    slope_halfwidth: Optional[float]
    min_gap: float
    sample_s: np.ndarray
    residuals: np.ndarray = field(repr=False)  # (n_tau, n_sample)
    annotations: list = field(default_factory=list)


def _min_gap(model, schedule, theta, band, n=257):
    w = np.linalg.eigvalsh(model.hamiltonian(schedule.position(np.linspace(0, 1, n)), theta))
    inside = np.zeros(model.dim, dtype=bool)
    inside[band] = True
    edges = np.nonzero(inside[1:] != inside[:-1])[0]
    if edges.size == 0:
        return np.inf
    return float(np.min(w[:, edges + 1] - w[:, edges]))


def identity_rhs(model, x, x_dot, theta, band, tau, h=1e-5):
    """``tau P (d_theta H) P + i P [dP/ds, d_theta P] P`` (the spectral side of the identity)."""
    P, _ = _projector(model, x, theta, band)
    Pp, _ = _projector(model, x, theta + h, band)
    Pm, _ = _projector(model, x, theta - h, band)
    dtP = (Pp - Pm) / (2 * h)
    Pd = _p_dot(model, x, x_dot, theta, band)
    X = model.d_theta(x, theta)
    return tau * P @ X @ P + 1j * P @ (Pd @ dtP - dtP @ Pd) @ P


def operator_identity_residual(model, schedule: Schedule, theta: float = 0.0, band: Sequence[int] = (0,),
                               taus: Optional[Sequence[float]] = None, n_samples: int = 17,
                               order: int = 2) -> IdentityReport:
    """Residual of ``tau rho X rho = tau P X P + i P [P', d_theta P] P`` versus ``tau``.

    ``X = d_theta H``.  The residual (Frobenius norm) is sampled at
    ``n_samples`` interior points of the path; its maximum is fitted against
    ``tau`` on log-log axes.  ``taus`` defaults to ``{500, 1000, 2000, 4000} / gap``.
    """
    band = _band_list(band, model.dim)
    gap = _min_gap(model, schedule, theta, band)
    if gap < CLUSTER_TOL:
        raise GapClosureError(f"gap closes along the path (min {gap:.3g})")
    if taus is None:
        taus = np.array([500, 1000, 2000, 4000]) / gap
    taus = np.asarray(taus, dtype=float)
    s_samples = (np.arange(n_samples) + 1) / (n_samples + 1)
    x = schedule.position(s_samples)
    xd = schedule.velocity(s_samples)
    res = np.empty((taus.size, n_samples))
    notes = []
    for i, tau in enumerate(taus):
        if tau * gap < 10:
            notes.append(f"tau*gap={tau * gap:.3g} < 10: outside the adiabatic regime")
        sched = schedule.with_tau(tau)
        n = sched.n_steps or _default_steps(model, sched, theta)
        # snap samples onto the step grid
        idx = np.rint(s_samples * n).astype(int)
        out = evolve(model, Schedule(tau, sched.x_path, n, sched.x_dot, sched.closed), theta, band,
                     order=order, snapshots=idx)
        s_used = idx / n
        rhs = identity_rhs(model, schedule.position(s_used), schedule.velocity(s_used), theta, band, tau)
        X = model.d_theta(schedule.position(s_used), theta)
        rho = np.stack([out.snapshots[j] for j in idx])
        lhs = tau * rho @ X @ rho
        res[i] = np.linalg.norm(lhs - rhs, axis=(-2, -1))
    peak = res.max(axis=1)
    slope = half = None
    if taus.size >= 2 and np.all(peak > 0):
        coef, cov = np.polyfit(np.log(taus), np.log(peak), 1, cov=True) if taus.size > 2 else (
            np.polyfit(np.log(taus), np.log(peak), 1), None)
        slope = float(coef[0])
        half = float(2 * np.sqrt(cov[0, 0])) if cov is not None else None
    return IdentityReport(taus, peak, slope, half, gap, s_samples, res, notes)


def transported_charge_dynamical(model, schedule: Schedule, theta: float = 0.0,
                                 band: Sequence[int] = (0,), order: int = 2) -> float:
    """``Q = -2 pi int dt Tr(rho d_theta H)`` over one traversal of a closed schedule."""
    band = _band_list(band, model.dim)
    if not schedule.closed:
        p0, p1 = schedule.position(np.array([0.0, 1.0]))
        if abs(p1 - p0) > 1e-9:
            raise ValueError("schedule is not a closed cycle")
    gap = _min_gap(model, schedule, theta, band)
    if gap < CLUSTER_TOL:
        raise GapClosureError(f"gap closes along the path (min {gap:.3g})")
    if schedule.tau * gap < 1e2:
        warnings.warn(
            f"tau*gap = {schedule.tau * gap:.3g}: adiabatic transport is not reliable", AdiabaticityWarning,
            stacklevel=2)
    out = evolve(model, schedule, theta, band, order=order)
    ds = out.s[1] - out.s[0]
    integral = ds * (out.current.sum() - 0.5 * (out.current[0] + out.current[-1]))
    return float(-2 * np.pi * schedule.tau * integral)
