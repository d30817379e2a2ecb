"""Adiabatic curvature, Longuet-Higgins phases and cycle charge transport.

A *model* is any object with ``dim`` and broadcasting methods
``hamiltonian(x, theta)``, ``d_theta(x, theta)`` and ``d_x(x, theta)``
(see :mod:`shearpump.model`).  Bands are index sets into the ascending
spectrum.

The curvature component returned everywhere is the trace of
``Omega_{theta x} = -i P [d_theta P, d_x P] P`` with the Wirtinger
derivative ``d_x = (d_1 - i d_2) / 2``.  Since the trace of the real-coordinate
curvature is real, ``Omega_{theta xbar} = conj(Omega_{theta x})`` and the
line element pairing the curvature with a path is
``Omega_{theta 1} dx_1 + Omega_{theta 2} dx_2 = 2 Re(Omega_{theta x} dx)``.
Charge (units of e, hbar = 1, flux in angle units) transported in one cycle is
``Q = -2 pi * 2 Re oint Tr Omega_{theta x} dx``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateDenominatorError,
    NotHermitianError,
    RefineLoopError,
    SplitDegeneracyError,
    StepInstabilityError,
)
from .loop import DeformationLoop
from .spectral import CLUSTER_TOL, check_band

__all__ = [
    "DeformationLoop",
    "CurvatureSample",
    "TransportReport",
    "curvature_trace",
    "curvature_traces",
    "curvature_sum_over_states",
    "longuet_higgins_phase",
    "holonomy_sign",
    "transport_cycle",
    "persistent_response",
]

FD_STEP = 1e-5
STEP_GAP_RATIO = 1e-2


@dataclass(frozen=True)
class CurvatureSample:
    x: complex
    theta_flux: float
    omega_theta_x: complex
    omega_theta_xbar: complex
    fd_step: float


@dataclass
class TransportReport:
    charge_e: float
    lh_phase: Optional[int]
    n_samples: int
    richardson_error: float
    samples: list = field(default_factory=list, repr=False)

    @property
    def curvature(self) -> np.ndarray:
        return np.array([c.omega_theta_x for c in self.samples])


# ---------------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------------


def _band_list(band, dim):
    band = sorted({int(b) for b in band})
    if any(b < 0 or b >= dim for b in band):
        raise IndexError(f"band {band} out of range for dimension {dim}")
    return band


def _boundary_gap(values, band):
    """Smallest spacing across the band boundary (inf for the full spectrum)."""
    dim = values.shape[-1]
    inside = np.zeros(dim, dtype=bool)
    inside[band] = True
    edges = np.nonzero(inside[1:] != inside[:-1])[0]
    if edges.size == 0:
        return np.full(values.shape[:-1], np.inf)
    return np.min(values[..., edges + 1] - values[..., edges], axis=-1)


def _fd_curvature(model, x, theta, band, ht, hx):
    """Projector-difference ``Tr Omega_{theta x}`` with steps ``ht`` (flux) and ``hx`` (shear)."""
    z = np.zeros_like(ht)
    shifts_x = np.stack([z, z, z, hx, -hx, 1j * hx, -1j * hx])
    shifts_t = np.stack([z, ht, -ht, z, z, z, z])
    H = model.hamiltonian(x[None] + shifts_x, theta[None] + shifts_t)
    w, V = np.linalg.eigh(H)
    check_band(w, band)
    Vb = V[..., band]
    P = Vb @ np.conj(np.swapaxes(Vb, -1, -2))
    dt = (P[1] - P[2]) / (2 * ht[..., None, None])
    d1 = (P[3] - P[4]) / (2 * hx[..., None, None])
    d2 = (P[5] - P[6]) / (2 * hx[..., None, None])
    dx = 0.5 * (d1 - 1j * d2)
    comm = dt @ dx - dx @ dt
    return -1j * np.trace(P[0] @ comm, axis1=-2, axis2=-1)


def _projector_rates(model, x, theta, band):
    """First-order estimates of ``|d_theta P|`` and ``|d_x P|`` plus the boundary gap."""
    w, V = np.linalg.eigh(model.hamiltonian(x, theta))
    check_band(w, band)
    rest = [k for k in range(model.dim) if k not in band]
    Vh = np.conj(np.swapaxes(V, -1, -2))
    A = Vh @ model.d_theta(x, theta) @ V
    B = Vh @ model.d_x(x, theta) @ V
    den = (w[..., band][..., :, None] - w[..., rest][..., None, :]) ** 2
    a = np.abs(A[..., band, :][..., :, rest]) ** 2
    b = np.abs(B[..., band, :][..., :, rest]) ** 2 + np.abs(np.swapaxes(B[..., rest, :][..., :, band], -1, -2)) ** 2
    rate_t = np.sqrt(2 * np.sum(a / den, axis=(-1, -2)))
    rate_x = np.sqrt(np.sum(b / den, axis=(-1, -2)))
    return rate_t, rate_x, _boundary_gap(w, band), np.max(np.abs(w), axis=-1)


def curvature_traces(model, x, theta=0.0, band=(0,), fd_step: float = FD_STEP,
                     adaptive: bool = True, check_step: bool = True) -> np.ndarray:
    """Vectorized :func:`curvature_trace` over arrays of ``x`` and ``theta``.

    The difference quotients are evaluated at steps ``h``, ``h/2`` and
    ``h/4``; the last two are combined by Richardson extrapolation.  With
    ``adaptive`` each direction's step is capped at ``1e-2`` over a
    first-order estimate of ``|dP|`` in that direction, which resolves sharp
    curvature peaks near crossings without drowning the slow direction in
    rounding error.
    """
    band = _band_list(band, model.dim)
    x, theta = np.broadcast_arrays(np.asarray(x, dtype=complex), np.asarray(theta, dtype=float))
    if len(band) == model.dim or not band:
        return np.zeros(x.shape, dtype=complex)
    rate_t, rate_x, gap, scale = _projector_rates(model, x, theta, band)
    ht = np.full(x.shape, float(fd_step))
    hx = np.full(x.shape, float(fd_step))
    if adaptive:
        tiny = np.finfo(float).tiny
        ht = np.minimum(ht, STEP_GAP_RATIO / np.maximum(rate_t, tiny))
        hx = np.minimum(hx, STEP_GAP_RATIO / np.maximum(rate_x, tiny))
    c1 = _fd_curvature(model, x, theta, band, ht, hx)
    c2 = _fd_curvature(model, x, theta, band, ht / 2, hx / 2)
    c4 = _fd_curvature(model, x, theta, band, ht / 4, hx / 4)
    if check_step:
        first = np.abs(c1 - c2)
        second = np.abs(c2 - c4)
        # rounding in P is ~ eps |H| / gap, amplified by the companion derivative
        dp = np.finfo(float).eps * (scale + 1.0) / gap
        noise = 1e3 * dp * (rate_x / (ht / 4) + rate_t / (hx / 4) + dp / (ht * hx / 16))
        floor = 1e-8 * np.abs(c4) + noise
        bad = second > 10 * first / 4 + floor
        if np.any(bad):
            i = np.argwhere(bad)[0]
            raise StepInstabilityError(
                f"curvature at x={complex(x[tuple(i)])}, theta={float(theta[tuple(i)])} "
                f"does not converge as the step is halved"
            )
    return (4 * c4 - c2) / 3


def curvature_trace(model, x: complex, theta: float = 0.0, band: Sequence[int] = (0,),
                    fd_step: float = FD_STEP, adaptive: bool = True) -> complex:
    """``Tr Omega_{theta x}`` of a band projector by central differences of ``P``."""
    return complex(curvature_traces(model, complex(x), float(theta), band, fd_step, adaptive))


def curvature_sum_over_states(model, x, theta=0.0, band: Sequence[int] = (0,),
                              denom_tol: float = 1e-12):
    """Independent route to ``Tr Omega_{theta x}`` from analytic ``dH`` matrices.

    ``-i sum_{n in band, m not in band} (A_nm B_mn - B_nm A_mn) / (E_n - E_m)^2``
    with ``A = d_theta H`` and ``B = d_x H`` in the eigenbasis.  Broadcasts
    over array arguments.
    """
    band = _band_list(band, model.dim)
    x, theta = np.broadcast_arrays(np.asarray(x, dtype=complex), np.asarray(theta, dtype=float))
    rest = [k for k in range(model.dim) if k not in band]
    if not rest or not band:
        return np.zeros(x.shape, dtype=complex) if x.ndim else 0j
    w, V = np.linalg.eigh(model.hamiltonian(x, theta))
    Vh = np.conj(np.swapaxes(V, -1, -2))
    A = Vh @ model.d_theta(x, theta) @ V
    B = Vh @ model.d_x(x, theta) @ V
    diff = w[..., band][..., :, None] - w[..., rest][..., None, :]
    if np.any(np.abs(diff) < denom_tol):
        raise DegenerateDenominatorError(
            f"band {band} touches the rest of the spectrum (|E_n - E_m| < {denom_tol})"
        )
    Anm = A[..., band, :][..., :, rest]
    Bmn = B[..., rest, :][..., :, band]
    Bnm = B[..., band, :][..., :, rest]
    Amn = A[..., rest, :][..., :, band]
    num = Anm * np.swapaxes(Bmn, -1, -2) - Bnm * np.swapaxes(Amn, -1, -2)
    val = -1j * np.sum(num / diff**2, axis=(-1, -2))
    return complex(val) if val.ndim == 0 else val


# ---------------------------------------------------------------------------
# Longuet-Higgins phase
# ---------------------------------------------------------------------------


def holonomy_sign(frames: np.ndarray) -> int:
    """Sign of the discrete parallel transport of real frames around a loop.

    ``frames`` has shape ``(N, dim, k)``; consecutive frames (and the last
    with the first) are paired by ``det(F_k^T F_{k+1})``.
    """
    F = np.asarray(frames)
    G = np.swapaxes(F, -1, -2) @ np.roll(F, -1, axis=0)
    dets = np.linalg.det(G)
    return int(np.prod(np.sign(dets)))


def _real_frames(model, xs, theta, band):
    H = model.hamiltonian(xs, theta)
    if np.max(np.abs(H.imag)) > 1e-12:
        raise NotHermitianError("Longuet-Higgins phase needs a real symmetric (time-reversal invariant) H")
    w, V = np.linalg.eigh(H.real)
    check_band(w, band)
    return V[..., band]


def longuet_higgins_phase(model, loop: DeformationLoop, band_index=0, theta: float = 0.0,
                          min_overlap: float = 0.9, max_refinements: int = 8) -> int:
    """``+1`` or ``-1``: holonomy of the real eigenvector(s) of ``band_index`` around ``loop``.

    The loop is resampled (when it carries a path) until every consecutive
    overlap exceeds ``min_overlap``.
    """
    band = [band_index] if np.isscalar(band_index) else list(band_index)
    if np.all(loop.samples == loop.samples[0]):
        return 1  # a point loop encloses nothing
    for _ in range(max_refinements + 1):
        F = _real_frames(model, loop.samples, theta, band)
        G = np.swapaxes(F, -1, -2) @ np.roll(F, -1, axis=0)
        ov = np.abs(np.linalg.det(G))
        if ov.min() >= min_overlap:
            break
        if loop.path is None:
            if ov.min() < 0.1:
                raise RefineLoopError(
                    f"overlap {ov.min():.3g} between consecutive samples; refine the loop"
                )
            break
        loop = loop.resample(2 * loop.n)
    else:
        if ov.min() < 0.1:
            raise RefineLoopError(f"overlap stays at {ov.min():.3g} after refinement")
    return holonomy_sign(F)


# ---------------------------------------------------------------------------
# cycle transport
# ---------------------------------------------------------------------------


def _line_integral(curv, vel):
    """``2 Re oint Tr Omega dx`` by the periodic trapezoid rule."""
    return 2.0 * np.real(np.mean(curv * vel))


def transport_cycle(model, loop: DeformationLoop, theta0: float = 0.0, band: Sequence[int] = (0,),
                    tol: float = 1e-4, max_doublings: int = 3, fd_step: float = FD_STEP) -> TransportReport:
    """Charge (units of e) pumped around the ring by one traversal of ``loop``.

    ``Q = -2 pi * oint (Omega_{theta 1} dx_1 + Omega_{theta 2} dx_2)`` at flux
    ``theta0``.  The error estimate compares ``N`` with ``N/2`` samples;
    loops that carry a path are doubled until it falls below ``tol``
    (relative).
    """
    loop.check_closed()
    band = _band_list(band, model.dim)
    xs = loop.samples
    curv = curvature_traces(model, xs, theta0, band, fd_step)
    vel = loop.velocities()
    doublings = 0
    while True:
        q_full = -2 * np.pi * _line_integral(curv, vel)
        q_half = -2 * np.pi * _line_integral(curv[::2], vel[::2]) if loop.n % 2 == 0 else q_full
        err = abs(q_full - q_half)
        if err <= tol * max(abs(q_full), 1e-12) or loop.path is None or doublings >= max_doublings:
            break
        finer = loop.resample(2 * loop.n)
        new = curvature_traces(model, finer.samples[1::2], theta0, band, fd_step)
        merged = np.empty(finer.n, dtype=complex)
        merged[::2], merged[1::2] = curv, new
        loop, curv, vel = finer, merged, finer.velocities()
        doublings += 1
    lh = None
    if theta0 == 0.0 and len(band) < model.dim:
        try:
            lh = longuet_higgins_phase(model, loop, band, 0.0, min_overlap=0.0)
        except (NotHermitianError, RefineLoopError, SplitDegeneracyError):
            lh = None
    samples = [
        CurvatureSample(complex(x), float(theta0), complex(c), complex(np.conj(c)), float(fd_step))
        for x, c in zip(loop.samples, curv)
    ]
    return TransportReport(float(q_full), lh, loop.n, float(err), samples)


def persistent_response(model, x: complex, theta: float = 0.0, band: Sequence[int] = (0,),
                        step: float = 1e-5) -> float:
    """``d/dtheta Tr(P H)``: the flux derivative of the band energy."""
    band = _band_list(band, model.dim)
    w = np.linalg.eigvalsh(model.hamiltonian(complex(x), np.array([theta + step, theta - step])))
    check_band(w, band)
    e = w[:, band].sum(axis=-1)
    return float((e[0] - e[1]) / (2 * step))
