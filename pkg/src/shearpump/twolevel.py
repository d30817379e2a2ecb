"""Effective two-level theory of a crossing: curvature, circle charge and (f, g, m).

Near a crossing the two levels are described by
``H = conj(n) s_plus + n s_minus + n3 s_3`` with ``n = g x**m`` and
``n3 = f_theta * theta`` (``s_plus = [[0,0],[1,0]]``, ``s_3 = diag(-1, 1)``).
``f_theta`` is the flux coefficient in angle units, so ``Phi0`` never enters.

Sign convention: ``band_sign = +1`` selects the upper of the two crossing
levels.  Curvatures are returned as ``Tr Omega_{theta x}``, the same component
:func:`shearpump.berry.curvature_trace` produces.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import CrossingError
from .model import OMEGA3, HoppingLaw, NecklaceModel, NecklaceSpec

__all__ = [
    "CrossingCoefficients",
    "TwoLevelModel",
    "leading_curvature",
    "circle_charge",
    "circle_charge_peak",
    "trimer_coefficients",
    "necklace_coefficients",
    "doublet_indices",
    "fit_gap_law",
]


@dataclass(frozen=True)
class CrossingCoefficients:
    f_theta: float
    g: complex
    m: int
    band_sign: int = 1

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise CrossingError(f"order m must be a positive integer, got {self.m}")
        if self.band_sign not in (1, -1):
            raise CrossingError("band_sign must be +1 or -1")
        object.__setattr__(self, "f_theta", float(np.real(self.f_theta)))
        object.__setattr__(self, "g", complex(self.g))
        object.__setattr__(self, "m", int(self.m))

    def with_sign(self, band_sign: int) -> "CrossingCoefficients":
        return replace(self, band_sign=band_sign)


class TwoLevelModel:
    """The 2x2 crossing Hamiltonian as a model usable by :mod:`shearpump.berry`."""

    dim = 2

    def __init__(self, coeffs: CrossingCoefficients):
        self.coeffs = coeffs

    def n(self, x):
        return self.coeffs.g * np.asarray(x, dtype=complex) ** self.coeffs.m

    def n3(self, theta):
        return self.coeffs.f_theta * np.asarray(theta, dtype=float)

    def hamiltonian(self, x, theta=0.0):
        n, n3 = np.broadcast_arrays(self.n(x), self.n3(theta))
        H = np.zeros(n.shape + (2, 2), dtype=complex)
        H[..., 0, 0] = -n3
        H[..., 1, 1] = n3
        H[..., 0, 1] = n
        H[..., 1, 0] = np.conj(n)
        return H

    def d_theta(self, x, theta=0.0):
        shape = np.broadcast_shapes(np.shape(x), np.shape(theta))
        D = np.zeros(shape + (2, 2), dtype=complex)
        D[..., 0, 0] = -self.coeffs.f_theta
        D[..., 1, 1] = self.coeffs.f_theta
        return D

    def d_x(self, x, theta=0.0):
        c = self.coeffs
        x, _ = np.broadcast_arrays(np.asarray(x, dtype=complex), np.asarray(theta, dtype=float))
        D = np.zeros(x.shape + (2, 2), dtype=complex)
        D[..., 0, 1] = c.m * c.g * x ** (c.m - 1)
        return D

    def eigenvalues(self, x, theta=0.0):
        r = np.sqrt(np.abs(self.n(x)) ** 2 + self.n3(theta) ** 2)
        return np.stack([-r, r], axis=-1)


def _norm_n(coeffs, x, theta):
    return np.sqrt(np.abs(coeffs.g) ** 2 * np.abs(x) ** (2 * coeffs.m) + (coeffs.f_theta * theta) ** 2)


def leading_curvature(coeffs: CrossingCoefficients, x, theta=0.0):
    """Leading-order ``Tr Omega_{theta x}`` of the selected crossing level.

    ``band_sign * i m f |g|^2 |x|^{2m-2} conj(x) / (4 |n|^3)``; this is the
    ``x theta`` component with both the order of the indices and the sign
    fixed so that it agrees with the projector curvature of the level.
    """
    x = np.asarray(x, dtype=complex)
    theta = np.asarray(theta, dtype=float)
    if np.any((x == 0) & (theta == 0)):
        raise CrossingError("curvature is singular at the crossing point x = 0, theta = 0")
    c = coeffs
    num = c.m * c.f_theta * abs(c.g) ** 2 * np.abs(x) ** (2 * c.m - 2) * np.conj(x)
    val = c.band_sign * 1j * num / (4 * _norm_n(c, x, theta) ** 3)
    return complex(val) if val.ndim == 0 else val


def circle_charge(coeffs: CrossingCoefficients, eps: float, theta: float = 0.0) -> float:
    """Charge (units of e) pumped by the crossing level around ``|x| = eps``.

    ``Q = band_sign * 2 pi^2 m f |g|^2 eps^{2m} / |n|^3`` with
    ``|n|^2 = |g|^2 eps^{2m} + (f theta)^2``, for a counterclockwise circle.
    At ``theta = 0`` this is ``band_sign * 2 pi^2 m f / |g eps^m|``; for ``theta != 0`` it vanishes as
    ``eps -> 0`` like ``2 pi^2 m |g|^2 eps^{2m} / (f^2 |theta|^3)``.
    """
    if not eps > 0:
        raise CrossingError("eps must be positive")
    c = coeffs
    val = 2 * np.pi**2 * c.m * c.f_theta * abs(c.g) ** 2 * eps ** (2 * c.m) / _norm_n(c, eps, theta) ** 3
    return float(c.band_sign * val)


def circle_charge_peak(coeffs: CrossingCoefficients, theta: float):
    """``(eps*, Q*)`` maximizing ``|circle_charge|`` over the radius at fixed ``theta != 0``.

    The peak sits at ``|g| eps^m = sqrt(2) |f theta|`` where
    ``|Q| = 4 pi^2 m / (3^{3/2} |theta|)``.
    """
    if theta == 0:
        raise CrossingError("no finite maximum at theta = 0 (the charge diverges)")
    c = coeffs
    eps = (np.sqrt(2) * abs(c.f_theta * theta) / abs(c.g)) ** (1.0 / c.m)
    return float(eps), circle_charge(c, eps, theta)


def trimer_coefficients(hopping: HoppingLaw = HoppingLaw()) -> CrossingCoefficients:
    """``f_theta = h(1)/sqrt 3``, ``g = 2 conj(omega) h'(1)``, ``m = 1``.

    These are minus the ``p = 3`` ring coefficients of
    :func:`necklace_coefficients`, i.e. they describe ``-H_eff``: with
    ``band_sign = +1`` they model the *lower* crossing level (index 0) of
    :class:`shearpump.model.TrimerModel`.
    """
    if hopping.dh1 == 0:
        raise CrossingError("h'(1) = 0: the shear does not open the trimer crossing")
    return CrossingCoefficients(hopping.h1 / np.sqrt(3), 2 * np.conj(OMEGA3) * hopping.dh1, 1)


def doublet_indices(p: int, m: int):
    """Ascending-spectrum indices of the unstrained doublet with ``E = 2 cos(2 pi m / p)``."""
    if not 1 <= m <= (p - 1) // 2:
        raise CrossingError(f"m must be in 1..{(p - 1) // 2} for p={p}")
    return [p - 1 - 2 * m, p - 2 * m]


def necklace_coefficients(spec: NecklaceSpec, m: int) -> CrossingCoefficients:
    """Crossing coefficients of the ``m``-th doublet of a ring from the product formula.

    ``g`` includes the ``omega^{2m}`` phase of ``(omega^2 x)^m``.  Per its
    derivation ``|g|`` is meaningful only up to an overall scale for
    ``m >= 2``.
    """
    p, th = spec.p, spec.theta
    doublet_indices(p, m)
    h1, dh1 = spec.hopping.h1, spec.hopping.dh1
    prod = 1.0
    for k in range(1, m):
        den = np.cos(m * th) - np.cos((m - 2 * k) * th)
        if abs(den) < 1e-12:
            raise CrossingError(f"resonant denominator at k={k} (cos {m}theta = cos {m - 2 * k}theta)")
        prod *= np.cos((-m + 2 * k - 1) * th) / den
    g = 2 * (-dh1) ** m * prod * np.cos((m - 1) * th) * spec.omega ** (2 * m)
    f_theta = -(2 * h1 / p) * np.sin(m * th)
    if g == 0:
        raise CrossingError(f"doublet m={m} of p={p} does not split at order {m}")
    return CrossingCoefficients(f_theta, g, m)


def fit_gap_law(spec: NecklaceSpec, m: int, radii, linear: bool = True, direction: complex = 1.0):
    """Fit ``split = 2 |g_eff| |x|^k`` to the ``m``-doublet splitting at ``theta = 0``.

    Returns ``(k, |g_eff|)`` where ``|g_eff|`` is fitted with ``k`` fixed to
    ``m``.  ``linear`` selects the first-order-in-shear Hamiltonian.
    """
    radii = np.asarray(radii, dtype=float)
    lo, hi = doublet_indices(spec.p, m)
    model = NecklaceModel(spec, linear=linear)
    xs = radii * direction / abs(direction)
    w = np.linalg.eigvalsh(model.hamiltonian(xs, 0.0))
    split = w[:, hi] - w[:, lo]
    k = np.polyfit(np.log(radii), np.log(split), 1)[0]
    g_eff = np.exp(np.mean(np.log(split / (2 * radii**m))))
    return float(k), float(g_eff)
