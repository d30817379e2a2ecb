"""Sheared Hückel Hamiltonians for planar necklaces X_p and trimers.

Conventions
-----------
* Shears are complex numbers ``x``; a bond ``d`` (complex) goes to
  ``d + x * conj(d)``.
* Flux is the dimensionless angle ``theta = 2*pi*phi/Phi0``.  The phase
  ``xi = exp(i*theta)`` sits on the closing bond ``p -> 1``:
  ``H[0, p-1] = conj(xi) * h_p`` and ``H[p-1, 0] = xi * h_p``, the same
  gauge as the trimer's c-bond.
* ``d_x`` is the Wirtinger derivative ``(d/dx1 - i d/dx2) / 2``; it is not
  Hermitian, ``d_xbar = d_x^dagger``.

Every ``hamiltonian``/``d_theta``/``d_x`` method broadcasts over array
arguments ``x`` and ``theta`` and returns arrays of shape ``(..., dim, dim)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ModelError
from .loop import DeformationLoop

LINEAR_REGIME = 0.5
OMEGA3 = np.exp(2j * np.pi / 3)


# ---------------------------------------------------------------------------
# hopping law and geometry
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HoppingLaw:
    """Exponential bond amplitude ``h(s) = t0 * exp(-beta * (s - 1) / 2)``.

    ``s`` is the squared bond length in units where the unstrained bond has
    length one, so ``h(1) = t0`` and ``h'(1) = -beta * t0 / 2``.
    """

    t0: float = 1.0
    beta: float = 2.0

    def __post_init__(self):
        if not self.t0 > 0:
            raise ModelError(f"h(1) must be positive, got t0={self.t0}")

    @classmethod
    def from_values(cls, h1: float, dh1: float) -> "HoppingLaw":
        """The exponential law with prescribed ``h(1)`` and ``h'(1)``."""
        return cls(t0=float(h1), beta=-2.0 * float(dh1) / float(h1))

    def evaluate(self, s):
        return self.t0 * np.exp(-0.5 * self.beta * (np.asarray(s) - 1.0))

    def derivative(self, s):
        return -0.5 * self.beta * self.evaluate(s)

    @property
    def h1(self) -> float:
        return float(self.t0)

    @property
    def dh1(self) -> float:
        return float(-0.5 * self.beta * self.t0)


def check_shear(x) -> None:
    """Warn when a shear leaves the regime where linear response is sensible."""
    if np.max(np.abs(x)) >= LINEAR_REGIME:
        warnings.warn(
            f"|x| = {np.max(np.abs(x)):.3g} is outside the linear regime |x| < {LINEAR_REGIME}",
            RuntimeWarning,
            stacklevel=3,
        )


def sheared_length_sq(d, x):
    """Squared length of ``d + x*conj(d)``, expanded term by term."""
    d = np.asarray(d, dtype=complex)
    x = np.asarray(x, dtype=complex)
    val = (
        np.abs(d) ** 2
        + x * np.conj(d) ** 2
        + np.conj(x) * d**2
        + np.abs(x) ** 2 * np.abs(d) ** 2
    )
    return np.real(val)


@dataclass(frozen=True)
class NecklaceSpec:
    p: int
    hopping: HoppingLaw = HoppingLaw()

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 3:
            raise ModelError(f"necklace needs an integer p >= 3, got {self.p}")
        if self.p % 2 == 0:
            raise ModelError(f"only odd p is supported, got p={self.p}")
        object.__setattr__(self, "p", int(self.p))

    @property
    def theta(self) -> float:
        return 2 * np.pi / self.p

    @property
    def omega(self) -> complex:
        return np.exp(1j * self.theta)


def bond_vectors(spec: NecklaceSpec) -> np.ndarray:
    """Unit bonds ``d_j = i * omega**(j - 1/2)`` of the unstrained ring, j = 1..p."""
    j = np.arange(1, spec.p + 1)
    return 1j * np.exp(1j * spec.theta * (j - 0.5))


# ---------------------------------------------------------------------------
# ring assembly
# ---------------------------------------------------------------------------


def _ring_matrix(amps, theta, flux_bond: int):
    """Nearest-neighbour ring with bond amplitudes ``amps[..., j]`` (bond j+1).

    Bond ``j`` (1-based) joins sites ``j`` and ``j+1``; the flux phase is put
    on bond ``flux_bond``, or spread as ``theta/p`` over every bond when
    ``flux_bond == 0``.
    """
    amps = np.asarray(amps)
    p = amps.shape[-1]
    theta = np.asarray(theta, dtype=float)
    shape = np.broadcast_shapes(amps.shape[:-1], theta.shape)
    amps = np.broadcast_to(amps, shape + (p,))
    xi = np.broadcast_to(np.exp(1j * theta), shape)
    H = np.zeros(shape + (p, p), dtype=complex)
    for j in range(1, p + 1):
        lo, hi = j - 1, j % p  # sites j, j+1 as 0-based indices
        ph = _bond_phase(xi, theta, j, p, flux_bond)
        a = amps[..., j - 1]
        H[..., hi, lo] = np.conj(ph) * a
        H[..., lo, hi] = ph * np.conj(a)
    return H


def _bond_phase(xi, theta, j, p, flux_bond):
    """Phase carried by bond ``j`` (unit modulus, broadcast like ``xi``)."""
    if flux_bond == 0:
        return np.exp(1j * np.broadcast_to(theta, xi.shape) / p)
    return xi if j == flux_bond else np.ones_like(xi)


class NecklaceModel:
    """``H(x, theta)`` for the sheared ring X_p.

    With ``linear=True`` the amplitudes are truncated at first order in the
    shear, ``h(1) + h'(1) * (x conj(d)^2 + conj(x) d^2)``; otherwise the exact
    sheared bond lengths are used.  ``flux_bond=0`` spreads the flux evenly
    over all bonds (the reflection-symmetric gauge).
    """

    def __init__(self, spec: NecklaceSpec, linear: bool = False, flux_bond: int | None = None):
        self.spec = spec
        self.linear = bool(linear)
        self.dim = spec.p
        self.flux_bond = spec.p if flux_bond is None else int(flux_bond)
        if not 0 <= self.flux_bond <= spec.p:
            raise ModelError(f"flux bond must be in 0..{spec.p}")
        self._d = bond_vectors(spec)

    def __repr__(self):
        return f"NecklaceModel(p={self.spec.p}, linear={self.linear})"

    def amplitudes(self, x):
        x = np.asarray(x, dtype=complex)[..., None]
        hop = self.spec.hopping
        if self.linear:
            return hop.h1 + 2 * hop.dh1 * np.real(x * np.conj(self._d) ** 2)
        return hop.evaluate(sheared_length_sq(self._d, x))

    def amplitude_dx(self, x):
        """Wirtinger derivative of each bond amplitude."""
        x = np.asarray(x, dtype=complex)[..., None]
        hop = self.spec.hopping
        dbar2 = np.conj(self._d) ** 2
        if self.linear:
            return np.broadcast_to(hop.dh1 * dbar2, x.shape[:-1] + (self.dim,))
        s = sheared_length_sq(self._d, x)
        return hop.derivative(s) * (dbar2 + np.conj(x) * np.abs(self._d) ** 2)

    def hamiltonian(self, x, theta=0.0):
        return _ring_matrix(self.amplitudes(x), theta, self.flux_bond)

    def d_theta(self, x, theta=0.0):
        H = self.hamiltonian(x, theta)
        if self.flux_bond == 0:
            # every bond carries exp(i theta / p) on its (lo, hi) entry
            p = self.dim
            D = np.zeros_like(H)
            for j in range(1, p + 1):
                lo, hi = j - 1, j % p
                D[..., lo, hi] = 1j / p * H[..., lo, hi]
                D[..., hi, lo] = -1j / p * H[..., hi, lo]
            return D
        lo, hi = self.flux_bond - 1, self.flux_bond % self.dim
        D = np.zeros_like(H)
        D[..., hi, lo] = -1j * H[..., hi, lo]
        D[..., lo, hi] = 1j * H[..., lo, hi]
        return D

    def d_x(self, x, theta=0.0):
        """Wirtinger derivative; each bond amplitude enters both triangles."""
        da = self.amplitude_dx(x)
        theta = np.asarray(theta, dtype=float)
        shape = np.broadcast_shapes(da.shape[:-1], theta.shape)
        da = np.broadcast_to(da, shape + (self.dim,))
        xi = np.broadcast_to(np.exp(1j * theta), shape)
        D = np.zeros(shape + (self.dim, self.dim), dtype=complex)
        for j in range(1, self.dim + 1):
            lo, hi = j - 1, j % self.dim
            ph = _bond_phase(xi, theta, j, self.dim, self.flux_bond)
            a = da[..., j - 1]
            D[..., hi, lo] = np.conj(ph) * a
            D[..., lo, hi] = ph * a
        return D


def necklace_hamiltonian(spec: NecklaceSpec, x: complex = 0.0, theta: float = 0.0,
                         flux_bond: int | None = None) -> np.ndarray:
    """Dense ``p x p`` Hückel matrix of the sheared ring threaded by flux angle ``theta``."""
    check_shear(x)
    return NecklaceModel(spec, flux_bond=flux_bond).hamiltonian(complex(x), float(theta))


def linearized_necklace(spec: NecklaceSpec):
    """``(H0, dH_dx, dH_dxbar)`` with ``H(x) ~ H0 + x dH_dx + conj(x) dH_dxbar``.

    ``dH_dxbar`` carries ``-h'(1) * omega**(2j-1)`` on bond j.
    """
    m = NecklaceModel(spec, linear=True)
    H0 = m.hamiltonian(0.0, 0.0)
    dx = m.d_x(0.0, 0.0)
    return H0, dx, dx.conj().T


# ---------------------------------------------------------------------------
# trimers
# ---------------------------------------------------------------------------


def trimer_hamiltonian(a, b, c, theta=0.0) -> np.ndarray:
    """3x3 Hückel matrix with amplitudes a (1-2), b (2-3), c (3-1) and the flux on c."""
    a, b, c, theta = np.broadcast_arrays(*(np.asarray(v) for v in (a, b, c, theta)))
    xi = np.exp(1j * theta.astype(float))
    H = np.zeros(a.shape + (3, 3), dtype=complex)
    H[..., 0, 1] = H[..., 1, 0] = a
    H[..., 1, 2] = H[..., 2, 1] = b
    H[..., 0, 2] = np.conj(xi) * c
    H[..., 2, 0] = xi * c
    return H


def maslul_hoppings(x, hopping: HoppingLaw, base=None):
    """Hopping amplitudes (a, b, c) of the pinching shear cycle, linear in ``x``."""
    x = np.asarray(x, dtype=complex)
    h1, dh1 = hopping.h1, hopping.dh1
    a0, b0, c0 = (h1, h1, h1) if base is None else base
    a = a0 + dh1 * np.real(OMEGA3 * np.conj(x) + np.conj(OMEGA3) * x)
    b = b0 + dh1 * np.real(np.conj(x) + x)
    c = c0 + dh1 * np.real(np.conj(OMEGA3 * x) + OMEGA3 * x)
    return a, b, c


class TrimerModel:
    """``H(x, theta)`` for a trimer whose amplitudes move linearly with the shear.

    ``base`` fixes the amplitudes at ``x = 0``; the default equilateral base
    puts the conic crossing at the origin.
    """

    dim = 3

    def __init__(self, hopping: HoppingLaw = HoppingLaw(), base=None):
        self.hopping = hopping
        self.base = None if base is None else tuple(float(v) for v in base)

    def __repr__(self):
        return f"TrimerModel(h1={self.hopping.h1}, dh1={self.hopping.dh1}, base={self.base})"

    @classmethod
    def from_shape(cls, shape: "TrimerShape", hopping: HoppingLaw = HoppingLaw()):
        a2, b2, c2 = shape.sides_sq()
        return cls(hopping, base=hopping.evaluate(np.array([a2, b2, c2])))

    def hoppings(self, x):
        return maslul_hoppings(x, self.hopping, self.base)

    def hamiltonian(self, x, theta=0.0):
        return trimer_hamiltonian(*self.hoppings(x), theta)

    def d_theta(self, x, theta=0.0):
        _, _, c = self.hoppings(x)
        c, theta = np.broadcast_arrays(c, np.asarray(theta, dtype=float))
        xi = np.exp(1j * theta)
        D = np.zeros(c.shape + (3, 3), dtype=complex)
        D[..., 0, 2] = -1j * np.conj(xi) * c
        D[..., 2, 0] = 1j * xi * c
        return D

    def d_x(self, x, theta=0.0):
        dh1 = self.hopping.dh1
        x, theta = np.broadcast_arrays(np.asarray(x, dtype=complex), np.asarray(theta, dtype=float))
        xi = np.exp(1j * theta)
        D = np.zeros(x.shape + (3, 3), dtype=complex)
        D[..., 0, 1] = D[..., 1, 0] = dh1 * np.conj(OMEGA3)
        D[..., 1, 2] = D[..., 2, 1] = dh1
        D[..., 0, 2] = np.conj(xi) * dh1 * OMEGA3
        D[..., 2, 0] = xi * dh1 * OMEGA3
        return D


class TrimerCycle(NamedTuple):
    loop: DeformationLoop
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray


def trimer_shear_cycle(eps: float, n_samples: int = 256, hopping: HoppingLaw = HoppingLaw()) -> TrimerCycle:
    """Circle ``x = eps * exp(2 pi i s)`` and the (a, b, c) it induces."""
    if eps < 0:
        raise ModelError("eps must be nonnegative")
    if n_samples < 8:
        raise ModelError("need at least 8 samples")
    loop = DeformationLoop.circle(eps, n_samples)
    a, b, c = maslul_hoppings(loop.samples, hopping)
    return TrimerCycle(loop, a, b, c)


# ---------------------------------------------------------------------------
# Jacobi shape coordinates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrimerShape:
    """Scale ``q`` and shape ``(X, Y)`` of a triangle; ``X**2 + Y**2 <= 1``."""

    q: float
    X: float
    Y: float

    def __post_init__(self):
        if not self.q > 0:
            raise ModelError("q must be positive")
        if self.X**2 + self.Y**2 > 1 + 1e-12:
            raise ModelError(f"X^2 + Y^2 = {self.X**2 + self.Y**2} exceeds 1")

    @property
    def theta_shape(self) -> float:
        return float(np.arcsin(min(1.0, np.hypot(self.X, self.Y))))

    @property
    def phi_shape(self) -> float:
        return float(np.arctan2(self.Y, self.X) % (2 * np.pi))

    @classmethod
    def from_angles(cls, q, theta_shape, phi_shape):
        r = np.sin(theta_shape)
        return cls(q, r * np.cos(phi_shape), r * np.sin(phi_shape))

    def sides_sq(self):
        return sides_from_jacobi(self)

    @property
    def is_linear(self) -> bool:
        return abs(self.X**2 + self.Y**2 - 1) < 1e-12


def sides_from_jacobi(shape: TrimerShape):
    """Squared side lengths ``(a^2, b^2, c^2)`` of a shape."""
    q, X, Y = shape.q, shape.X, shape.Y
    r3 = np.sqrt(0.75)
    a2 = q / 3 * (1 + X)
    b2 = q / 3 * (1 - 0.5 * X - r3 * Y)
    c2 = q / 3 * (1 - 0.5 * X + r3 * Y)
    return a2, b2, c2


def jacobi_from_sides(a2: float, b2: float, c2: float) -> TrimerShape:
    """Invert :func:`sides_from_jacobi`; the sides must close a (possibly flat) triangle."""
    sides = np.array([a2, b2, c2], dtype=float)
    if np.any(sides < 0):
        raise ModelError(f"negative squared side in {tuple(sides)}")
    q = float(sides.sum())
    if q == 0:
        raise ModelError("all sides vanish")
    X = 3 * a2 / q - 1
    Y = np.sqrt(3) * (c2 - b2) / q
    r2 = X * X + Y * Y
    if r2 > 1 + 1e-10:
        raise ModelError("squared sides violate the triangle inequality")
    if r2 > 1:
        X, Y = X / np.sqrt(r2), Y / np.sqrt(r2)
    return TrimerShape(q, float(X), float(Y))


def sheared_triangle_sides(x: complex):
    """Squared sides of the unit equilateral triangle (a along the real axis) after shear ``x``."""
    d = np.array([1.0, OMEGA3, OMEGA3**2])
    return tuple(float(v) for v in sheared_length_sq(d, x))
