"""Static energy functional over the shear ``x`` and the flux ``phi``.

``E_tot(x, phi) = branch * sqrt(|g|^2 |x|^{2m} + (f phi)^2) + (pK/4)|x|^2 + phi^2/(2L)``
with ``f = 2 pi f_theta / Phi0`` (atomic units, ``Phi0 = c = 137``).  The
electronic term is the two-level surface of a crossing; ``electronic="exact"``
substitutes the corresponding ring eigenvalue measured from the doublet centre.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.optimize import minimize as _scipy_minimize
from scipy.optimize import brentq, minimize_scalar

from .berry import transport_cycle
from .errors import ConvergenceError, CrossingError, ModelError
from .loop import DeformationLoop
from .model import NecklaceModel, NecklaceSpec
from .twolevel import CrossingCoefficients, circle_charge, doublet_indices, necklace_coefficients

__all__ = [
    "PHI0",
    "JTParameters",
    "MinimizerReport",
    "total_energy",
    "ampere_residual",
    "minimize",
    "jt_cycle_charge",
]

PHI0 = 137.0
CLASS_TOL = 1e-7


@dataclass(frozen=True)
class JTParameters:
    """``K`` spring constant, ``L`` inductance constant, ``branch`` the sign of the root.

    ``p`` enters the elastic energy ``(pK/4)|x|^2``.  ``spec`` is required
    only for ``electronic="exact"``.
    """

    K: float
    L: float
    coeffs: CrossingCoefficients
    p: int = 3
    Phi0: float = PHI0
    branch: int = -1
    electronic: str = "two_level"
    spec: Optional[NecklaceSpec] = None

    def __post_init__(self):
        if not (self.K > 0 and self.L > 0 and self.Phi0 > 0):
            raise ModelError("K, L and Phi0 must be positive")
        if self.branch not in (1, -1):
            raise ModelError("branch must be +1 or -1")
        if self.p < 3:
            raise ModelError("p must be at least 3")
        if self.electronic not in ("two_level", "exact"):
            raise ModelError(f"unknown electronic surface {self.electronic!r}")
        if self.electronic == "exact" and self.spec is None:
            raise ModelError("electronic='exact' needs a NecklaceSpec")

    @property
    def f(self) -> float:
        """Flux coefficient per unit flux, ``2 pi f_theta / Phi0``."""
        return 2 * np.pi * self.coeffs.f_theta / self.Phi0


@dataclass
class MinimizerReport:
    kind: str  # trivial | jt_circle | magnetic
    x_star_radius: float
    phi_star: float
    energy: float
    hessian_definite: bool
    gradient_norm: float
    ampere_residual: float
    candidates: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["class"] = d.pop("kind")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# functional
# ---------------------------------------------------------------------------


class _ExactSurface:
    def __init__(self, params: JTParameters):
        spec = params.spec
        self.model = NecklaceModel(spec)
        lo, hi = doublet_indices(spec.p, params.coeffs.m)
        self.level = lo if params.branch < 0 else hi
        w0 = np.linalg.eigvalsh(self.model.hamiltonian(0.0, 0.0))
        self.centre = 0.5 * (w0[lo] + w0[hi])
        self.Phi0 = params.Phi0

    def __call__(self, x, phi):
        theta = 2 * np.pi * np.asarray(phi, dtype=float) / self.Phi0
        w = np.linalg.eigvalsh(self.model.hamiltonian(x, theta))
        return w[..., self.level] - self.centre


@lru_cache(maxsize=32)
def _exact_surface(params: JTParameters) -> _ExactSurface:
    return _ExactSurface(params)


def electronic_energy(params: JTParameters, x, phi):
    if params.electronic == "exact":
        return _exact_surface(params)(x, phi)
    c = params.coeffs
    r = np.abs(np.asarray(x, dtype=complex))
    return params.branch * np.sqrt(abs(c.g) ** 2 * r ** (2 * c.m) + (params.f * np.asarray(phi)) ** 2)


def total_energy(params: JTParameters, x, phi):
    """Electronic, elastic and magnetic energy; broadcasts over ``x`` and ``phi``."""
    r2 = np.abs(np.asarray(x, dtype=complex)) ** 2
    phi = np.asarray(phi, dtype=float)
    val = electronic_energy(params, x, phi) + params.p * params.K / 4 * r2 + phi**2 / (2 * params.L)
    return float(val) if np.ndim(val) == 0 else val


def ampere_residual(params: JTParameters, x, phi, step: float = 1e-7) -> float:
    """``dE_el/dphi + phi/L`` with a central difference in ``phi``."""
    h = step * max(1.0, abs(phi))
    dE = (electronic_energy(params, x, phi + h) - electronic_energy(params, x, phi - h)) / (2 * h)
    return float(dE + phi / params.L)


# ---------------------------------------------------------------------------
# minimization
# ---------------------------------------------------------------------------


def _descend(fun, start, bounds, sweeps=400, tol=1e-15):
    """Coordinate descent with bounded Brent line searches."""
    z = np.array(start, dtype=float)
    e = fun(z)
    for _ in range(sweeps):
        e_old = e
        for k, (a, b) in enumerate(bounds):
            def line(t, k=k):
                w = z.copy()
                w[k] = t
                return fun(w)

            res = minimize_scalar(line, bounds=(a, b), method="bounded", options={"xatol": 1e-14})
            # the bounded search may miss an endpoint minimum, e.g. the cone tip r = 0
            for t in (res.x, a, b, z[k]):
                v = line(t)
                if v < e:
                    z[k], e = t, v
        if abs(e_old - e) <= tol * max(1.0, abs(e)):
            return z, e
    raise ConvergenceError(f"coordinate descent did not settle from {start} (last E={e:.17g})")


def _gradient(params, x, phi, h=1e-6):
    hx = h * max(1.0, abs(x))
    hp = h * max(1.0, abs(phi))
    g1 = (total_energy(params, x + hx, phi) - total_energy(params, x - hx, phi)) / (2 * hx)
    g2 = (total_energy(params, x + 1j * hx, phi) - total_energy(params, x - 1j * hx, phi)) / (2 * hx)
    g3 = (total_energy(params, x, phi + hp) - total_energy(params, x, phi - hp)) / (2 * hp)
    return np.array([g1, g2, g3])


def _hessian_definite(params, x, phi, h=1e-4):
    """Positive curvature along every direction not generated by the rotation of ``x``."""
    E0 = total_energy(params, x, phi)
    r = abs(x)
    u = x / r if r > 0 else 1.0
    if r == 0:
        # cone tip or smooth origin: the radial energy must rise
        radial_ok = total_energy(params, h * u, phi) > E0
        hp = h * max(1e-2, abs(phi))
        d2p = (total_energy(params, x, phi + hp) - 2 * E0 + total_energy(params, x, phi - hp)) / hp**2
        return bool(radial_ok and d2p > 0)
    hr = h * r
    hp = h * max(1e-2, abs(phi))

    def E(dr, dp):
        return total_energy(params, (r + dr) * u, phi + dp)

    Hrr = (E(hr, 0) - 2 * E0 + E(-hr, 0)) / hr**2
    Hpp = (E(0, hp) - 2 * E0 + E(0, -hp)) / hp**2
    Hrp = (E(hr, hp) - E(hr, -hp) - E(-hr, hp) + E(-hr, -hp)) / (4 * hr * hp)
    return bool(Hrr > 0 and Hpp > 0 and Hrr * Hpp - Hrp**2 > 0)


def _polish(fun, t0, h=1e-6):
    """Refine a 1-D minimum by a root of the central-difference slope near ``t0``."""
    def slope(t):
        step = h * max(1.0, abs(t))
        return (fun(t + step) - fun(t - step)) / (2 * step)

    for width in (1e-6, 1e-4, 1e-2):
        a, b = t0 * (1 - width), t0 * (1 + width)
        if slope(a) < 0 < slope(b):
            t = brentq(slope, a, b, xtol=1e-16, rtol=4 * np.finfo(float).eps)
            return t if fun(t) <= fun(t0) else t0
    return t0


def _classify(r, phi, scale_r, scale_phi):
    big_r = r > CLASS_TOL * max(scale_r, 1.0)
    big_phi = abs(phi) > CLASS_TOL * max(scale_phi, 1.0)
    if not big_r and not big_phi:
        return "trivial"
    if big_r and not big_phi:
        return "jt_circle"
    if big_phi and not big_r:
        return "magnetic"
    return None


def minimize(params: JTParameters, x_max: float = 0.5, phi_max: Optional[float] = None, n_probes: int = 64,
             seed: int = 0) -> MinimizerReport:
    """Global minimizer of :func:`total_energy` over ``|x| <= x_max``, ``|phi| <= phi_max``.

    Descent starts from the three analytic candidates and ``n_probes`` random
    points.  In the two-level mode the search is radial; the exact surface is
    searched over both components of ``x``.  A minimizer on the edge of the
    box means the functional is unbounded there and raises.
    """
    c = params.coeffs
    phi_max = params.Phi0 / 2 if phi_max is None else phi_max
    rng = np.random.default_rng(seed)
    r_jt = 2 * abs(c.g) / (params.p * params.K)
    phi_mag = params.L * abs(params.f)
    analytic = [(0.0, 0.0), (min(r_jt, x_max), 0.0), (0.0, min(phi_mag, phi_max))]
    probes = [(x_max * np.sqrt(rng.random()), phi_max * rng.random()) for _ in range(n_probes)]
    radial = params.electronic == "two_level"
    if radial:
        bounds = [(0.0, x_max), (0.0, phi_max)]

        def fun(z):
            return total_energy(params, z[0], z[1])

        starts = [np.array(s) for s in analytic + probes]
    else:
        bounds = [(-x_max, x_max), (-x_max, x_max), (0.0, phi_max)]

        def fun(z):
            return total_energy(params, complex(z[0], z[1]), z[2])

        angles = rng.random(len(analytic) + n_probes) * 2 * np.pi
        starts = [np.array([s[0] * np.cos(a), s[0] * np.sin(a), s[1]]) for s, a in zip(analytic + probes, angles)]
    found = []
    for s in starts:
        if not radial:
            # cheap bounded quasi-Newton stage before the line-search polish
            s = _scipy_minimize(fun, s, method="L-BFGS-B", bounds=bounds).x
        z, e = _descend(fun, s, bounds)
        found.append((e, z))
    found.sort(key=lambda t: t[0])
    e_best, z_best = found[0]
    x_star = complex(z_best[0]) if radial else complex(z_best[0], z_best[1])
    phi_star = float(z_best[-1])
    r_star = abs(x_star)
    if np.max(np.abs(z_best[:-1])) > x_max * (1 - 1e-6) or phi_star > phi_max * (1 - 1e-6):
        raise ConvergenceError(
            f"minimum on the search box edge (|x|={r_star:.6g}, phi={phi_star:.6g}): the functional is "
            "unbounded below in the box")
    kind = _classify(r_star, phi_star, r_jt, phi_mag)
    if kind is None:
        raise ConvergenceError(f"minimizer with both |x|={r_star:.3g} and phi={phi_star:.3g} nonzero")
    # snap coordinates that descent left at roundoff level
    if kind in ("trivial", "magnetic"):
        x_star, r_star = 0j, 0.0
    if kind in ("trivial", "jt_circle"):
        phi_star = 0.0
    # energy-based line searches stop near sqrt(eps); finish on the slope
    if kind == "jt_circle":
        u = x_star / r_star
        r_star = _polish(lambda t: total_energy(params, t * u, 0.0), r_star)
        x_star = r_star * u
    elif kind == "magnetic":
        phi_star = _polish(lambda t: total_energy(params, 0j, t), phi_star)
    energy = total_energy(params, x_star, phi_star)
    grad = _gradient(params, x_star, phi_star)
    distinct = []
    for e, z in found:
        if all(abs(e - d["energy"]) > 1e-12 for d in distinct):
            distinct.append({"energy": float(e), "x_radius": float(np.linalg.norm(z[:-1])), "phi": float(z[-1])})
    return MinimizerReport(kind, float(r_star), phi_star, float(energy),
                           _hessian_definite(params, x_star, phi_star), float(np.linalg.norm(grad)),
                           ampere_residual(params, x_star, phi_star), distinct)


def jt_cycle_charge(params: JTParameters, spec: NecklaceSpec, check: bool = True, tol: float = 0.1) -> float:
    """Charge carried around the Jahn-Teller circle ``|x| = 4|h'(1)|/(pK)`` at zero flux.

    Closed form ``pi^2 K h(1) sin(2 pi / p) / (2 h'(1)^2)`` (units of e) for the
    lower crossing level on a counterclockwise cycle.  With ``check`` the
    value is compared with :func:`shearpump.berry.transport_cycle` for the
    full ring and must agree to ``tol`` (relative).
    """
    if params.branch != -1 or params.coeffs.m != 1:
        raise CrossingError("the Jahn-Teller cycle exists only for the lower surface of a conic crossing")
    if spec.p != params.p:
        raise ModelError(f"params.p={params.p} but spec.p={spec.p}")
    h1, dh1 = spec.hopping.h1, spec.hopping.dh1
    if dh1 == 0:
        raise CrossingError("h'(1) = 0: no Jahn-Teller distortion")
    q = np.pi**2 * params.K * h1 * np.sin(2 * np.pi / spec.p) / (2 * dh1**2)
    if check:
        radius = 4 * abs(dh1) / (spec.p * params.K)
        lo, _ = doublet_indices(spec.p, 1)
        rep = transport_cycle(NecklaceModel(spec), DeformationLoop.circle(radius, 256), 0.0, [lo])
        dev = abs(rep.charge_e - q) / abs(q)
        if dev > tol:
            raise ConvergenceError(
                f"closed form {q:.6g} and transport {rep.charge_e:.6g} differ by {dev:.2%} (radius {radius:.4g})")
    return float(q)


def jt_circle_charge_two_level(params: JTParameters, spec: NecklaceSpec) -> float:
    """The same charge from :func:`shearpump.twolevel.circle_charge` of the ring coefficients."""
    coeffs = necklace_coefficients(spec, 1).with_sign(-1)
    return circle_charge(coeffs, 4 * abs(spec.hopping.dh1) / (spec.p * params.K), 0.0)
