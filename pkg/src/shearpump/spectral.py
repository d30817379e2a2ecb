"""Dense Hermitian eigensystems, band projections and gaps for small matrices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConvergenceError, NotHermitianError, SplitDegeneracyError

CLUSTER_TOL = 1e-9
HERMITIAN_TOL = 1e-14
JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 100


def check_hermitian(H, tol: float = HERMITIAN_TOL) -> None:
    H = np.asarray(H)
    scale = max(1.0, float(np.max(np.abs(H)))) if H.size else 1.0
    dev = np.max(np.abs(H - np.conj(np.swapaxes(H, -1, -2)))) if H.size else 0.0
    if dev > tol * scale:
        raise NotHermitianError(f"matrix deviates from Hermitian by {dev:.3g}")


def fix_phases(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-modulus component of every column real and positive.

    Near-ties are broken by the lowest index so the choice is reproducible.
    """
    V = np.array(vectors, dtype=complex, copy=True)
    mod = np.abs(V)
    top = mod.max(axis=-2, keepdims=True)
    first = np.argmax(mod >= top * (1 - 1e-10), axis=-2)
    pivot = np.take_along_axis(V, first[..., None, :], axis=-2)
    return V * (np.conj(pivot) / np.abs(pivot))


def jacobi_eigh(H, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi diagonalization of a complex Hermitian matrix.

    Each rotation first removes the phase of the pivot element and then
    applies a real Givens rotation.  Returns ascending eigenvalues and the
    matching unitary frame.
    """
    A = np.array(H, dtype=complex, copy=True)
    n = A.shape[0]
    V = np.eye(n, dtype=complex)
    norm = max(np.linalg.norm(A), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off < tol * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                mag = abs(apq)
                if mag < 1e-300:
                    continue
                e = apq / mag
                tau = (A[q, q].real - A[p, p].real) / (2 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                # columns p, q  <-  [c*Ap - s*conj(e)*Aq, s*e*Ap + c*Aq]
                colp, colq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * colp - s * np.conj(e) * colq
                A[:, q] = s * e * colp + c * colq
                rowp, rowq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rowp - s * e * rowq
                A[q, :] = s * np.conj(e) * rowp + c * rowq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * np.conj(e) * vq
                V[:, q] = s * e * vp + c * vq
    else:
        raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")
    w = np.real(np.diag(A))
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


@dataclass(frozen=True)
class EigenSystem:
    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.size

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.conj().T

    def clusters(self, tol: float = CLUSTER_TOL) -> list[list[int]]:
        """Groups of consecutive levels whose spacings are below ``tol``."""
        groups = [[0]]
        for k in range(1, self.dim):
            if self.values[k] - self.values[k - 1] < tol:
                groups[-1].append(k)
            else:
                groups.append([k])
        return groups


def eigensystem(H, method: str = "lapack") -> EigenSystem:
    """Sorted spectrum and orthonormal frame of a Hermitian matrix.

    ``method="jacobi"`` uses :func:`jacobi_eigh`; the default defers to
    LAPACK.  Both apply the same deterministic phase convention.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    check_hermitian(H)
    if method == "jacobi":
        w, V = jacobi_eigh(H)
    elif method == "lapack":
        w, V = np.linalg.eigh(H)
    else:
        raise ValueError(f"unknown method {method!r}")
    return EigenSystem(np.asarray(w, dtype=float), fix_phases(V))


@dataclass(frozen=True)
class Projection:
    matrix: np.ndarray
    rank: int

    @property
    def complement(self) -> "Projection":
        n = self.matrix.shape[0]
        return Projection(np.eye(n) - self.matrix, n - self.rank)


def _normalize_band(band: Iterable[int], dim: int) -> np.ndarray:
    idx = np.unique(np.asarray(list(band), dtype=int))
    if idx.size and (idx[0] < 0 or idx[-1] >= dim):
        raise IndexError(f"band indices {idx.tolist()} out of range for dimension {dim}")
    return idx


def check_band(values, band: Sequence[int], tol: float = CLUSTER_TOL) -> None:
    """Raise :class:`SplitDegeneracyError` if ``band`` splits a degenerate cluster.

    ``values`` may carry leading batch axes.
    """
    values = np.asarray(values)
    dim = values.shape[-1]
    inside = np.zeros(dim, dtype=bool)
    inside[list(band)] = True
    edges = np.nonzero(inside[1:] != inside[:-1])[0]
    if edges.size == 0:
        return
    spacing = values[..., edges + 1] - values[..., edges]
    bad = spacing < tol
    if np.any(bad):
        where = np.argwhere(bad)[0]
        k = int(edges[where[-1]])
        raise SplitDegeneracyError(
            f"band {sorted(int(b) for b in band)} separates levels {k} and {k + 1} "
            f"which are {float(spacing[tuple(where)]):.3g} apart"
        )


def band_projection(es: EigenSystem, indices: Iterable[int]) -> Projection:
    """``P = sum_k v_k v_k^dagger`` over ``indices``, refusing to split clusters."""
    idx = _normalize_band(indices, es.dim)
    check_band(es.values, idx)
    V = es.vectors[:, idx]
    return Projection(V @ V.conj().T, int(idx.size))


def spectral_gap(es: EigenSystem, k: int) -> float:
    """``E_k - E_{k-1}`` (0-based levels), i.e. the k-th gap from the bottom."""
    if not 1 <= k <= es.dim - 1:
        raise IndexError(f"gap index must be in 1..{es.dim - 1}")
    return float(es.values[k] - es.values[k - 1])


# ---------------------------------------------------------------------------
# batched helpers used by the integrators
# ---------------------------------------------------------------------------


def eigh_batch(H):
    return np.linalg.eigh(H)


def projector_batch(H, band: Sequence[int], tol: float = CLUSTER_TOL):
    """Band projectors for a stack of Hermitian matrices, with cluster checks."""
    w, V = np.linalg.eigh(H)
    band = list(band)
    check_band(w, band, tol)
    Vb = V[..., band]
    return Vb @ np.conj(np.swapaxes(Vb, -1, -2))


def min_gaps(values) -> np.ndarray:
    """Per-gap minimum over all leading axes of a stack of sorted spectra."""
    v = np.asarray(values).reshape(-1, np.shape(values)[-1])
    return (v[:, 1:].min(axis=0) - v[:, :-1].max(axis=0)) if v.shape[0] else np.array([])


# ---------------------------------------------------------------------------
# trimer crossing locus
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CrossingTest:
    crossing: bool
    margin: float


def trimer_crossing_test(a: float, b: float, c: float, theta: float = 0.0, tol: float = 1e-9) -> CrossingTest:
    """Whether the trimer has a degenerate level, from the characteristic polynomial.

    ``margin`` is the arithmetic-geometric defect
    ``(a^2+b^2+c^2)^{3/2} - 3^{3/2} a b c |cos theta|``, nonnegative for
    positive amplitudes and zero exactly on the crossing locus.
    """
    cos = np.cos(theta)
    lhs = (a * a + b * b + c * c) ** 1.5
    margin = float(lhs - 3**1.5 * a * b * c * abs(cos))
    scale = max(1.0, lhs)
    on_locus = abs(margin) < tol * scale and abs(abs(cos) - 1.0) < tol
    return CrossingTest(bool(on_locus), margin)
