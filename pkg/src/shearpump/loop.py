"""Closed deformation loops in the complex shear plane."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import LoopNotClosedError

MIN_SAMPLES = 8


@dataclass(frozen=True)
class DeformationLoop:
    """Discretized closed path ``x(s)``, ``s_k = k/N``.

    The last sample connects back to the first (closure is implied, the
    starting point is not repeated).  When ``path`` is given the loop can be
    resampled at any resolution, which the integrators use for refinement.
    """

    samples: np.ndarray
    eps: Optional[float] = None
    winding: Optional[int] = None
    path: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        xs = np.asarray(self.samples, dtype=complex).ravel()
        if xs.size < MIN_SAMPLES:
            raise ValueError(f"a loop needs at least {MIN_SAMPLES} samples, got {xs.size}")
        object.__setattr__(self, "samples", xs)

    @classmethod
    def circle(cls, radius: float, n: int = 256, center: complex = 0.0, orientation: int = 1):
        """Counterclockwise (``orientation=+1``) circle of the given radius."""
        center = complex(center)

        def path(s):
            return center + radius * np.exp(2j * np.pi * orientation * np.asarray(s, dtype=float))

        winding = orientation if abs(center) < radius else 0
        return cls(path(np.arange(n) / n), eps=float(radius), winding=winding, path=path)

    @classmethod
    def from_path(cls, path, n: int = 256, eps=None, winding=None):
        return cls(path(np.arange(n) / n), eps=eps, winding=winding, path=path)

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def s(self) -> np.ndarray:
        return np.arange(self.n) / self.n

    def resample(self, n: int) -> "DeformationLoop":
        if self.path is None:
            raise ValueError("loop has no path callable; cannot resample")
        return DeformationLoop(self.path(np.arange(n) / n), self.eps, self.winding, self.path)

    def reversed(self) -> "DeformationLoop":
        path = None
        if self.path is not None:
            f = self.path
            path = lambda s: f((1.0 - np.asarray(s, dtype=float)) % 1.0)  # noqa: E731
        xs = np.concatenate([self.samples[:1], self.samples[:0:-1]])
        winding = None if self.winding is None else -self.winding
        return DeformationLoop(xs, self.eps, winding, path)

    def check_closed(self, factor: float = 4.0) -> None:
        """Raise unless the closing segment is comparable to the other steps."""
        steps = np.abs(np.diff(self.samples))
        closing = abs(self.samples[0] - self.samples[-1])
        scale = np.median(steps)
        if scale == 0.0:
            if closing != 0.0:
                raise LoopNotClosedError("constant loop with a nonzero closing step")
            return
        if closing > factor * max(steps.max(), scale):
            raise LoopNotClosedError(
                f"closing step {closing:.3g} is much longer than the sample spacing {scale:.3g}"
            )

    def velocities(self) -> np.ndarray:
        """``dx/ds`` at every sample.

        Uses the analytic path when available (complex-step free central
        difference of the callable) and spectral differentiation otherwise.
        """
        n = self.n
        if self.path is not None:
            h = 1e-6
            s = self.s
            return (self.path(s + h) - self.path(s - h)) / (2 * h)
        k = np.fft.fftfreq(n, d=1.0 / n)
        if n % 2 == 0:
            k[n // 2] = 0.0
        return np.fft.ifft(2j * np.pi * k * np.fft.fft(self.samples))
