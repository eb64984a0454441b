"""Smooth compactly supported source profiles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _psi(z):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    pos = z > 0
    out[pos] = np.exp(-1.0 / z[pos])
    return out


def smooth_step(z):
    """C-infinity transition: 0 for ``z <= 0``, 1 for ``z >= 1``."""
    a = _psi(z)
    return a / (a + _psi(1.0 - np.asarray(z, dtype=float)))


@dataclass(frozen=True)
class Plateau:
    """``amplitude`` on ``[start + rise, end - fall]``, smooth edges, zero outside ``[start, end]``."""

    amplitude: float = 0.2
    start: float = 0.0
    rise: float = 0.2
    end: float = 2.0
    fall: float = 0.5

    def __post_init__(self):
        if not (self.rise > 0 and self.fall > 0 and self.start + self.rise <= self.end - self.fall):
            raise ValueError("plateau needs rise, fall > 0 and start + rise <= end - fall")

    def __call__(self, t, x):
        x = np.asarray(x, dtype=float)
        return self.amplitude * smooth_step((x - self.start) / self.rise) \
            * smooth_step((self.end - x) / self.fall)


def zero(t, x):
    return np.zeros_like(np.asarray(x, dtype=float))


def component_sources(n: int, component: int, profile):
    """Tuple of ``n`` scalar sources, ``profile`` in slot ``component`` (0-based), zero elsewhere."""
    return tuple(profile if k == component else zero for k in range(n))


def vector_source(n: int, component: int, profile):
    """Vector-valued source ``(t, x) -> (len(x), n)`` with one nonzero component."""

    def f(t, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros(x.shape + (n,))
        out[..., component] = profile(t, x)
        return out

    return f
