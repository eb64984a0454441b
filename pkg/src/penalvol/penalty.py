"""Projectors, penalty matrices and the implicit penalty substep."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidRank, NonPositiveDensity, RankDeficient, SingularSystem


class PenaltyMode(enum.Enum):
    PROJECTOR_IN_V = "ProjectorInV"
    FULL_L2_IN_V = "FullL2InV"  # control only: penalises every component
    ORIGINAL_VARIABLE_M = "OriginalVariableM"

    @classmethod
    def parse(cls, text):
        for mode in cls:
            if text == mode.value or text == mode.name:
                return mode
        raise ValueError(f"unknown penalty mode {text!r}")


def obstacle_mask(x):
    """Characteristic function of the obstacle ``x < 0`` at cell centres."""
    return (np.asarray(x) < 0.0).astype(float)


@dataclass(frozen=True)
class Projector:
    n: int
    p: int
    matrix: np.ndarray


@dataclass(frozen=True)
class PenaltyConfig:
    epsilon: float
    mode: PenaltyMode = PenaltyMode.PROJECTOR_IN_V
    mask: Callable = obstacle_mask

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


def build_projector(n: int, p: int) -> Projector:
    if not (1 <= p <= n):
        raise InvalidRank(f"rank p={p} outside [1, {n}]")
    m = np.zeros((n, n))
    m[np.arange(p), np.arange(p)] = 1.0
    return Projector(n, p, m)


def build_column_permutation(C) -> list:
    """Column order moving ``p`` independent columns of ``C`` to the front.

    Columns are scanned left to right; Gaussian elimination with partial
    pivoting (largest remaining row entry) accepts a column whenever it
    still has a nonzero pivot.  The accepted columns come first, in original
    order, followed by the rest.
    """
    a = np.atleast_2d(np.array(C, dtype=float))
    p, n = a.shape
    scale = max(1.0, np.max(np.abs(a))) if a.size else 1.0
    tol = 1e-12 * scale * max(p, n)
    rows = list(range(p))
    chosen = []
    for col in range(n):
        if len(chosen) == p:
            break
        mags = [abs(a[r, col]) for r in rows]
        best = int(np.argmax(mags))
        if mags[best] <= tol:
            continue
        piv = rows.pop(best)
        chosen.append(col)
        for r in rows:
            a[r] -= a[r, col] / a[piv, col] * a[piv]
    if len(chosen) < p:
        raise RankDeficient(f"C has rank < {p}")
    return chosen + [j for j in range(n) if j not in chosen]


def build_penalty_matrix_linear(C) -> np.ndarray:
    """``blockdiag(C_pp^T C_pp, 0)`` in the pivoted column order.

    Equal to ``C^T C`` exactly when the non-pivot columns of ``C`` are zero.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    p, n = C.shape
    perm = build_column_permutation(C)
    cpp = C[:, perm[:p]]
    out = np.zeros((n, n))
    out[:p, :p] = cpp.T @ cpp
    return out


def penalty_term_original(M0: float, u) -> np.ndarray:
    """Closed-form wall penalty ``(0, Gamma/M0 - N)`` for the plasma model.

    Vanishes exactly on ``M0 N - Gamma = 0``.  Note the sign: for ``M0 < 0``
    this term drives states *away* from the wall condition, so the solver
    uses its negation (see ``Model.original_penalty``).
    """
    u = np.asarray(u, dtype=float)
    n, g = u[..., 0], u[..., 1]
    if np.any(n <= 0):
        raise NonPositiveDensity("density must be positive")
    return np.stack([np.zeros_like(n), g / M0 - n], -1)


def penalty_term_from_chart(chart, p, u, h=1e-6):
    """Generic ``S(u)^{-1} (dH^T)^{-1} P H^{-1}(u)`` with ``dH`` by central differences."""
    u = np.asarray(u, dtype=float)
    n = u.shape[-1]
    v = chart.to_v(None, u)
    dh = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        dh[:, k] = (chart.from_v(None, v + e) - chart.from_v(None, v - e)) / (2 * h)
    pv = v.copy()
    pv[p:] = 0.0
    w = np.linalg.solve(dh.T, pv)
    if chart.symmetrizer is None:
        return w
    return np.linalg.solve(chart.symmetrizer(None, u), w)


def penalty_substep(a0_frozen, v, dt, cfg: PenaltyConfig, chi, proj: Projector, penalty_matrix=None):
    """Backward-Euler step of ``A0 dv/dt = -(chi/eps) Q v``.

    Works cellwise on stacked inputs: ``a0_frozen`` of shape ``(..., N, N)``,
    ``v`` and ``chi`` broadcast against it.  ``Q`` is ``P`` (projector mode),
    ``I`` (full L2 mode) or ``penalty_matrix`` (original-variable mode, where
    ``a0_frozen`` is the identity).
    """
    v = np.asarray(v, dtype=float)
    chi = np.asarray(chi, dtype=float)
    if cfg.mode is PenaltyMode.PROJECTOR_IN_V:
        q = proj.matrix
    elif cfg.mode is PenaltyMode.FULL_L2_IN_V:
        q = np.eye(proj.n)
    else:
        if penalty_matrix is None:
            raise ValueError("original-variable mode needs the model's penalty matrix")
        q = np.asarray(penalty_matrix, dtype=float)
    if v.ndim == 1:
        if chi == 0:
            return v.copy()
        a0 = np.asarray(a0_frozen, dtype=float)
        lhs = a0 + (dt * float(chi) / cfg.epsilon) * q
        return _solve(lhs, a0 @ v)

    out = v.copy()
    active = np.nonzero(np.broadcast_to(chi, v.shape[:-1]))[0]
    if active.size == 0:
        return out
    a0 = np.asarray(a0_frozen, dtype=float)[active]
    r = (dt * chi[active] / cfg.epsilon)[:, None, None] if chi.ndim else dt * float(chi) / cfg.epsilon
    lhs = a0 + r * q
    rhs = np.einsum("nij,nj->ni", a0, v[active])
    out[active] = _solve(lhs, rhs[..., None])[..., 0]
    return out


def _solve(lhs, rhs):
    try:
        sol = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(sol)):
        raise SingularSystem("penalty solve produced non-finite values")
    return sol
