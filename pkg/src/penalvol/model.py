"""Hyperbolic model abstraction and the two built-in models.

A model is stated in *reformulated* unknowns ``v`` in which the boundary
condition at ``x = 0`` is flat (the first ``p`` components vanish)::

    A0(v) dv/dt + A1(v) dv/dx = f(t, x, v)          on x > 0
    v_1 = ... = v_p = 0                             at x = 0

A :class:`BoundaryChart` links ``v`` to the original unknowns ``u``.

All matrix/vector callables are vectorised: ``x`` may be a scalar or an
array of shape ``(n,)`` and ``v`` an array of shape ``(..., N)``; matrices
come back with shape ``(..., N, N)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    InvalidMach,
    NonCharacteristicViolated,
    NonConstantSignature,
    PreconditionViolation,
    RankDeficient,
)
from .penalty import build_column_permutation

# Lower bound required of the smallest eigenvalue of A0 on sampled states.
A0_COERCIVITY = 1e-8
SYMMETRY_RTOL = 1e-12
EIG_TOL = 1e-10


def _empty_param(t, x):
    return np.zeros(np.shape(x) + (0,))


@dataclass(frozen=True)
class SystemSpec:
    """Quasilinear symmetric system ``A0(v) v_t + A1(v) v_x = f(t, x, v)``.

    ``max_speed`` is an optional fast path returning the spectral radius of
    ``A0^{-1} A1`` per state; when absent it is computed by eigen-decomposition.
    ``validity_radius`` bounds ``|v|_inf`` before a run is declared blown up.
    """

    n_state: int
    rank_p: int
    a0: Callable
    a1: Callable
    source: Callable
    param: Callable = _empty_param
    max_speed: Optional[Callable] = None
    validity_radius: float = np.inf

    def speeds(self, t, x, v):
        if self.max_speed is not None:
            return np.asarray(self.max_speed(t, x, v), dtype=float)
        a0 = self.a0(t, x, v)
        a1 = self.a1(t, x, v)
        lam = np.linalg.eigvals(np.linalg.solve(a0, a1))
        return np.max(np.abs(lam), axis=-1)


@dataclass(frozen=True)
class BoundaryChart:
    """Boundary operator ``theta`` and the change of unknown ``u = from_v(v)``.

    ``theta(y, u)`` returns a ``p``-vector; ``to_v`` and ``from_v`` are mutual
    inverses; ``symmetrizer(y, u)`` is optional (identity when omitted).
    """

    theta: Callable
    to_v: Callable
    from_v: Callable
    symmetrizer: Optional[Callable] = None


@dataclass(frozen=True)
class ValidityReport:
    dissipative: bool
    mu_estimate: float
    n_positive_eig: int
    n_negative_eig: int
    samples_checked: int
    worst_violation: float


@dataclass(frozen=True)
class Model:
    """A built-in model: reformulated system plus chart.

    ``original`` is the same physics written directly in ``u`` (used by the
    original-variable penalty mode) and ``original_penalty`` the constant
    matrix ``K`` with ``M(u) u = K u`` for that mode.
    """

    name: str
    spec: SystemSpec
    chart: BoundaryChart
    original: Optional[SystemSpec] = None
    original_penalty: Optional[np.ndarray] = None
    params: dict = field(default_factory=dict)

    def __iter__(self):
        # allows ``spec, chart = make_plasma_model(...)``
        return iter((self.spec, self.chart))


# ---------------------------------------------------------------------------
# hypothesis checks
# ---------------------------------------------------------------------------

def check_dissipativity(spec: SystemSpec, chart: BoundaryChart, boundary_samples) -> ValidityReport:
    """Check maximal strict dissipativity of ``P v = 0`` at ``x = 0``.

    ``boundary_samples`` is a sequence of ``(t, v)`` with ``P v = 0``.  The
    quadratic form ``W -> <A1(v) W, W>`` is restricted to ``ker P`` (the last
    ``N - p`` coordinates) and must be negative definite; ``A1`` must have
    exactly ``p`` positive eigenvalues at every sample.
    """
    n, p = spec.n_state, spec.rank_p
    worst = -np.inf
    signature = None
    count = 0
    for t, v in boundary_samples:
        v = np.asarray(v, dtype=float)
        if np.any(np.abs(v[:p]) > 0.0):
            raise PreconditionViolation(f"boundary sample {v} has P v != 0")
        a1 = np.asarray(spec.a1(t, 0.0, v), dtype=float)
        scale = max(1.0, np.max(np.abs(a1)))
        if np.max(np.abs(a1 - a1.T)) > SYMMETRY_RTOL * scale:
            raise PreconditionViolation("A1 is not symmetric at a boundary sample")
        lam = np.linalg.eigvalsh(a1)
        if np.min(np.abs(lam)) <= EIG_TOL * scale:
            raise NonCharacteristicViolated(
                f"A1 is singular at boundary state {v} (eigenvalues {lam})")
        sig = (int(np.sum(lam > 0)), int(np.sum(lam < 0)))
        if signature is None:
            signature = sig
        elif sig != signature:
            raise NonConstantSignature(
                f"eigenvalue signature {sig} differs from {signature}")
        if p < n:
            worst = max(worst, float(np.max(np.linalg.eigvalsh(a1[p:, p:]))))
        count += 1
    if count == 0:
        raise PreconditionViolation("no boundary samples given")
    mu = np.inf if p == n else -worst
    n_pos, n_neg = signature
    return ValidityReport(
        dissipative=bool(mu > 0 and n_pos == p),
        mu_estimate=float(max(mu, 0.0)),
        n_positive_eig=n_pos,
        n_negative_eig=n_neg,
        samples_checked=count,
        worst_violation=float(max(worst, 0.0)) if p < n else 0.0,
    )


def boundary_samples(spec: SystemSpec, n_samples=16, radius=0.5, seed=0):
    """Deterministic samples ``(t, v)`` with ``P v = 0`` and ``|v|_inf <= radius``."""
    rng = np.random.default_rng(seed)
    out = [(0.0, np.zeros(spec.n_state))]
    for _ in range(n_samples - 1):
        v = rng.uniform(-radius, radius, spec.n_state)
        v[: spec.rank_p] = 0.0
        out.append((0.0, v))
    return out


def state_samples(model: Model, n_samples=200, radius=0.5, seed=0):
    """Original-variable samples ``u = from_v(v)`` with ``|v|_inf <= radius``.

    Every second sample lies on the boundary (``P v = 0``) so that boundary
    equivalence is exercised in both directions.
    """
    rng = np.random.default_rng(seed)
    v = rng.uniform(-radius, radius, (n_samples, model.spec.n_state))
    v[::2, : model.spec.rank_p] = 0.0
    return model.chart.from_v(None, v)


def check_structure(spec: SystemSpec, samples, t=0.0, x=0.0):
    """Return ``(max symmetry residual, min eigenvalue of A0)`` over ``samples`` of ``v``."""
    v = np.asarray(samples, dtype=float)
    a0 = spec.a0(t, x, v)
    a1 = spec.a1(t, x, v)
    sym = 0.0
    for m in (a0, a1):
        scale = np.maximum(1.0, np.max(np.abs(m), axis=(-1, -2)))
        sym = max(sym, float(np.max(np.max(np.abs(m - np.swapaxes(m, -1, -2)), axis=(-1, -2)) / scale)))
    e = float(np.min(np.linalg.eigvalsh(a0)))
    return sym, e


def check_chart(chart: BoundaryChart, u_samples, p, theta_tol=1e-10, v_tol=1e-8):
    """Round-trip residual and boundary-equivalence check on original states.

    Returns ``(max relative round-trip error, equivalence holds on all samples)``.
    """
    u = np.asarray(u_samples, dtype=float)
    v = chart.to_v(None, u)
    back = chart.from_v(None, v)
    rt = np.linalg.norm(back - u, axis=-1) / (1.0 + np.linalg.norm(u, axis=-1))
    on_boundary = np.linalg.norm(np.atleast_2d(chart.theta(None, u)), axis=-1) <= theta_tol
    flat = np.linalg.norm(v[..., :p], axis=-1) <= v_tol
    return float(np.max(rt)), bool(np.all(on_boundary == flat))


# ---------------------------------------------------------------------------
# plasma model
# ---------------------------------------------------------------------------

def _zero_source(t, x):
    return np.zeros_like(np.asarray(x, dtype=float))


def make_plasma_model(M0: float, sources=None, validate=True, validity_radius=0.5) -> Model:
    """Isothermal edge-plasma model with a Mach condition at the wall.

    Original unknowns ``u = (N, Gamma)``, boundary condition
    ``M0 N - Gamma = 0``.  Reformulated unknowns are ``(Gamma/N - M0, ln N)``
    for which ``A0 = I`` and ``A1 = [[M, 1], [1, M]]`` with ``M = v1 + M0``.

    ``sources`` is a pair ``(S_N, S_Gamma)`` of callables of ``(t, x)``.
    ``validate=False`` skips the Mach-range check so that inadmissible
    models can be built for hypothesis testing.
    """
    M0 = float(M0)
    if validate and not (-1.0 < M0 < 0.0):
        raise InvalidMach(f"M0 must lie in (-1, 0), got {M0}")
    s_n, s_g = sources if sources is not None else (_zero_source, _zero_source)

    def a0(t, x, v):
        v = np.asarray(v, dtype=float)
        return np.broadcast_to(np.eye(2), v.shape[:-1] + (2, 2)).copy()

    def a1(t, x, v):
        v = np.asarray(v, dtype=float)
        m = v[..., 0] + M0
        one = np.ones_like(m)
        return np.stack([np.stack([m, one], -1), np.stack([one, m], -1)], -2)

    def source(t, x, v):
        v = np.asarray(v, dtype=float)
        m = v[..., 0] + M0
        inv_n = np.exp(-v[..., 1])
        sn = s_n(t, x)
        sg = s_g(t, x)
        return np.stack([(sg - m * sn) * inv_n, sn * inv_n], -1)

    def max_speed(t, x, v):
        return np.abs(np.asarray(v)[..., 0] + M0) + 1.0

    spec = SystemSpec(2, 1, a0, a1, source, max_speed=max_speed, validity_radius=validity_radius)

    def theta(y, u):
        u = np.asarray(u, dtype=float)
        return (M0 * u[..., 0] - u[..., 1])[..., None]

    def to_v(y, u):
        u = np.asarray(u, dtype=float)
        n, g = u[..., 0], u[..., 1]
        return np.stack([g / n - M0, np.log(n)], -1)

    def from_v(y, v):
        v = np.asarray(v, dtype=float)
        n = np.exp(v[..., 1])
        return np.stack([n, (v[..., 0] + M0) * n], -1)

    def symmetrizer(y, u):
        # S = (dH dH^T)^{-1} with dH = [[0, N], [N, Gamma]], so that A0 = dH^T S dH = I
        u = np.asarray(u, dtype=float)
        n, g = u[..., 0], u[..., 1]
        dh = np.stack([np.stack([np.zeros_like(n), n], -1), np.stack([n, g], -1)], -2)
        return np.linalg.inv(dh @ np.swapaxes(dh, -1, -2))

    chart = BoundaryChart(theta, to_v, from_v, symmetrizer)

    def a1_orig(t, x, u):
        u = np.asarray(u, dtype=float)
        m = u[..., 1] / u[..., 0]
        return np.stack([np.stack([np.zeros_like(m), np.ones_like(m)], -1),
                         np.stack([1.0 - m * m, 2.0 * m], -1)], -2)

    def source_orig(t, x, u):
        u = np.asarray(u, dtype=float)
        sn = np.broadcast_to(s_n(t, x), u.shape[:-1])
        sg = np.broadcast_to(s_g(t, x), u.shape[:-1])
        return np.stack([sn, sg], -1)

    def max_speed_orig(t, x, u):
        u = np.asarray(u)
        return np.abs(u[..., 1] / u[..., 0]) + 1.0

    original = SystemSpec(2, 1, a0, a1_orig, source_orig, max_speed=max_speed_orig,
                          validity_radius=np.inf)
    # The wall-penalty display (0, Gamma/M0 - N) relaxes away from Gamma = M0 N
    # when M0 < 0; K below is its negation, which relaxes towards it.
    penalty = np.array([[0.0, 0.0], [1.0, -1.0 / M0]]) if M0 != 0.0 else None

    return Model("plasma", spec, chart, original, penalty, {"M0": M0})


# ---------------------------------------------------------------------------
# linear model
# ---------------------------------------------------------------------------

def make_linear_model(A_bar, C, source=None, validity_radius=1e3) -> Model:
    """Constant-coefficient model ``u_t + A_bar u_x = f(t, x)``, ``C u(0) = 0``.

    The change of unknown is ``v = (C u, u_rest)`` after moving ``p`` pivot
    columns of ``C`` to the front; it reduces to ``(C_pp u_front, u_rest)``
    when the remaining columns of ``C`` vanish.
    """
    A_bar = np.atleast_2d(np.asarray(A_bar, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = A_bar.shape[0]
    p = C.shape[0]
    if A_bar.shape != (n, n) or C.shape[1] != n:
        raise PreconditionViolation(f"shape mismatch: A_bar {A_bar.shape}, C {C.shape}")
    if not np.allclose(A_bar, A_bar.T, rtol=0.0, atol=SYMMETRY_RTOL * max(1.0, np.abs(A_bar).max())):
        raise PreconditionViolation("A_bar must be symmetric")
    if np.linalg.matrix_rank(C) < p:
        raise RankDeficient(f"rank(C) < p = {p}")
    perm = np.asarray(build_column_permutation(C))
    cp = C[:, perm]
    cpp_inv = np.linalg.inv(cp[:, :p])
    c_rest = cp[:, p:]
    inv_perm = np.argsort(perm)

    def to_v(y, u):
        u = np.asarray(u, dtype=float)
        up = u[..., perm]
        return np.concatenate([up @ cp.T, up[..., p:]], axis=-1)

    def from_v(y, v):
        v = np.asarray(v, dtype=float)
        front = (v[..., :p] - v[..., p:] @ c_rest.T) @ cpp_inv.T
        up = np.concatenate([front, v[..., p:]], axis=-1)
        return up[..., inv_perm]

    def theta(y, u):
        return np.asarray(u, dtype=float) @ C.T

    chart = BoundaryChart(theta, to_v, from_v)

    G = from_v(None, np.eye(n))  # rows are H(e_k), so G.T is dH
    G = G.T
    A0 = G.T @ G
    A1 = G.T @ A_bar @ G
    speed = float(np.max(np.abs(np.linalg.eigvalsh(A_bar))))
    fbar = source if source is not None else (lambda t, x: np.zeros(np.shape(x) + (n,)))

    def a0(t, x, v):
        return np.broadcast_to(A0, np.shape(v)[:-1] + (n, n)).copy()

    def a1(t, x, v):
        return np.broadcast_to(A1, np.shape(v)[:-1] + (n, n)).copy()

    def f(t, x, v):
        val = np.asarray(fbar(t, x), dtype=float)
        val = np.broadcast_to(val, np.shape(v)[:-1] + (n,))
        return val @ G

    def max_speed(t, x, v):
        return np.full(np.shape(v)[:-1], speed)

    spec = SystemSpec(n, p, a0, a1, f, max_speed=max_speed, validity_radius=validity_radius)

    def a1_orig(t, x, u):
        return np.broadcast_to(A_bar, np.shape(u)[:-1] + (n, n)).copy()

    def f_orig(t, x, u):
        return np.broadcast_to(np.asarray(fbar(t, x), dtype=float), np.shape(u)[:-1] + (n,)).copy()

    def a0_orig(t, x, u):
        return np.broadcast_to(np.eye(n), np.shape(u)[:-1] + (n, n)).copy()

    original = SystemSpec(n, p, a0_orig, a1_orig, f_orig, max_speed=max_speed,
                          validity_radius=validity_radius)
    # penalty in u for a linear chart: dv/du^T P dv/du = C^T C
    return Model("linear", spec, chart, original, C.T @ C,
                 {"A_bar": A_bar, "C": C, "perm": perm, "G": G})
