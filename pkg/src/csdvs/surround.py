"""Horizontal-cell surround on a 2D resistive mesh.

Each node ``i`` obeys

    C dV_h/dt = G (V_p - V_h) - (1/R) * sum_{j in NSEW(i)} (V_h(i) - V_h(j))

with reflecting (Neumann) edges: nodes on the array border simply have fewer
lateral resistors.  Internally ``R = 1`` and ``G = 1/L**2`` so the dynamics
depend only on the space constant ``L`` and ``tau = C/G``.

Both the steady state and the backward-Euler step reduce to the same SPD
system ``(s + deg(i)/R) x_i - (1/R) sum_j x_j = b_i``, solved by conjugate
gradients preconditioned with an aggregation multigrid V-cycle whose smoother
is red-black Gauss-Seidel.  Kernels and reductions run single-threaded in a
fixed order, so results do not depend on thread count.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from csdvs import _kernels as _k
from csdvs.errors import ConfigError, DataError, FitError, SolverError

DEFAULT_TOL = 1e-8
DEFAULT_MAXITER = 1000
DENSE_ORACLE_MAX_NODES = 64 * 64


@dataclass(frozen=True)
class MeshParams:
    """Resistive mesh parameters.

    ``L`` is the space constant in pixels, ``tau`` the surround time constant
    ``C/G`` in seconds (0 selects the quasi-static solve).
    """

    L: float
    tau: float = 0.0
    R: float = 1.0

    def __post_init__(self):
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ConfigError(f"space constant L must be positive and finite, got {self.L}")
        if not (self.R > 0 and math.isfinite(self.R)):
            raise ConfigError(f"lateral resistance R must be positive, got {self.R}")
        if not (self.tau >= 0 and math.isfinite(self.tau)):
            raise ConfigError(f"tau must be >= 0, got {self.tau}")

    @property
    def G(self) -> float:
        return 1.0 / (self.R * self.L ** 2)

    @property
    def C(self) -> float:
        return self.tau * self.G

    @property
    def quasi_static(self) -> bool:
        return self.tau == 0


@dataclass
class SolveInfo:
    iterations: int = 0
    residual: float = 0.0
    seconds: float = 0.0


@dataclass
class SurroundState:
    v_h: np.ndarray
    params: MeshParams
    last_solve: SolveInfo = field(default_factory=SolveInfo)


# --------------------------------------------------------------------------
# mesh operator and multigrid hierarchy


class _Level:
    """Weighted 5-point operator ``A x = d*x + sum_j w_ij (x_i - x_j)``."""

    def __init__(self, d, wx, wy):
        self.d = d
        self.wx = np.ascontiguousarray(wx)  # (h, w-1): edge (i, j)-(i, j+1)
        self.wy = np.ascontiguousarray(wy)  # (h-1, w): edge (i, j)-(i+1, j)
        self.shape = d.shape
        diag = d.copy()
        diag[:, 1:] += wx
        diag[:, :-1] += wx
        diag[1:, :] += wy
        diag[:-1, :] += wy
        self.diag = diag
        self.work = np.empty(self.shape)

    def matvec(self, x, out=None):
        if out is None:
            out = np.empty(self.shape)
        return _k.matvec(x, self.d, self.wx, self.wy, out)

    def coarsen(self):
        h, w = self.shape
        rows = np.arange(0, h, 2)
        cols = np.arange(0, w, 2)
        d = np.add.reduceat(np.add.reduceat(self.d, rows, axis=0), cols, axis=1)
        # only fine edges crossing aggregate boundaries survive
        if w > 2:
            wx = np.add.reduceat(self.wx[:, 1::2], rows, axis=0)
        else:
            wx = np.zeros((d.shape[0], 0))
        if h > 2:
            wy = np.add.reduceat(self.wy[1::2, :], cols, axis=1)
        else:
            wy = np.zeros((0, d.shape[1]))
        return _Level(d, wx, wy)


class _Hierarchy:
    """Galerkin aggregation hierarchy down to a single node."""

    def __init__(self, shape, shift, lateral):
        h, w = shape
        fine = _Level(np.full(shape, float(shift)),
                      np.full((h, w - 1), float(lateral)),
                      np.full((h - 1, w), float(lateral)))
        self.levels = [fine]
        while self.levels[-1].shape != (1, 1):
            self.levels.append(self.levels[-1].coarsen())
        self.rhs = [None] + [np.empty(lev.shape) for lev in self.levels[1:]]

    @property
    def fine(self):
        return self.levels[0]

    def vcycle(self, b, k=0):
        """Symmetric V-cycle applied to ``b`` from a zero guess."""
        lev = self.levels[k]
        x = np.zeros(lev.shape)
        if k == len(self.levels) - 1:
            x[...] = b / lev.diag
            return x
        _k.rb_sweep(x, b, lev.diag, lev.wx, lev.wy, 0)
        r = _k.residual(b, x, lev.d, lev.wx, lev.wy, lev.work)
        rc = _k.restrict(r, self.rhs[k + 1])
        ec = self.vcycle(rc, k + 1)
        _k.prolong_add(ec, x)
        _k.rb_sweep(x, b, lev.diag, lev.wx, lev.wy, 1)
        return x


@lru_cache(maxsize=16)
def _hierarchy(shape, shift, lateral):
    return _Hierarchy(shape, shift, lateral)


def _dot(a, b):
    # sequential loop; a BLAS dot may split work across threads
    return _k.dot(a, b)


def _pcg(hier, b, x0, target, maxiter):
    """Preconditioned CG until ``|b - A x| <= target``.

    Returns ``(x, iterations, |b - A x|)``.  The iteration runs on
    ``b / max|b|`` so squared norms neither overflow nor underflow.
    """
    scale = float(np.max(np.abs(b))) if b.size else 0.0
    if scale == 0.0:
        return np.zeros_like(b), 0, 0.0
    x, it, rnorm = _pcg_scaled(hier, b / scale, None if x0 is None else np.asarray(x0) / scale,
                               target / scale, maxiter)
    return x * scale, it, rnorm * scale


def _pcg_scaled(hier, b, x0, target, maxiter):
    A = hier.fine
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float, copy=True)
    r = b - A.matvec(x)
    rnorm = math.sqrt(_dot(r, r))
    it = 0
    while rnorm > target:
        if it >= maxiter:
            break
        z = hier.vcycle(r)
        p = z
        rz = _dot(r, z)
        stalled = False
        while it < maxiter:
            pAp = _dot(p, Ap := A.matvec(p))
            if not (rz > 0 and pAp > 0):
                # exact zero residual or lost positivity: nothing left to gain
                stalled = True
                break
            it += 1
            alpha = rz / pAp
            x += alpha * p
            r -= alpha * Ap
            if math.sqrt(_dot(r, r)) <= target:
                break
            z = hier.vcycle(r)
            rz_new = _dot(r, z)
            p = z + (rz_new / rz) * p
            rz = rz_new
        # confirm with the true residual; restart if recurrences drifted
        r = b - A.matvec(x)
        rnorm = math.sqrt(_dot(r, r))
        if stalled:
            break
    return x, it, rnorm


def _norm(a):
    m = float(np.max(np.abs(a))) if a.size else 0.0
    if m == 0.0:
        return 0.0
    s = a / m
    return m * math.sqrt(_dot(s, s))


def solve_mesh(b, shift, params: MeshParams, tol=DEFAULT_TOL, x0=None, maxiter=DEFAULT_MAXITER):
    """Solve ``(shift + deg/R) x - (1/R) * sum_nbrs x = b`` on the mesh.

    Returns ``(x, SolveInfo)``.  The relative residual ``|b - A x| / |b|``
    of the returned ``x`` is at most ``tol``.
    """
    if not tol > 0:
        raise ConfigError(f"solver tolerance must be positive, got {tol}")
    if not shift > 0:
        raise ConfigError(f"mesh diagonal shift must be positive, got {shift}")
    b = np.asarray(b, dtype=float)
    if b.ndim != 2:
        raise ConfigError(f"expected a 2D field, got shape {b.shape}")
    t0 = time.perf_counter()
    hier = _hierarchy(b.shape, float(shift), 1.0 / params.R)
    bnorm = _norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), SolveInfo(0, 0.0, time.perf_counter() - t0)
    # A 1 = shift 1, so the mean of b is solved exactly by a constant and
    # only the zero-mean remainder is iterated.  For large L the solution is
    # nearly uniform and this keeps the residual far above rounding noise.
    mean = float(np.mean(b))
    base = mean / shift
    x0_dev = None if x0 is None else np.asarray(x0, dtype=float) - base
    y, it, rnorm = _pcg(hier, b - mean, x0_dev, tol * bnorm, maxiter)
    rel = rnorm / bnorm
    if rel > tol:
        raise SolverError(
            f"surround solve did not converge after {it} iterations "
            f"(relative residual {rel:.3e} > {tol:.1e})", residual=rel, iterations=it)
    return base + y, SolveInfo(it, rel, time.perf_counter() - t0)


def mesh_matvec(x, shift, params: MeshParams):
    """Apply the mesh operator; used for residual checks."""
    x = np.asarray(x, dtype=float)
    return _hierarchy(x.shape, float(shift), 1.0 / params.R).fine.matvec(x)


def _check_finite(v_p):
    v_p = np.asarray(v_p, dtype=float)
    if not np.all(np.isfinite(v_p)):
        y, x = np.argwhere(~np.isfinite(v_p))[0]
        raise DataError(f"non-finite photoreceptor value at pixel (x={x}, y={y})")
    return v_p


def solve_steady_state(v_p, params: MeshParams, tol=DEFAULT_TOL, x0=None, info=None):
    """Quasi-static surround: the equilibrium of the mesh driven by ``v_p``.

    ``x0`` warm-starts the iteration; the answer is defined by ``tol`` alone.
    Pass a :class:`SolveInfo` as ``info`` to receive iteration statistics.
    """
    v_p = _check_finite(v_p)
    G = params.G
    v_h, si = solve_mesh(G * v_p, G, params, tol=tol, x0=x0)
    if info is not None:
        info.iterations, info.residual, info.seconds = si.iterations, si.residual, si.seconds
    return v_h


def surround_init(v_p, params: MeshParams, tol=DEFAULT_TOL) -> SurroundState:
    """Start the surround at equilibrium with the first photoreceptor frame."""
    info = SolveInfo()
    v_h = solve_steady_state(v_p, params, tol=tol, info=info)
    return SurroundState(v_h, params, info)


def step_transient(state: SurroundState, v_p, dt, tol=DEFAULT_TOL) -> SurroundState:
    """One backward-Euler step of length ``dt`` seconds.

    Solves ``(C/dt + G + deg/R) v' - (1/R) sum v'_j = (C/dt) v + G v_p``,
    unconditionally stable for any ``dt``.  The previous state warm-starts
    the solve.
    """
    params = state.params
    if not dt > 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    if params.quasi_static:
        raise ConfigError("step_transient needs tau > 0; use solve_steady_state for tau = 0")
    v_p = _check_finite(v_p)
    c_dt = params.C / dt
    rhs = c_dt * state.v_h + params.G * v_p
    v_h, si = solve_mesh(rhs, c_dt + params.G, params, tol=tol, x0=state.v_h)
    return SurroundState(v_h, params, si)


# --------------------------------------------------------------------------
# dense reference


def assemble_dense(shape, shift, params: MeshParams):
    """Dense matrix of the mesh operator in row-major node order."""
    h, w = shape
    n = h * w
    if n > DENSE_ORACLE_MAX_NODES:
        raise ConfigError(f"dense assembly limited to {DENSE_ORACLE_MAX_NODES} nodes, got {n}")
    g_lat = 1.0 / params.R
    A = np.zeros((n, n))
    idx = np.arange(n).reshape(h, w)
    A[idx.ravel(), idx.ravel()] = shift
    for a, b in ((idx[:, :-1], idx[:, 1:]), (idx[:-1, :], idx[1:, :])):
        a, b = a.ravel(), b.ravel()
        A[a, a] += g_lat
        A[b, b] += g_lat
        A[a, b] -= g_lat
        A[b, a] -= g_lat
    return A


def solve_dense(v_p, params: MeshParams):
    """Direct LAPACK solve of the steady-state system (small grids only)."""
    v_p = _check_finite(v_p)
    A = assemble_dense(v_p.shape, params.G, params)
    return np.linalg.solve(A, params.G * v_p.ravel()).reshape(v_p.shape)


# --------------------------------------------------------------------------
# space-constant measurement


def chain_decay_ratio(L, R=1.0):
    """Per-node decay ``gamma`` of an infinite 1D chain: ``gamma + 1/gamma = 2 + R*G``."""
    rg = 1.0 / L ** 2
    return 1.0 + rg / 2.0 - math.sqrt(rg + rg * rg / 4.0)


def fit_space_constant(response, source, direction=(0, 1), margin=2, min_fit_value=1e-12):
    """Measure the 1/e decay length of ``response`` walking away from ``source``.

    ``source`` is ``(row, col)`` of the impulse, or of the last driven pixel
    for a half-plane drive; ``direction`` is the ``(drow, dcol)`` unit step.
    The decay length is the slope of a log-linear fit of ``|response|`` over
    distances ``1 .. 3L``, iterated until the window is consistent with the
    fitted ``L``.  Pixels within ``margin`` of the array border are excluded.
    """
    resp = np.asarray(response, dtype=float)
    if resp.ndim == 1:
        resp = resp[None, :]
    h, w = resp.shape
    r0, c0 = source
    dr, dc = direction
    dist, vals = [], []
    d = 1
    while True:
        r, c = r0 + d * dr, c0 + d * dc
        if not (0 <= r < h and 0 <= c < w):
            break
        interior = (margin <= c < w - margin) and (h == 1 or margin <= r < h - margin)
        if interior:
            dist.append(d)
            vals.append(abs(resp[r, c]))
        d += 1
    dist = np.array(dist, dtype=float)
    vals = np.array(vals)
    keep = vals >= min_fit_value
    if keep.sum() < 2 or not keep[0]:
        raise FitError("response too small or too short to fit a space constant")
    dist, logv = dist[keep], np.log(vals[keep])
    # fit window grows/shrinks until it spans 1..3L of the fitted L
    hi = dist[-1]
    L_fit = float("nan")
    for _ in range(50):
        sel = dist <= hi
        if sel.sum() < 2:
            sel[:2] = True
        slope = np.polyfit(dist[sel], logv[sel], 1)[0]
        if not slope < 0:
            raise FitError("response does not decay away from the source")
        L_new = -1.0 / slope
        new_hi = min(max(3.0 * L_new, dist[1]), dist[-1])
        if new_hi == hi and L_new == L_fit:
            break
        L_fit, hi = L_new, new_hi
    return L_fit
