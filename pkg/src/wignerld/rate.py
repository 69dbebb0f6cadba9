"""Minimax evaluation of the upper-tail rate functions.

The rate at a deviation target x is an outer infimum over localization
profiles of an inner supremum over the inverse temperature theta:

    rate(x) = inf_profile  sup_theta { J(x, theta) - F(theta, profile scaled
                                       by the overlap q_x(theta)) }

with three profile parametrizations (modes): a finite-N vector profile, the
scalar single-coordinate reduction, and the two-scale reduction.  The
overlap enters linearly on vector profiles and quadratically on scalar
masses.

The single-coordinate (hat) mode is the hot path for curve generation; its
Gibbs term reduces to a one-variable function that is precomputed on a grid
and interpolated by a cubic spline (values checked against the direct
free-energy path in the test suite).
"""

from __future__ import annotations

import math
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import free_energy, semicircle
from .entries import EntryDistribution
from .gibbs import _grid_for, solve_exponent_batch, values_from_batch

__all__ = [
    "HatSpec",
    "FiniteNSpec",
    "TildeSpec",
    "HatMode",
    "FiniteNMode",
    "TildeMode",
    "ProfileFamily",
    "RatePoint",
    "RateCurve",
    "RateError",
    "RateCurveError",
    "sup_theta",
    "joint_rate",
    "rate_point",
    "rate_curve",
]

_THETA_OFFSET = 1e-6  # lower bracket sits this far above theta_minus
_T_INIT = 8.0
_T_MAX = 1024.0
_DECAY_MARGIN = 1.0  # the objective at T must sit this far below the max
_TIE_TOL = 1e-9  # minimizers within this of the optimum count as ties


class RateError(RuntimeError):
    """Inner maximization failure (typically an invalid penalty)."""


class RateCurveError(RuntimeError):
    """A grid point failed or a curve-level invariant was violated."""


# ---------------------------------------------------------------------------
# localization specs (argmin records) and search modes


@dataclass(frozen=True)
class HatSpec:
    """Single-coordinate reduction: scalar squared mass alpha."""

    alpha: float


@dataclass(frozen=True)
class FiniteNSpec:
    """Finite-N vector profile z with dimension parameter N and width R."""

    z: tuple
    N: int
    R: float

    @property
    def mass(self) -> float:
        z = np.asarray(self.z)
        return float(z @ z)


@dataclass(frozen=True)
class TildeSpec:
    """Two-scale profile: large-entry vector plus moderate-scale mass."""

    w_check: tuple
    alpha_tilde: float
    R: float
    t: float = None

    @property
    def mass(self) -> float:
        w = np.asarray(self.w_check)
        return float(w @ w) + self.alpha_tilde


@dataclass(frozen=True)
class ProfileFamily:
    """Structured search family: equal-mass spreads over k coordinates.

    Profiles are c * 1_[k] / sqrt(k) for k in ``k_values`` (powers of two up
    to ceil(sqrt(N)) by default) and c^2 on a uniform grid of ``n_mass``
    points.  Contains both the single-coordinate and the sqrt(N)-spread
    regimes; the outer infimum is over this family, not the full ball.
    """

    k_values: tuple = None
    n_mass: int = 101

    def ks(self, N: int) -> tuple:
        if self.k_values is not None:
            return tuple(self.k_values)
        ks = []
        k = 1
        top = math.ceil(math.sqrt(N))
        while k < top:
            ks.append(k)
            k *= 2
        ks.append(top)
        return tuple(ks)


@dataclass(frozen=True)
class HatMode:
    pass


@dataclass(frozen=True)
class FiniteNMode:
    N: int
    R: float = None
    family: ProfileFamily = field(default_factory=ProfileFamily)

    def width(self) -> float:
        return self.R if self.R is not None else self.N ** 0.2


@dataclass(frozen=True)
class TildeMode:
    N: int
    xi: float = 1e-3
    R: float = None
    t: float = None
    family: ProfileFamily = field(default_factory=ProfileFamily)
    n_alpha: int = 41

    def width(self) -> float:
        return self.R if self.R is not None else self.N ** 0.2


@dataclass(frozen=True)
class RatePoint:
    x: float
    rate: float
    theta_star: float
    minimizer: object
    goe_rate: float

    def check(self, slack: float = 1e-6):
        if self.rate < -1e-9:
            raise RateCurveError(f"negative rate {self.rate} at x={self.x}")
        if np.isfinite(self.goe_rate) and self.rate > self.goe_rate + slack:
            raise RateCurveError(
                f"rate {self.rate} exceeds the GOE rate {self.goe_rate} at x={self.x}"
            )


@dataclass(frozen=True)
class RateCurve:
    grid: tuple
    points: tuple
    x_mu: float = None

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.points])

    @property
    def goe_rates(self) -> np.ndarray:
        return np.array([p.goe_rate for p in self.points])


# ---------------------------------------------------------------------------
# inner supremum over theta


def _golden_max(f, lo: float, hi: float, tol: float):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def sup_theta(x: float, penalty, bracket_hint: float = None, *, n_grid: int = 512,
              theta_tol: float = 1e-10):
    """Maximize J(x, theta) - penalty(theta) over theta.

    ``penalty`` must accept numpy arrays.  A 512-point grid on
    [theta_minus + 1e-6, T] locates the best cell and golden-section search
    refines it; T doubles from 8 (or from ``bracket_hint``) until the
    objective at T has dropped a unit below the running maximum, failing
    with "unbounded objective" past T = 1024 (a penalty that grows slower
    than J signals an infeasible profile).
    """
    pt = semicircle.theta_roots(x)
    lo = pt.theta_minus + _THETA_OFFSET

    def objective(theta):
        return semicircle.j_value(x, theta) - penalty(theta)

    T = _T_INIT if bracket_hint is None else max(float(bracket_hint), lo + 1e-3)
    while True:
        grid = np.linspace(lo, T, n_grid)
        vals = objective(grid)
        if not np.all(np.isfinite(vals)):
            raise RateError(f"non-finite objective in theta scan at x={x}")
        best = float(vals.max())
        if vals[-1] <= best - _DECAY_MARGIN:
            break
        if T >= _T_MAX:
            raise RateError(f"unbounded objective: no decay by theta={T} at x={x}")
        T = min(2.0 * T, _T_MAX)

    i = int(np.argmax(vals))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, n_grid - 1)]
    theta_star, value = _golden_max(lambda t: float(objective(np.array([t]))[0]), a, b, theta_tol)
    if value < best:
        theta_star, value = grid[i], best
    return float(theta_star), float(value)


# ---------------------------------------------------------------------------
# fast single-coordinate (hat) evaluator

_HAT_LOCK = threading.Lock()
_HAT_CACHE: dict = {}


class _Phi1Table:
    """Spline table of the whole-line Gibbs value with a unit moment budget.

    The hat-mode Gibbs term reduces by dilation to phi1(u) evaluated at
    u = theta * sqrt(a(1-a)); phi1 is smooth, so a cubic spline on a 0.01
    grid reproduces the direct solve to ~1e-8 (asserted in tests).
    """

    def __init__(self, dist: EntryDistribution, du: float = 0.01):
        self.dist = dist
        self.du = du
        self.u_max = 0.0
        self.spline = None
        self.lock = threading.Lock()

    def _solve_grid(self, us: np.ndarray) -> np.ndarray:
        R = 16.0
        vals = self._values_at(us, R)
        active = np.ones(us.size, dtype=bool)
        while True:
            R *= 2.0
            nxt = self._values_at(us[active], R)
            moved = np.abs(nxt - vals[active]) >= 1e-8
            vals[active] = nxt
            idx = np.flatnonzero(active)
            active[idx[~moved]] = False
            if not active.any():
                return vals
            if R > 2.0**12:
                raise RateError("hat-mode Gibbs table did not converge in R")

    def _values_at(self, us: np.ndarray, R: float) -> np.ndarray:
        s, w = _grid_for(R)
        H = self.dist.log_laplace(2.0 * us[:, None] * s)
        zeta, log_mass, _ = solve_exponent_batch(H, s, w, 1.0)
        return values_from_batch(log_mass, zeta, 1.0)

    def _build(self, u_max: float):
        n = int(math.ceil(u_max / self.du)) + 1
        us = np.linspace(0.0, self.du * (n - 1), n)
        vals = self._solve_grid(us)
        self.spline = CubicSpline(us, vals)
        self.u_max = us[-1]

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        top = float(u.max()) if u.size else 0.0
        if self.spline is None or top > self.u_max:
            with self.lock:
                if self.spline is None or top > self.u_max:
                    self._build(max(6.0, 1.5 * top))
        return self.spline(u)


class _HatEvaluator:
    def __init__(self, dist: EntryDistribution):
        self.dist = dist
        self.phi1 = _Phi1Table(dist)
        self.psi_inf = dist.psi_extremes().psi_infty

    def f_hat(self, theta, alpha):
        """Vectorized single-coordinate free energy (spline-backed)."""
        theta = np.asarray(theta, dtype=float)
        alpha = np.asarray(alpha, dtype=float)
        beta = 1.0 - alpha
        phi = self.phi1(theta * np.sqrt(alpha * beta)) + 0.5 * np.log(beta)
        return theta**2 * (beta**2 + 2.0 * self.psi_inf * alpha**2) + phi

    def penalty(self, x: float, alpha: float):
        def pen(theta):
            q2 = np.clip(semicircle.overlap(x, theta) ** 2, 0.0, 1.0)
            return self.f_hat(theta, q2 * alpha)

        return pen


def _hat_evaluator(dist: EntryDistribution) -> _HatEvaluator:
    key = dist.key()
    with _HAT_LOCK:
        ev = _HAT_CACHE.get(key)
        if ev is None:
            ev = _HatEvaluator(dist)
            _HAT_CACHE[key] = ev
    return ev


# ---------------------------------------------------------------------------
# batched penalties for the vector modes


def _gibbs_penalty_batch(dist, theta_arr, scale_arr, values, counts, beta_arr, R):
    """Gibbs values for tilts (theta_i * scale_i) * values on [-R, R]."""
    s, w = _grid_for(R)
    H = np.zeros((theta_arr.size, s.size))
    amp = theta_arr * scale_arr
    for v, c in zip(values, counts):
        H += c * dist.log_laplace(2.0 * v * amp[:, None] * s)
    zeta, log_mass, _ = solve_exponent_batch(H, s, w, beta_arr)
    return values_from_batch(log_mass, zeta, beta_arr)


def _finite_n_penalty(dist: EntryDistribution, x: float, z, N: int, R: float):
    z = np.asarray(z, dtype=float)
    zsq = float(z @ z)
    vals, counts = np.unique(z[z != 0.0], return_counts=True)
    coefs, mults = free_energy._loc_terms(z, N)

    def pen(theta):
        theta = np.asarray(theta, dtype=float)
        q = semicircle.overlap(x, theta)
        nsq = np.clip(q * q * zsq, 0.0, 1.0)
        out = np.zeros_like(theta)
        if coefs.size:
            # localized sum with profile q*z: pair products pick up q^2
            args = coefs[:, None] * (theta * q * q)
            out += (dist.log_laplace(args).T @ mults) / N
        near_one = nsq >= 1.0 - 1e-9
        bulk = ~near_one
        if bulk.any():
            beta = 1.0 - nsq[bulk]
            out_b = theta[bulk] ** 2 * beta**2 - 0.5 * nsq[bulk]
            if vals.size:
                out_b += _gibbs_penalty_batch(
                    dist, theta[bulk], q[bulk], vals, counts, beta, R
                )
            else:
                out_b += _gibbs_penalty_batch(
                    dist, theta[bulk], q[bulk], [0.0], [0.0], beta, R
                )
            out[bulk] += out_b
        return out

    return pen


def _tilde_penalty(dist: EntryDistribution, x: float, w_check, alpha_tilde: float,
                   R: float, t: float):
    w_check = np.asarray(w_check, dtype=float)
    csq = float(w_check @ w_check)
    vals, counts = np.unique(w_check[w_check != 0.0], return_counts=True)
    ext = dist.psi_extremes()
    psi_sel = ext.psi_max if t is None else float(dist.psi(t))
    psi_inf = ext.psi_infty

    def pen(theta):
        theta = np.asarray(theta, dtype=float)
        q2 = np.clip(semicircle.overlap(x, theta) ** 2, 0.0, 1.0)
        c2 = q2 * csq
        at = q2 * alpha_tilde
        beta = 1.0 - at - c2
        if np.any(beta <= 0):
            raise RateError("two-scale profile leaves no residual mass")
        quad = beta**2 + 2 * beta * at + 2 * psi_sel * at**2 + 2 * psi_inf * (c2**2 + 2 * at * c2)
        out = theta**2 * quad - 0.5 * (1.0 - beta)
        out += _gibbs_penalty_batch(
            dist, theta, np.sqrt(q2), vals if vals.size else [0.0],
            counts if vals.size else [0.0], beta, R,
        )
        return out

    return pen


# ---------------------------------------------------------------------------
# joint rate and outer minimization


def joint_rate(dist: EntryDistribution, x: float, spec, bracket_hint: float = None):
    """Inner supremum for a fixed localization profile: (value, theta_star).

    The profile is scaled by the overlap before entering the free energy:
    linearly for vector components, quadratically for scalar masses.
    """
    if isinstance(spec, HatSpec):
        pen = _hat_evaluator(dist).penalty(x, spec.alpha)
    elif isinstance(spec, FiniteNSpec):
        pen = _finite_n_penalty(dist, x, spec.z, spec.N, spec.R)
    elif isinstance(spec, TildeSpec):
        pen = _tilde_penalty(dist, x, spec.w_check, spec.alpha_tilde, spec.R, spec.t)
    else:
        raise TypeError(f"unknown localization spec {spec!r}")
    theta_star, value = sup_theta(x, pen, bracket_hint)
    return value, theta_star


def _refine_scalar_minima(f, grid: np.ndarray, vals: np.ndarray):
    """Golden-section refinement around every local minimum of f on the grid."""
    n = grid.size
    candidates = []
    for i in range(n):
        left = vals[i - 1] if i > 0 else np.inf
        right = vals[i + 1] if i < n - 1 else np.inf
        if vals[i] <= left and vals[i] <= right:
            a = grid[max(i - 1, 0)]
            b = grid[min(i + 1, n - 1)]
            xs, vneg = _golden_max(lambda s: -f(s), a, b, 1e-8)
            candidates.append((xs, -vneg))
            candidates.append((float(grid[i]), float(vals[i])))
    return candidates


def _pick_smallest_minimizer(candidates):
    vmin = min(v for _, v in candidates)
    ties = [a for a, v in candidates if v <= vmin + _TIE_TOL]
    return min(ties), vmin


def rate_point(dist: EntryDistribution, x: float, mode, cap: float = 0.95) -> RatePoint:
    """Outer infimum over the mode's profile family at a single x.

    Below the spectral edge the rate is +inf.  The feasibility cap bounds
    the localized mass away from 1; a warning fires when the argmin presses
    against it.  Ties report the smallest minimizer.
    """
    if not 0.0 < cap < 1.0:
        raise ValueError("cap must lie in (0, 1)")
    if x < 2.0:
        return RatePoint(x, math.inf, math.inf, None, math.inf)
    goe = semicircle.goe_rate(x)

    if isinstance(mode, HatMode):
        ev = _hat_evaluator(dist)

        def jhat(alpha: float) -> float:
            return sup_theta(x, ev.penalty(x, alpha))[1]

        grid = np.linspace(0.0, cap, 201)
        vals = np.array([jhat(a) for a in grid])
        candidates = _refine_scalar_minima(jhat, grid, vals)
        alpha_star, rate = _pick_smallest_minimizer(candidates)
        if alpha_star > cap - 1e-3:
            warnings.warn(f"hat-mode minimizer {alpha_star:.4f} sits at the cap {cap}")
        theta_star, _ = sup_theta(x, ev.penalty(x, alpha_star))
        return RatePoint(x, rate, theta_star, HatSpec(alpha_star), goe)

    if isinstance(mode, FiniteNMode):
        R = mode.width()
        best = None
        for k, c in _vector_family(mode.family, mode.N, cap, None):
            z = np.full(k, c / math.sqrt(k)) if c > 0 else np.zeros(1)
            spec = FiniteNSpec(tuple(z), mode.N, R)
            value, th = joint_rate(dist, x, spec)
            cand = (value, c, k, th, spec)
            if best is None or _better(cand, best):
                best = cand
        value, c, _, th, spec = best
        if c > cap - 1e-3:
            warnings.warn(f"finite-N minimizer mass {c:.4f} sits at the cap {cap}")
        return RatePoint(x, value, th, spec, goe)

    if isinstance(mode, TildeMode):
        R = mode.width()
        best = None
        for at in np.linspace(0.0, cap, mode.n_alpha):
            room = cap - at
            if room < 0:
                continue
            for k, c in _vector_family(mode.family, mode.N, math.sqrt(room), mode.xi):
                w = np.full(k, c / math.sqrt(k)) if c > 0 else np.zeros(1)
                spec = TildeSpec(tuple(w), float(at), R, mode.t)
                value, th = joint_rate(dist, x, spec)
                cand = (value, c * c + at, k, th, spec)
                if best is None or _better(cand, best):
                    best = cand
        value, mass, _, th, spec = best
        if mass > cap - 1e-3:
            warnings.warn(f"two-scale minimizer mass {mass:.4f} sits at the cap {cap}")
        return RatePoint(x, value, th, spec, goe)

    raise TypeError(f"unknown mode {mode!r}")


def _better(cand, best) -> bool:
    # order: smaller value, then smaller mass, then smaller spread
    if cand[0] < best[0] - _TIE_TOL:
        return True
    if cand[0] > best[0] + _TIE_TOL:
        return False
    return (cand[1], cand[2]) < (best[1], best[2])


def _vector_family(family: ProfileFamily, N: int, c_max: float, xi: float):
    """(k, c) pairs of the structured search family; includes the zero profile."""
    yield (1, 0.0)
    c2_grid = np.linspace(0.0, c_max * c_max, family.n_mass)[1:]
    for k in family.ks(N):
        for c2 in c2_grid:
            c = math.sqrt(c2)
            if xi is not None and c / math.sqrt(k) < xi:
                continue  # entries fall below the large-coordinate threshold
            yield (k, c)


def rate_curve(dist: EntryDistribution, x_grid, mode, cap: float = 0.95,
               tol: float = 1e-3, threads: int = None) -> RateCurve:
    """Evaluate rate_point across a sorted grid of targets x >= 2.

    Any failed point poisons the whole curve with its diagnostic.  The
    detected threshold ``x_mu`` is the smallest grid point where the rate
    drops below the GOE rate by more than ``tol`` (no uniqueness claim).
    Results are deterministic regardless of the thread count.
    """
    x_grid = [float(x) for x in x_grid]
    if any(b < a for a, b in zip(x_grid, x_grid[1:])):
        raise ValueError("x grid must be sorted")
    if x_grid and x_grid[0] < 2.0:
        raise ValueError("x grid must start at or above the spectral edge 2")

    if isinstance(mode, HatMode):
        _hat_evaluator(dist)  # prime the shared table before any fan-out

    def run(x):
        return rate_point(dist, x, mode, cap)

    failures = []
    points = [None] * len(x_grid)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {i: pool.submit(run, x) for i, x in enumerate(x_grid)}
        for i in sorted(futures):
            try:
                points[i] = futures[i].result()
            except Exception as e:  # noqa: BLE001 - rewrapped with context below
                failures.append((x_grid[i], e))
    else:
        for i, x in enumerate(x_grid):
            try:
                points[i] = run(x)
            except Exception as e:  # noqa: BLE001
                failures.append((x, e))
    if failures:
        detail = "; ".join(f"x={x:g}: {e}" for x, e in failures[:5])
        raise RateCurveError(f"{len(failures)} poisoned point(s): {detail}")

    for p in points:
        p.check()
    rates = np.array([p.rate for p in points])
    if np.any(np.diff(rates) < -1e-6):
        i = int(np.argmin(np.diff(rates)))
        raise RateCurveError(
            f"rate not nondecreasing between x={x_grid[i]:g} and x={x_grid[i + 1]:g}"
        )

    x_mu = None
    for p in points:
        if np.isfinite(p.goe_rate) and p.goe_rate - p.rate > tol:
            x_mu = p.x
            break
    return RateCurve(tuple(x_grid), tuple(points), x_mu)
