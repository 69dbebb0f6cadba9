"""Desk-scale spectral experiments: Wigner sampling, tilts, localization.

Entries are iid up to symmetry with scale sqrt(2/N) on the diagonal and
sqrt(1/N) off it.  Tilted ensembles reweight each entry by an exponential
tilt whose parameter depends on a direction u; the resulting means follow
the derivative of the log-Laplace transform entrywise.

Randomness comes from counter-based Philox streams keyed by (seed, replica
index), so serial and parallel runs produce bit-identical reports.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .entries import EntryDistribution

__all__ = [
    "WignerSample",
    "MCReport",
    "EigensolverError",
    "make_rng",
    "replica_rng",
    "sample_wigner",
    "lambda1_and_vector",
    "eigvec_localization",
    "experiment",
]

_DENSE_LIMIT = 2000
_RESIDUAL_TOL = 1e-8


class EigensolverError(RuntimeError):
    pass


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))


def replica_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for one replica; parallel and serial runs agree."""
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class WignerSample:
    N: int
    matrix: np.ndarray
    dist_kind: str
    tilt: tuple = None  # (theta, u) if tilted


def sample_wigner(dist: EntryDistribution, N: int, tilt=None,
                  rng: np.random.Generator = None) -> WignerSample:
    """Symmetric N x N sample; optionally from the tilted ensemble (theta, u).

    The per-entry tilt parameter is sqrt(2)*theta*sqrt(N)*u_i^2 on the
    diagonal and 2*theta*sqrt(N)*u_i*u_j off it, so the tilted entry means
    are the entry scale times L'(tilt).
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    iu, ju = np.triu_indices(N)
    diag = iu == ju
    if tilt is not None:
        theta, u = tilt
        u = np.asarray(u, dtype=float)
        if abs(u @ u - 1.0) > 1e-9:
            raise ValueError("tilt direction u must be a unit vector")
        root_n = math.sqrt(N)
        tparams = np.where(diag, math.sqrt(2.0), 2.0) * theta * root_n * u[iu] * u[ju]
        x = dist.sample(iu.size, tilt=tparams, rng=rng)
    else:
        x = dist.sample(iu.size, rng=rng)
    scale = np.where(diag, math.sqrt(2.0 / N), math.sqrt(1.0 / N))
    H = np.zeros((N, N))
    H[iu, ju] = x * scale
    H = H + H.T
    H[np.arange(N), np.arange(N)] /= 2.0
    return WignerSample(N, H, dist.kind, (float(tilt[0]), tuple(u)) if tilt else None)


def _as_matrix(sample):
    return sample.matrix if isinstance(sample, WignerSample) else np.asarray(sample, dtype=float)


def lambda1_and_vector(sample):
    """Largest eigenvalue and unit eigenvector of a symmetric matrix.

    Dense LAPACK solve up to N = 2000, Lanczos (ARPACK) above; the returned
    pair always satisfies |H v - lambda v| < 1e-8 max(1, |lambda|).
    """
    H = _as_matrix(sample)
    if not np.all(np.isfinite(H)):
        raise ValueError("matrix has non-finite entries")
    n = H.shape[0]
    if n <= _DENSE_LIMIT:
        vals, vecs = scipy.linalg.eigh(H, subset_by_index=(n - 1, n - 1))
        lam, v = float(vals[0]), vecs[:, 0]
    else:
        try:
            vals, vecs = scipy.sparse.linalg.eigsh(H, k=1, which="LA", maxiter=2000, tol=1e-12)
        except scipy.sparse.linalg.ArpackNoConvergence as e:
            raise EigensolverError(f"Lanczos did not converge for N={n}") from e
        lam, v = float(vals[0]), vecs[:, 0]
    v = v / np.linalg.norm(v)
    if v[np.argmax(np.abs(v))] < 0:
        v = -v  # deterministic sign
    resid = np.linalg.norm(H @ v - lam * v)
    if resid > _RESIDUAL_TOL * max(1.0, abs(lam)):
        raise EigensolverError(f"eigenpair residual {resid:.2e} too large for N={n}")
    return lam, v


def eigvec_localization(v1, eta: float):
    """(mass of entries >= N^(eta-1/2) in l2 norm, sup norm, their count)."""
    v = np.asarray(v1, dtype=float)
    if not 0.0 < eta < 0.25:
        raise ValueError("eta must lie in (0, 1/4)")
    n = v.size
    thr = n ** (-0.5 + eta)
    big = np.abs(v) >= thr
    mass = float(np.linalg.norm(v[big])) if big.any() else 0.0
    return mass, float(np.abs(v).max()), int(big.sum())


# ---------------------------------------------------------------------------
# experiment harness


@dataclass(frozen=True)
class MCReport:
    """Summary of one Monte Carlo experiment; serializes to a stable schema."""

    kind: str
    dist: dict
    N: int
    reps: int
    seed: int
    eta: float
    params: dict
    lambda1: tuple
    mean: float
    stderr: float
    vec_stats: tuple  # per replica: (mass_eta, linf, support_eta)
    extra: dict = field(default_factory=dict)
    version: int = 1

    def to_json_dict(self) -> dict:
        return {
            "version": self.version,
            "kind": self.kind,
            "dist": self.dist,
            "N": self.N,
            "reps": self.reps,
            "seed": self.seed,
            "eta": self.eta,
            "params": self.params,
            "lambda1_mean": self.mean,
            "lambda1_stderr": self.stderr,
            "lambda1_samples": list(self.lambda1),
            "vec_stats": [list(t) for t in self.vec_stats],
            **self.extra,
        }

    def samples_csv(self) -> str:
        lines = ["replica,lambda1,mass_eta,linf,support_eta"]
        for i, (lam, st) in enumerate(zip(self.lambda1, self.vec_stats)):
            lines.append(f"{i},{lam!r},{st[0]!r},{st[1]!r},{st[2]}")
        return "\n".join(lines) + "\n"


def _run_replicas(dist, N, reps, seed, eta, tilt, threads):
    def one(i):
        rng = replica_rng(seed, i)
        s = sample_wigner(dist, N, tilt=tilt, rng=rng)
        lam, v = lambda1_and_vector(s)
        return lam, eigvec_localization(v, eta)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(reps)))
    else:
        results = [one(i) for i in range(reps)]
    lams = np.array([r[0] for r in results])
    stats = tuple(r[1] for r in results)
    return lams, stats


def experiment(config: dict, threads: int = None) -> MCReport:
    """Run a bbp / tail / localization experiment from a config mapping.

    Required keys: kind, dist (an EntryDistribution), N, reps, seed.
    Optional: eta (default 0.125) and per-kind params (theta for bbp, x for
    tail, top_fraction for localization).  Identical config and seed give a
    bit-identical report.
    """
    kind = config["kind"]
    dist = config["dist"]
    N = int(config["N"])
    reps = int(config["reps"])
    seed = int(config.get("seed", 0))
    eta = float(config.get("eta", 0.125))
    if reps < 1:
        raise ValueError("reps must be at least 1")
    base = dict(kind=kind, dist=dist.spec_dict(), N=N, reps=reps, seed=seed, eta=eta)

    if kind == "bbp":
        theta = float(config["theta"])
        u = np.full(N, 1.0 / math.sqrt(N))
        lams, stats = _run_replicas(dist, N, reps, seed, eta, (theta, u), threads)
        if theta >= 0.5:
            extra = {"prediction": 2.0 * theta + 0.5 / theta, "regime": "supercritical"}
        else:
            # below the transition the top eigenvalue stays at the bulk edge
            extra = {"prediction": 2.0, "regime": "subcritical"}
        extra["theta"] = theta
        return MCReport(
            **base, params={"theta": theta},
            lambda1=tuple(lams), mean=float(lams.mean()),
            stderr=float(lams.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0,
            vec_stats=stats, extra=extra,
        )

    if kind == "localization":
        top_fraction = float(config.get("top_fraction", 0.01))
        lams, stats = _run_replicas(dist, N, reps, seed, eta, None, threads)
        k = max(1, int(round(top_fraction * reps)))
        order = np.argsort(lams)[::-1][:k]
        sel = np.zeros(reps, dtype=bool)
        sel[order] = True
        arr = np.array(stats)
        extra = {
            "conditioning": "selection-conditioned (top empirical quantile, not the conditional law)",
            "top_fraction": top_fraction,
            "selected": int(k),
            "conditional_mean_mass_eta": float(arr[sel, 0].mean()),
            "conditional_mean_linf": float(arr[sel, 1].mean()),
            "conditional_mean_support": float(arr[sel, 2].mean()),
            "unconditional_mean_mass_eta": float(arr[:, 0].mean()),
            "unconditional_mean_linf": float(arr[:, 1].mean()),
            "unconditional_mean_support": float(arr[:, 2].mean()),
        }
        return MCReport(
            **base, params={"top_fraction": top_fraction},
            lambda1=tuple(lams), mean=float(lams.mean()),
            stderr=float(lams.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0,
            vec_stats=stats, extra=extra,
        )

    if kind == "tail":
        x = float(config["x"])
        lams, stats = _run_replicas(dist, N, reps, seed, eta, None, threads)
        hits = int((lams >= x).sum())
        extra = {"x": x, "hits": hits}
        if hits < 5:
            extra["status"] = "insufficient reps"
            extra["diagnostic"] = (
                f"only {hits} of {reps} replicas reached x={x}; the frequency "
                "estimate would be noise, increase reps or lower x"
            )
        else:
            p = hits / reps
            extra["status"] = "ok"
            extra["log_frequency"] = math.log(p)
            z = 1.959963984540054  # 95% Wilson interval
            denom = 1.0 + z * z / reps
            center = (p + z * z / (2 * reps)) / denom
            half = z * math.sqrt(p * (1 - p) / reps + z * z / (4 * reps * reps)) / denom
            extra["wilson_interval"] = [center - half, center + half]
        return MCReport(
            **base, params={"x": x},
            lambda1=tuple(lams), mean=float(lams.mean()),
            stderr=float(lams.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0,
            vec_stats=stats, extra=extra,
        )

    raise ValueError(f"unknown experiment kind '{kind}'")
