"""Expectation-maximization for the assortative Poisson hypergraph model.

A hyperedge e of size d has expected count

    lambda_e = sum_k w[d, k] * prod_{i in e} u[i, k]

and observed counts are independent Poisson. The sum over every potential
hyperedge in the likelihood is evaluated through symmetric polynomials of
the membership columns (see :mod:`hypermt.sympoly`), so an EM sweep costs
O(N D K) plus the size of the observed data.

``w`` is stored with one row per hyperedge size, indexed by the size itself:
``w[d]`` for d = 2..D; rows 0 and 1 are always zero.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .hypergraph import Hypergraph
from .sympoly import TINY, PsiState, esp_table, init_from_u, init_uniform

logger = logging.getLogger(__name__)


class FitError(RuntimeError):
    """Every restart ended with a degenerate (-inf) likelihood."""


@dataclass
class ModelParams:
    u: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        if self.u.ndim != 2 or self.w.ndim != 2 or self.u.shape[1] != self.w.shape[1]:
            raise ValueError("u must be N x K and w must be (D + 1) x K")
        if np.any(self.u < 0) or np.any(self.w < 0):
            raise ValueError("parameters must be nonnegative")

    @property
    def num_nodes(self) -> int:
        return self.u.shape[0]

    @property
    def num_communities(self) -> int:
        return self.u.shape[1]

    @property
    def max_size(self) -> int:
        return self.w.shape[0] - 1

    def copy(self) -> "ModelParams":
        return ModelParams(self.u.copy(), self.w.copy())

    def hard_assignments(self) -> np.ndarray:
        """Argmax community per node; ties go to the lowest index."""
        return np.argmax(self.u, axis=1)


@dataclass
class Rho:
    """Responsibilities of each community for each observed hyperedge."""

    values: np.ndarray
    degenerate: int = 0


@dataclass
class FitConfig:
    num_communities: int
    seed: int = 0
    num_restarts: int = 10
    max_iters: int = 500
    tol: float = 1e-6
    check_every: int = 10
    patience: int = 2
    gamma_u: float = 0.0
    gamma_w: float = 0.0
    simplex: bool = False
    auto_constraint: bool = False
    max_size: int | None = None
    uniform_init: bool = False
    n_jobs: int = 1

    def __post_init__(self):
        if self.num_communities < 1:
            raise ValueError("num_communities must be >= 1")
        if self.num_restarts < 1:
            raise ValueError("num_restarts must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.gamma_u < 0 or self.gamma_w < 0:
            raise ValueError("prior rates must be nonnegative")
        if self.check_every < 1 or self.patience < 1:
            raise ValueError("check_every and patience must be >= 1")


@dataclass
class FitResult:
    params: ModelParams
    loglik: float
    iterations: int
    restart: int
    traces: list[list[float]]
    wall_time: float
    simplex: bool = False
    restart_logliks: list[float] = field(default_factory=list)

    @property
    def converged_trace(self) -> list[float]:
        return self.traces[self.restart]


def observed_products(h: Hypergraph, u: np.ndarray) -> np.ndarray:
    """``prod_{i in e} u[i, k]`` for every observed hyperedge (E x K)."""
    out = np.empty((h.num_edges, u.shape[1]))
    for _, (idx, nodes) in h.by_size.items():
        out[idx] = np.prod(u[nodes], axis=1)
    return out


def observed_rates(h: Hypergraph, p: ModelParams, prods: np.ndarray | None = None) -> np.ndarray:
    """``w[d_e, k] * prod_{i in e} u[i, k]`` per observed hyperedge (E x K)."""
    if prods is None:
        prods = observed_products(h, p.u)
    sizes = h.sizes
    terms = np.zeros_like(prods)
    ok = sizes <= p.max_size
    if not ok.all():
        logger.warning("%d observed hyperedges exceed model size %d; rate set to 0",
                       int((~ok).sum()), p.max_size)
    terms[ok] = p.w[sizes[ok]] * prods[ok]
    return terms


def _loglik(h: Hypergraph, p: ModelParams, psi_full: np.ndarray) -> float:
    expected = float(np.sum(p.w[2:] * psi_full[2:p.max_size + 1]))
    if h.num_edges == 0:
        return -expected
    lam = observed_rates(h, p).sum(axis=1)
    if np.any(lam <= 0):
        return -math.inf
    return float(np.dot(h.weights, np.log(lam))) - expected


def log_likelihood(h: Hypergraph, p: ModelParams) -> float:
    """Poisson log-likelihood without the factorial term.

    ``-sum_{e in Omega} lambda_e + sum_{e observed} A_e log lambda_e``; the
    first sum runs over every node subset of size 2..D and is computed from
    symmetric polynomials. Returns ``-inf`` if an observed hyperedge has zero
    rate.
    """
    if h.max_size > p.max_size:
        raise ValueError(f"model size {p.max_size} is smaller than data size {h.max_size}")
    return _loglik(h, p, esp_table(p.u, p.max_size))


def e_step(h: Hypergraph, p: ModelParams) -> Rho:
    """Normalized responsibilities ``rho[e, k] ~ w[d_e, k] prod u[i, k]``.

    Rows whose K terms are all zero fall back to uniform and are counted as
    degenerate.
    """
    terms = observed_rates(h, p)
    total = terms.sum(axis=1, keepdims=True)
    bad = total[:, 0] <= 0
    rho = np.divide(terms, total, out=np.zeros_like(terms), where=total > 0)
    if bad.any():
        rho[bad] = 1.0 / p.num_communities
        logger.debug("e-step: %d hyperedges with zero rate", int(bad.sum()))
    return Rho(rho, int(bad.sum()))


def m_step_w(h: Hypergraph, p: ModelParams, rho: Rho, psi: PsiState,
             gamma_w: float = 0.0) -> np.ndarray:
    """Closed-form affinity update; sizes never observed get ``w = 0``."""
    w = np.zeros_like(p.w)
    weighted = h.weights[:, None] * rho.values
    for d, (idx, _) in h.by_size.items():
        if d > p.max_size:
            continue
        num = weighted[idx].sum(axis=0)
        den = psi.psi_full[d] + gamma_w
        w[d] = np.divide(num, den, out=np.zeros_like(num), where=den > TINY)
    return w


def membership_numerators(h: Hypergraph, rho: Rho) -> np.ndarray:
    """``sum_e B[i, e] rho[e, k]`` for all nodes (N x K)."""
    return np.asarray(h.incidence_matrix @ rho.values)


def m_step_u(h: Hypergraph, p: ModelParams, rho: Rho, psi: PsiState,
             gamma_u: float = 0.0, simplex: bool = False) -> int:
    """Sequential membership sweep over nodes in ascending order.

    Updates ``p.u`` and ``psi`` in place, each node seeing the tables already
    moved by the nodes before it. Returns the number of entries zeroed
    because their denominator vanished while the numerator did not.
    """
    num = membership_numerators(h, rho)
    u = p.u
    w = p.w
    degenerate = 0
    for i in range(h.num_nodes):
        old = u[i].copy()
        psi.focus(i, old)
        den = psi.denominators(w) + gamma_u
        ok = den > TINY
        new = np.divide(num[i], den, out=np.zeros_like(den), where=ok)
        degenerate += int(np.count_nonzero(~ok & (num[i] > 0)))
        if simplex:
            total = new.sum()
            if total > 0:
                new /= total
        psi.commit_row(i, old, new)
        u[i] = new
    if degenerate:
        logger.debug("u-step: %d entries with vanishing denominator", degenerate)
    if psi.needs_refresh:
        psi.refresh(u)
    return degenerate


def random_init(h: Hypergraph, num_communities: int, max_size: int,
                rng: np.random.Generator) -> ModelParams:
    u = rng.uniform(size=(h.num_nodes, num_communities))
    w = rng.uniform(size=(max_size + 1, num_communities))
    w[:2] = 0.0
    return ModelParams(u, w)


def uniform_level_init(h: Hypergraph, num_communities: int, max_size: int,
                       rng: np.random.Generator) -> tuple[ModelParams, PsiState]:
    """Start with one random level per community shared by all nodes."""
    levels = rng.uniform(size=num_communities)
    u = np.tile(levels, (h.num_nodes, 1))
    w = rng.uniform(size=(max_size + 1, num_communities))
    w[:2] = 0.0
    psi = init_uniform(np.full(num_communities, h.num_nodes), levels, max_size)
    return ModelParams(u, w), psi


def _converged(trace: list[float], check_every: int, tol: float, patience: int) -> bool:
    checks = trace[::check_every]
    if len(trace) - 1 < check_every * patience:
        return False
    if (len(trace) - 1) % check_every:
        return False
    recent = checks[-(patience + 1):]
    for prev, cur in zip(recent, recent[1:]):
        if not (math.isfinite(prev) and math.isfinite(cur)):
            return False
        if abs(cur - prev) >= tol * max(abs(cur), TINY):
            return False
    return True


def run_em(h: Hypergraph, cfg: FitConfig, rng: np.random.Generator,
           simplex: bool | None = None, init: ModelParams | None = None
           ) -> tuple[ModelParams, list[float]]:
    """One EM run from a random start; returns parameters and the trace.

    ``trace[t]`` is the log-likelihood after t iterations (trace[0] is the
    initialization).
    """
    simplex = cfg.simplex if simplex is None else simplex
    max_size = cfg.max_size or h.max_size
    refresh = h.num_nodes * cfg.num_communities
    if init is not None:
        p = init.copy()
        psi = init_from_u(p.u, max_size, refresh)
    elif cfg.uniform_init:
        p, psi = uniform_level_init(h, cfg.num_communities, max_size, rng)
        psi.refresh_every = refresh
    else:
        p = random_init(h, cfg.num_communities, max_size, rng)
        psi = init_from_u(p.u, max_size, refresh)
    if simplex:
        p.u /= p.u.sum(axis=1, keepdims=True)
        psi.refresh(p.u)
    trace = [_loglik(h, p, psi.psi_full)]
    for _ in range(cfg.max_iters):
        rho = e_step(h, p)
        p.w = m_step_w(h, p, rho, psi, cfg.gamma_w)
        m_step_u(h, p, rho, psi, cfg.gamma_u, simplex)
        trace.append(_loglik(h, p, psi.psi_full))
        if _converged(trace, cfg.check_every, cfg.tol, cfg.patience):
            break
    return p, trace


def _restart_job(args):
    h, cfg, seed_seq, simplex = args
    rng = np.random.default_rng(seed_seq)
    return run_em(h, cfg, rng, simplex)


def fit(h: Hypergraph, cfg: FitConfig) -> FitResult:
    """Best of ``cfg.num_restarts`` EM runs by final log-likelihood.

    With ``auto_constraint`` every restart is run both unconstrained and with
    simplex rows, and the better of the two modes is returned.
    """
    if h.num_edges == 0:
        raise ValueError("cannot fit an empty hypergraph")
    max_size = cfg.max_size or h.max_size
    if h.max_size > max_size:
        h = h.restrict_max_size(max_size)
    start = time.perf_counter()
    modes = [False, True] if cfg.auto_constraint else [cfg.simplex]
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.num_restarts)
    jobs = [(h, cfg, s, mode) for mode in modes for s in seeds]
    if cfg.n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.n_jobs) as pool:
            runs = list(pool.map(_restart_job, jobs))
    else:
        runs = [_restart_job(job) for job in jobs]
    finals = [trace[-1] for _, trace in runs]
    best = None
    for r, value in enumerate(finals):
        if math.isfinite(value) and (best is None or value > finals[best]):
            best = r
    if best is None:
        raise FitError("all restarts ended with a degenerate likelihood")
    params, trace = runs[best]
    loglik = log_likelihood(h, params)
    return FitResult(
        params=params,
        loglik=loglik,
        iterations=len(trace) - 1,
        restart=best,
        traces=[t for _, t in runs],
        wall_time=time.perf_counter() - start,
        simplex=modes[best // cfg.num_restarts],
        restart_logliks=finals,
    )


def save_model(result: FitResult, h: Hypergraph, out_dir: str | Path,
               cfg: FitConfig | None = None) -> dict[str, Path]:
    """Write ``u.csv``, ``w.csv`` and ``fit.json`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    p = result.params
    cols = [f"k{k}" for k in range(p.num_communities)]
    u_path = out_dir / "u.csv"
    with open(u_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(["node"] + cols) + "\n")
        for i in range(p.num_nodes):
            fh.write(",".join([h.node_label(i)] + [repr(float(x)) for x in p.u[i]]) + "\n")
    w_path = out_dir / "w.csv"
    with open(w_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(["d"] + cols) + "\n")
        for d in range(2, p.max_size + 1):
            fh.write(",".join([str(d)] + [repr(float(x)) for x in p.w[d]]) + "\n")
    info = {
        "loglik": result.loglik,
        "iterations": result.iterations,
        "restart": result.restart,
        "restart_logliks": result.restart_logliks,
        "simplex": result.simplex,
        "wall_time": result.wall_time,
    }
    if cfg is not None:
        info["config"] = asdict(cfg)
    fit_path = out_dir / "fit.json"
    fit_path.write_text(json.dumps(info, indent=2))
    return {"u": u_path, "w": w_path, "fit": fit_path}


def load_model(model_dir: str | Path) -> tuple[ModelParams, list[str]]:
    """Read ``u.csv`` and ``w.csv``; returns parameters and node tokens."""
    model_dir = Path(model_dir)
    names: list[str] = []
    rows: list[list[float]] = []
    with open(model_dir / "u.csv", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            if line.strip():
                parts = line.rstrip("\n").split(",")
                names.append(parts[0])
                rows.append([float(x) for x in parts[1:]])
    u = np.array(rows)
    wrows: dict[int, list[float]] = {}
    with open(model_dir / "w.csv", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            if line.strip():
                parts = line.rstrip("\n").split(",")
                wrows[int(parts[0])] = [float(x) for x in parts[1:]]
    max_size = max(wrows) if wrows else 1
    w = np.zeros((max_size + 1, u.shape[1]))
    for d, vals in wrows.items():
        w[d] = vals
    return ModelParams(u, w), names
