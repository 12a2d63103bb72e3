"""Curvature-dimension conditions: refutation, estimation and analytic bounds.

The discrete condition ``CD_Upsilon(kappa, d)`` at a vertex ``y`` asks

    Psi2(u)(y) >= kappa * Psi(u)(y) + (L_d u(y))**2 / d      for every u.

Checking "every u" is not possible numerically. The engine samples and
optimises over ``u`` and therefore delivers refutations with explicit
witnesses and lower bounds for the least admissible ``d``; the upper side is
supplied by the analytic bounds for complete and Ricci-flat graphs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .graph import (
    GraphError,
    WeightedGraph,
    ld_apply,
    psi2_upsilon,
    psi_upsilon,
    validate,
)
from .upsilon import c_of_r

__all__ = [
    "CdParams",
    "SamplerConfig",
    "OptimizerConfig",
    "CdReport",
    "slack_at",
    "ratio_at",
    "cd_upsilon_check_at",
    "cd_upsilon_estimate_min_d",
    "analytic_d_complete",
    "analytic_d_ricci_flat",
    "tensorise",
    "hybrid_d_for_euclidean",
    "C",
]

CAVEAT = (
    "sampling-based: a violation is a proof of failure, absence of violations "
    "on the evaluated samples is not a proof of the condition"
)

DENOMINATOR_GUARD = 1e-14


@dataclass(frozen=True)
class CdParams:
    """Curvature ``kappa`` and dimension ``d`` in ``[1, inf]``."""

    kappa: float
    d: float

    def __post_init__(self):
        if not (self.d >= 1):
            raise ValueError(f"dimension must satisfy d >= 1, got {self.d}")

    @property
    def inv_d(self) -> float:
        return 0.0 if math.isinf(self.d) else 1.0 / self.d

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "d": _num(self.d)}


def _num(x: float):
    # JSON has no infinity; spell it as a string
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


@lru_cache(maxsize=None)
def C(r: float) -> float:
    """Cached value of the optimal constant ``C(r)``."""
    return c_of_r(float(r)).value


# local evaluation ---------------------------------------------------------

def _terms(g: WeightedGraph, i: int, u: np.ndarray):
    psi2 = psi2_upsilon(g, u)[..., i]
    psi = psi_upsilon(g, u)[..., i]
    lu = ld_apply(g, u)[..., i]
    return psi2, psi, lu


def slack_at(g: WeightedGraph, y, u, params: CdParams) -> np.ndarray:
    """``Psi2(u)(y) - kappa Psi(u)(y) - (L_d u(y))^2 / d`` (batched over leading axes)."""
    psi2, psi, lu = _terms(g, g.index[y], g.check(u))
    return psi2 - params.kappa * psi - params.inv_d * lu**2


def ratio_at(g: WeightedGraph, y, u) -> np.ndarray:
    """``(L_d u(y))^2 / Psi2(u)(y)``; ``inf`` where Psi2 <= 0 < |L_d u(y)|, nan if guarded."""
    psi2, _, lu = _terms(g, g.index[y], g.check(u))
    return _ratio(psi2, lu)


def _ratio(psi2, lu):
    psi2 = np.asarray(psi2, dtype=float)
    lu2 = np.asarray(lu, dtype=float) ** 2
    out = np.full(np.broadcast(psi2, lu2).shape, np.nan)
    ok = psi2 > DENOMINATOR_GUARD
    np.divide(lu2, psi2, out=out, where=ok)
    out[(psi2 <= 0) & (lu2 > DENOMINATOR_GUARD)] = np.inf
    return out if out.ndim else float(out)


# configs and reports ------------------------------------------------------

@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 64
    scales: tuple[float, ...] = (0.1, 1.0, 5.0)
    fd_step: float = 1e-6
    rel_tol: float = 1e-10
    max_iter: int = 500
    bound: float = 40.0
    seed: int = 0

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class SamplerConfig:
    random_samples: int = 2000
    scales: tuple[float, ...] = (0.1, 1.0, 5.0)
    spike_heights: tuple[float, ...] = (0.25, 0.5, 1.0, 2.0, 4.0)
    refine: bool = True
    refine_restarts: int = 16
    tolerance: float = 1e-12
    seed: int = 0

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


@dataclass
class CdReport:
    """Outcome of a check or estimate of ``CD_Upsilon`` at one vertex.

    ``witness`` is the worst sampled function (full vertex function, shifted
    so that it vanishes at ``vertex``); re-evaluating it reproduces
    ``worst_slack`` and ``witness_ratio``.
    """

    vertex: object
    params: CdParams
    satisfied_on_samples: bool
    minimal_d_estimate: float
    witness: dict
    samples_evaluated: int
    seed: int
    worst_slack: float
    witness_ratio: float
    status: str = "ok"
    near_degenerate: bool = False
    mode: str = "check"
    graph_digest: str = ""
    config: dict = field(default_factory=dict)
    caveat: str = CAVEAT

    def witness_array(self, g: WeightedGraph) -> np.ndarray:
        return g.function(self.witness)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "vertex": self.vertex,
            "params": self.params.to_dict(),
            "satisfied_on_samples": self.satisfied_on_samples,
            "minimal_d_estimate": _num(self.minimal_d_estimate),
            "witness": {str(k): v for k, v in self.witness.items()},
            "witness_ratio": _num(self.witness_ratio),
            "worst_slack": self.worst_slack,
            "samples_evaluated": self.samples_evaluated,
            "seed": self.seed,
            "status": self.status,
            "near_degenerate": self.near_degenerate,
            "graph_digest": self.graph_digest,
            "config": self.config,
            "caveat": self.caveat,
            "estimate_semantics": "lower bound on the least admissible d (supremum approximation)",
        }


def _witness_dict(g: WeightedGraph, u: np.ndarray, i: int) -> dict:
    u = np.asarray(u, dtype=float) - u[i]
    return {v: float(x) for v, x in zip(g.vertices, u)}


# optimiser ----------------------------------------------------------------

def _ascend(objective, x0, cfg: OptimizerConfig):
    """Quasi-Newton ascent with central finite-difference gradients and backtracking.

    ``objective`` maps a batch ``(k, p)`` of points to ``(k,)`` values.
    The search direction comes from a BFGS inverse-Hessian estimate and falls
    back to the gradient whenever it is not an ascent direction.
    Returns ``(x, f, iterations, converged)``.
    """
    x = np.clip(np.asarray(x0, dtype=float), -cfg.bound, cfg.bound)
    p = x.size
    f = float(objective(x[None])[0])
    eye = np.eye(p) * cfg.fd_step

    def gradient(z):
        vals = objective(np.concatenate([z + eye, z - eye]))
        return (vals[:p] - vals[p:]) / (2 * cfg.fd_step)

    grad = gradient(x)
    hinv = np.eye(p)
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        if not np.all(np.isfinite(grad)):
            break
        if not np.any(grad):
            converged = True
            break
        direction = hinv @ grad
        slope = float(grad @ direction)
        if slope <= 0:
            hinv = np.eye(p)
            direction = grad
            slope = float(grad @ grad)
        step = 1.0
        accepted = False
        while step * np.abs(direction).max() > 1e-14:
            trial = np.clip(x + step * direction, -cfg.bound, cfg.bound)
            ft = float(objective(trial[None])[0])
            if np.isfinite(ft) and ft >= f + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            converged = True
            break
        improvement = ft - f
        new_grad = gradient(trial)
        s_vec = trial - x
        # ascent on f is descent on -f: y = grad(-f) difference
        y_vec = grad - new_grad
        sy = float(s_vec @ y_vec)
        if sy > 1e-18:
            rho = 1.0 / sy
            v = np.eye(p) - rho * np.outer(s_vec, y_vec)
            hinv = v @ hinv @ v.T + rho * np.outer(s_vec, s_vec)
        x, f, grad = trial, ft, new_grad
        if improvement <= cfg.rel_tol * max(abs(f), 1e-300):
            converged = True
            break
    return x, f, it, converged


def cd_upsilon_estimate_min_d(
    g: WeightedGraph, y, config: OptimizerConfig | None = None
) -> CdReport:
    """Estimate ``sup_u (L_d u(y))^2 / Psi2(u)(y)`` by multi-start ascent.

    ``u`` ranges over functions supported on the 2-ball of ``y`` with
    ``u(y) = 0``. If some sampled ``u`` has ``Psi2(u)(y) <= 0`` while
    ``L_d u(y) != 0``, the estimate is ``inf``: no finite ``d`` works.
    """
    cfg = config or OptimizerConfig()
    i = g.index[y]
    ball = [j for j in g.ball(i, 2) if j != i]
    if not g.neighbours[i]:
        raise GraphError(f"vertex {y!r} has no neighbours")
    p = len(ball)
    rng = np.random.default_rng(cfg.seed)
    starts = [rng.standard_normal(p) * cfg.scales[r % len(cfg.scales)] for r in range(cfg.restarts)]

    def embed(xs):
        u = np.zeros(xs.shape[:-1] + (g.size,))
        u[..., ball] = xs
        return u

    refuted = None
    near_degenerate = False
    n_evals = 0

    def objective(xs):
        nonlocal refuted, near_degenerate, n_evals
        u = embed(xs)
        psi2, _, lu = _terms(g, i, u)
        n_evals += xs.shape[0]
        r = _ratio(psi2, lu)
        r = np.atleast_1d(r)
        bad = np.isinf(r)
        if refuted is None and np.any(bad):
            refuted = u[np.flatnonzero(bad)[0]].copy()
        tiny = (psi2 > 0) & (psi2 <= DENOMINATOR_GUARD) & (lu**2 > DENOMINATOR_GUARD)
        if np.any(tiny):
            near_degenerate = True
        return np.where(np.isfinite(r), r, -np.inf)

    best_val, best_x, best_idx, best_conv = -np.inf, None, -1, False
    unconverged = 0
    for idx, x0 in enumerate(starts):
        x, f, _, conv = _ascend(objective, x0, cfg)
        unconverged += not conv
        if f > best_val:  # strict: ties keep the lowest restart index
            best_val, best_x, best_idx, best_conv = f, x, idx, conv
    if refuted is not None:
        u_best = refuted
        d_est = math.inf
        status = "refuted: Psi2 <= 0 with L_d u != 0"
    else:
        u_best = embed(best_x)
        d_est = float(best_val)
        status = "ok" if best_conv else "best restart hit max_iter"
    psi2, _, lu = _terms(g, i, u_best)
    return CdReport(
        vertex=y,
        params=CdParams(0.0, math.inf),
        satisfied_on_samples=refuted is None,
        minimal_d_estimate=d_est,
        witness=_witness_dict(g, u_best, i),
        samples_evaluated=n_evals,
        seed=cfg.seed,
        worst_slack=float(psi2),
        witness_ratio=float(_ratio(psi2, lu)),
        status=status,
        near_degenerate=near_degenerate,
        mode="estimate",
        graph_digest=g.digest(),
        config={**cfg.to_dict(), "best_restart": best_idx, "restarts_unconverged": unconverged},
    )


def _check_samples(g: WeightedGraph, i: int, cfg: SamplerConfig) -> np.ndarray:
    ball = [j for j in g.ball(i, 2) if j != i]
    rng = np.random.default_rng(cfg.seed)
    rows = []
    per_scale = max(cfg.random_samples // len(cfg.scales), 1)
    for s in cfg.scales:
        x = np.zeros((per_scale, g.size))
        x[:, ball] = rng.standard_normal((per_scale, len(ball))) * s
        rows.append(x)
    for h in cfg.spike_heights:
        for sign in (1.0, -1.0):
            for a in ball:
                x = np.zeros(g.size)
                x[a] = sign * h
                rows.append(x[None])
                for b in ball:
                    if b != a:
                        x2 = x.copy()
                        x2[b] = -sign * h
                        rows.append(x2[None])
    return np.concatenate(rows)


def cd_upsilon_check_at(
    g: WeightedGraph, y, params: CdParams, config: SamplerConfig | None = None
) -> CdReport:
    """Try to refute ``CD_Upsilon(kappa, d)`` at ``y``.

    Samples are Gaussian perturbations on the 2-ball of ``y`` at several
    scales, one- and two-sided spikes, and (optionally) maximisers of the
    dimension ratio found by :func:`cd_upsilon_estimate_min_d`.
    """
    cfg = config or SamplerConfig()
    i = g.index[y]
    samples = _check_samples(g, i, cfg)
    d_est = math.nan
    if cfg.refine:
        est = cd_upsilon_estimate_min_d(
            g, y, OptimizerConfig(restarts=cfg.refine_restarts, seed=cfg.seed)
        )
        d_est = est.minimal_d_estimate
        samples = np.concatenate([samples, est.witness_array(g)[None]])
    psi2, psi, lu = _terms(g, i, samples)
    slack = psi2 - params.kappa * psi - params.inv_d * lu**2
    scale = 1.0 + np.abs(psi2) + np.abs(params.kappa * psi) + params.inv_d * lu**2
    rel = slack / scale
    worst = int(np.argmin(rel))  # argmin returns the lowest index on ties
    ratios = np.atleast_1d(_ratio(psi2, lu))
    finite = ratios[np.isfinite(ratios)]
    if np.any(np.isinf(ratios)):
        sample_d = math.inf
    else:
        sample_d = float(finite.max()) if finite.size else math.nan
    if not math.isnan(d_est):
        sample_d = max(sample_d, d_est)
    violated = bool(rel[worst] < -cfg.tolerance)
    return CdReport(
        vertex=y,
        params=params,
        satisfied_on_samples=not violated,
        minimal_d_estimate=sample_d,
        witness=_witness_dict(g, samples[worst], i),
        samples_evaluated=int(samples.shape[0]),
        seed=cfg.seed,
        worst_slack=float(slack[worst]),
        witness_ratio=float(ratios[worst]),
        status="violated" if violated else "no violation on samples",
        mode="check",
        graph_digest=g.digest(),
        config=cfg.to_dict(),
    )


def reevaluate(g: WeightedGraph, report: CdReport) -> tuple[float, float]:
    """Recompute ``(slack, ratio)`` at the stored witness."""
    u = report.witness_array(g)
    slack = float(slack_at(g, report.vertex, u, report.params))
    return slack, float(ratio_at(g, report.vertex, u))


# analytic bounds ----------------------------------------------------------

def analytic_d_complete(m: int) -> float:
    """``2(m-1)/C(m)``: a valid ``d`` for the unweighted complete graph on m vertices."""
    if int(m) != m or m < 2:
        raise ValueError(f"complete graph needs m >= 2 vertices, got {m}")
    return 2.0 * (m - 1) / C(float(m))


def analytic_d_ricci_flat(D: int) -> float:
    """``2D/C(2)`` for a D-regular Ricci-flat graph."""
    if int(D) != D or D < 1:
        raise ValueError(f"degree must be a positive integer, got {D}")
    return 2.0 * D / C(2.0)


def tensorise(continuous: CdParams, discrete: CdParams) -> CdParams:
    """``CD(k1, n)`` and ``CD_Upsilon(k2, d)`` combine to ``CD_hyb(min(k1, k2), n + d)``."""
    return CdParams(min(continuous.kappa, discrete.kappa), continuous.d + discrete.d)


def _is_constant_complete(g: WeightedGraph) -> bool:
    off = ~np.eye(g.size, dtype=bool)
    w = g.kernel[off]
    return g.size >= 2 and bool(np.all(w > 0) and np.all(w == w[0]))


def discrete_d(g: WeightedGraph, source: str, optimizer: OptimizerConfig | None = None) -> float:
    """Dimension ``d`` with ``L_d`` satisfying ``CD_Upsilon(0, d)`` from the named source."""
    if source == "analytic_complete":
        # a constant weight rescales time only; the dimension is unchanged
        if not _is_constant_complete(g):
            raise GraphError("analytic_complete needs a complete graph with constant weights")
        return analytic_d_complete(g.size)
    if source == "analytic_ricci_flat":
        from .ricci import certify

        rep = validate(g)
        if rep.regular_degree is None:
            raise GraphError("analytic_ricci_flat needs an unweighted regular graph: not regular")
        certs = certify(g)
        failed = [v for v, c in certs.items() if c.certificate is None]
        if failed:
            raise GraphError(f"graph is not certified Ricci-flat at {failed}")
        return analytic_d_ricci_flat(rep.regular_degree)
    if source == "numeric_estimate":
        est = max(
            cd_upsilon_estimate_min_d(g, y, optimizer).minimal_d_estimate for y in g.vertices
        )
        return max(est, 1.0)
    raise ValueError(f"unknown source {source!r}")


def hybrid_d_for_euclidean(
    n: int, g: WeightedGraph, source: str = "analytic_complete", optimizer=None
) -> float:
    """``n + d``: the dimension of ``CD_hyb(0, .)`` for ``Laplacian (+) L_d`` on R^n x Y.

    The numeric source yields a lower-bound estimate, not a certified bound.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"spatial dimension must be a positive integer, got {n}")
    return tensorise(CdParams(0.0, float(n)), CdParams(0.0, discrete_d(g, source, optimizer))).d
