"""Positive solutions of ``du/dt = Laplace u + L_d u`` on ``R^n x Y``.

Two sources of solutions:

* :class:`GaussianMixtureSolution` -- closed-form separated-variable
  solutions ``sum_j a_j G(t + tau_j, x - x_j) (exp(t L_d) v_j)(y)`` with
  analytic derivatives up to third order in ``x``;
* :func:`simulate` -- Strang splitting on a periodic grid, exact vertex flow
  and an explicit central-difference heat step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .graph import WeightedGraph, ld_apply, psi_upsilon, validate
from .upsilon import upsilon

__all__ = [
    "MixtureTerm",
    "GaussianMixtureSolution",
    "PointEvaluation",
    "DerivativeBundle",
    "exact_derivs",
    "random_mixture",
    "log_evolution_residual",
    "GridState",
    "SimulationConfig",
    "CFLError",
    "simulate",
    "grid_from_solution",
    "total_mass",
    "convergence_table",
    "grid_log_residual",
]


@dataclass(frozen=True)
class MixtureTerm:
    """One separated term ``alpha * G(t + tau, x - center) * (exp(t L_d) profile)(y)``.

    ``flat=True`` replaces the Gaussian by the constant 1 (a spatially flat
    solution); ``center`` and ``tau`` are then ignored.
    """

    alpha: float
    center: tuple
    tau: float
    profile: tuple
    flat: bool = False


@dataclass
class PointEvaluation:
    """Vectorised evaluation at points ``X[p]`` and all vertices.

    Values are stored relative to ``exp(log_scale[p])`` so that far tails do
    not underflow; ratios such as ``grad / u`` are scale free.
    """

    t: float
    X: np.ndarray  # (P, n)
    log_scale: np.ndarray  # (P,)
    u: np.ndarray  # (P, m)
    grad: np.ndarray  # (P, m, n)
    hess: np.ndarray  # (P, m, n, n)
    lap: np.ndarray  # (P, m)
    grad_lap: np.ndarray  # (P, m, n)
    ld_u: np.ndarray  # (P, m)
    dt_u: np.ndarray  # (P, m)
    dt_u_factors: np.ndarray  # (P, m), product-rule time derivative

    def log_u(self) -> np.ndarray:
        return np.log(self.u) + self.log_scale[:, None]


class GaussianMixtureSolution:
    """Closed-form positive solution on ``R^n x Y``.

    Parameters
    ----------
    graph : WeightedGraph
        Must be connected for strict positivity of every vertex factor.
    n : int
        Spatial dimension.
    terms : sequence of MixtureTerm
    """

    def __init__(self, graph: WeightedGraph, n: int, terms: Sequence[MixtureTerm]):
        if int(n) != n or n < 1:
            raise ValueError(f"spatial dimension must be >= 1, got {n}")
        if not terms:
            raise ValueError("a mixture needs at least one term")
        if not validate(graph).connected:
            raise ValueError("mixture solutions need a connected graph")
        self.graph = graph
        self.n = int(n)
        clean = []
        for term in terms:
            prof = graph.check(term.profile)
            if term.alpha <= 0:
                raise ValueError("term weights alpha must be positive")
            if np.any(prof < 0) or not np.any(prof > 0):
                raise ValueError("profiles must be nonnegative and not identically zero")
            if term.flat:
                clean.append(replace(term, center=(0.0,) * self.n, tau=0.0, profile=tuple(prof)))
                continue
            center = tuple(float(c) for c in np.atleast_1d(term.center))
            if len(center) != self.n:
                raise ValueError(f"center has dimension {len(center)}, expected {self.n}")
            if term.tau < 0:
                raise ValueError("time offsets tau must be nonnegative")
            clean.append(replace(term, center=center, profile=tuple(prof)))
        self.terms = tuple(clean)
        self._alpha = np.array([t.alpha for t in self.terms])
        self._centers = np.array([t.center for t in self.terms], dtype=float)
        self._tau = np.array([t.tau for t in self.terms])
        self._flat = np.array([t.flat for t in self.terms])
        self._profiles = np.array([t.profile for t in self.terms], dtype=float)

    @property
    def y_constant(self) -> bool:
        return bool(np.all(np.ptp(self._profiles, axis=1) == 0))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "graph_digest": self.graph.digest(),
            "terms": [
                {
                    "alpha": t.alpha,
                    "center": list(t.center),
                    "tau": t.tau,
                    "profile": list(t.profile),
                    "flat": t.flat,
                }
                for t in self.terms
            ],
        }

    @classmethod
    def from_dict(cls, graph: WeightedGraph, data: dict) -> "GaussianMixtureSolution":
        terms = [
            MixtureTerm(
                alpha=float(t["alpha"]),
                center=tuple(t.get("center", [0.0] * data["n"])),
                tau=float(t.get("tau", 0.0)),
                profile=tuple(t["profile"]),
                flat=bool(t.get("flat", False)),
            )
            for t in data["terms"]
        ]
        return cls(graph, int(data["n"]), terms)

    # evaluation -----------------------------------------------------------
    def evaluate(self, t: float, X) -> PointEvaluation:
        """Values and derivatives at time ``t`` and points ``X`` of shape (P, n).

        Needs ``t >= 0`` and ``t + tau > 0`` for every Gaussian term.
        """
        if not t >= 0:
            raise ValueError(f"evaluation needs t >= 0, got {t}")
        if np.any((t + self._tau <= 0) & ~self._flat):
            raise ValueError("t + tau must be positive for every Gaussian term")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[-1] != self.n:
            raise ValueError(f"points must have {self.n} coordinates")
        n = self.n
        g = self.graph
        s = t + self._tau  # (J,)
        xi = X[:, None, :] - self._centers[None, :, :]  # (P, J, n)
        r2 = np.einsum("pjn,pjn->pj", xi, xi)
        flat = self._flat[None, :]
        logw = np.where(
            flat,
            np.log(self._alpha)[None, :],
            np.log(self._alpha)[None, :] - 0.5 * n * np.log(4 * np.pi * s)[None, :] - r2 / (4 * s),
        )
        log_scale = logw.max(axis=1)
        f = np.exp(logw - log_scale[:, None])  # (P, J)
        w = self._profiles @ g.heat_matrix(t).T  # (J, m)
        lw = ld_apply(g, w)  # (J, m)

        # Gaussian derivative factors (relative to G); zero for flat terms
        zero = self._flat[None, :, None]
        gfac = np.where(zero, 0.0, -xi / (2 * s)[None, :, None])  # grad G / G
        lapfac = np.where(flat, 0.0, r2 / (4 * s**2) - n / (2 * s))  # lap G / G
        eye = np.eye(n)
        hessfac = np.einsum("pja,pjb->pjab", xi, xi) / (4 * s**2)[None, :, None, None] - eye / (
            2 * s
        )[None, :, None, None]
        hessfac = np.where(self._flat[None, :, None, None], 0.0, hessfac)
        gradlapfac = xi / (2 * s**2)[None, :, None] - lapfac[:, :, None] * xi / (2 * s)[None, :, None]
        gradlapfac = np.where(zero, 0.0, gradlapfac)
        # d/ds log G = -n/(2s) + |xi|^2/(4 s^2), written out separately from lapfac
        dsfac = np.where(flat, 0.0, -0.5 * n / s + r2 / (4 * s * s))

        u = f @ w
        grad = np.einsum("pj,pjn,jm->pmn", f, gfac, w)
        hess = np.einsum("pj,pjab,jm->pmab", f, hessfac, w)
        lap = np.einsum("pj,pj,jm->pm", f, lapfac, w)
        grad_lap = np.einsum("pj,pjn,jm->pmn", f, gradlapfac, w)
        ld_u = f @ lw
        dt_factors = np.einsum("pj,pj,jm->pm", f, dsfac, w) + f @ lw
        return PointEvaluation(
            t=float(t),
            X=X,
            log_scale=log_scale,
            u=u,
            grad=grad,
            hess=hess,
            lap=lap,
            grad_lap=grad_lap,
            ld_u=ld_u,
            dt_u=lap + ld_u,
            dt_u_factors=dt_factors,
        )

    def value(self, t: float, X) -> np.ndarray:
        """``u(t, X[p], y)`` as an array (P, m)."""
        ev = self.evaluate(t, X)
        return ev.u * np.exp(ev.log_scale)[:, None]

    def log_value(self, t: float, X) -> np.ndarray:
        return self.evaluate(t, X).log_u()

    def vertex_index(self, y) -> int:
        return self.graph.index[y]


@dataclass(frozen=True)
class DerivativeBundle:
    u: float
    dt_u: float
    grad_u: np.ndarray
    hess_u: np.ndarray
    lap_u: float
    grad_lap_u: np.ndarray
    ld_u: float


def exact_derivs(sol: GaussianMixtureSolution, t: float, x, y) -> DerivativeBundle:
    """Analytic derivatives of ``u`` at a single point ``(t, x, y)``."""
    ev = sol.evaluate(t, np.atleast_1d(np.asarray(x, dtype=float))[None, :])
    i = sol.vertex_index(y)
    c = math.exp(ev.log_scale[0])
    b = DerivativeBundle(
        u=float(ev.u[0, i] * c),
        dt_u=float(ev.dt_u[0, i] * c),
        grad_u=ev.grad[0, i] * c,
        hess_u=ev.hess[0, i] * c,
        lap_u=float(ev.lap[0, i] * c),
        grad_lap_u=ev.grad_lap[0, i] * c,
        ld_u=float(ev.ld_u[0, i] * c),
    )
    scale = abs(b.u) + abs(b.lap_u) + abs(b.ld_u) + 1e-300
    if abs(np.trace(b.hess_u) - b.lap_u) > 1e-10 * scale:
        raise AssertionError("lap_u != trace(hess_u)")
    if abs(ev.dt_u_factors[0, i] * c - b.dt_u) > 1e-10 * scale:
        raise AssertionError("time derivative disagrees with the product rule")
    return b


def random_mixture(
    graph: WeightedGraph,
    n: int,
    rng: np.random.Generator,
    terms: int = 3,
    spread: float = 2.0,
    tau_range: tuple[float, float] = (0.05, 1.0),
    sparse_profiles: bool = True,
) -> GaussianMixtureSolution:
    """Draw a random positive mixture. Profiles may vanish on some vertices."""
    out = []
    m = graph.size
    for _ in range(terms):
        prof = rng.uniform(0.0, 1.0, m)
        if sparse_profiles and m > 1:
            mask = rng.uniform(size=m) < 0.4
            if mask.all():
                mask[rng.integers(m)] = False
            prof[mask] = 0.0
        out.append(
            MixtureTerm(
                alpha=float(rng.uniform(0.2, 2.0)),
                center=tuple(rng.uniform(-spread, spread, n)),
                tau=float(np.exp(rng.uniform(np.log(tau_range[0]), np.log(tau_range[1])))),
                profile=tuple(prof),
            )
        )
    return GaussianMixtureSolution(graph, n, out)


def _log_ratios(ev: PointEvaluation) -> np.ndarray:
    # R[p, y, z] = log u(z) - log u(y) at the common point X[p]
    lu = np.log(ev.u)
    return lu[:, None, :] - lu[:, :, None]


def log_terms(sol: GaussianMixtureSolution, ev: PointEvaluation) -> dict:
    """Ingredients of the log-evolution identity for ``v = log u`` at every vertex."""
    g = sol.graph
    u = ev.u
    grad_v = ev.grad / u[..., None]
    grad_v2 = np.einsum("pmn,pmn->pm", grad_v, grad_v)
    lap_v = ev.lap / u - grad_v2
    dt_v = ev.dt_u / u
    v = np.log(u)  # common shift log_scale drops out of every difference
    ld_v = ld_apply(g, v)
    psi_v = psi_upsilon(g, v)
    return {
        "grad_v2": grad_v2,
        "lap_v": lap_v,
        "dt_v": dt_v,
        "ld_v": ld_v,
        "psi_v": psi_v,
    }


def log_evolution_residual(sol: GaussianMixtureSolution, t: float, x, y=None):
    """``dt v - Laplace v - L_d v - (|grad v|^2 + Psi_Upsilon(v))`` with ``v = log u``.

    ``x`` may be a single point or an array (P, n); with ``y=None`` all
    vertices are returned.
    """
    X = np.asarray(x, dtype=float)
    single = X.ndim <= 1
    X = np.atleast_2d(X.reshape(-1, sol.n) if X.ndim <= 1 else X)
    ev = sol.evaluate(t, X)
    lt = log_terms(sol, ev)
    res = lt["dt_v"] - lt["lap_v"] - lt["ld_v"] - (lt["grad_v2"] + lt["psi_v"])
    if y is not None:
        res = res[:, sol.vertex_index(y)]
    return float(res[0]) if (single and y is not None) else (res[0] if single else res)


# finite-difference simulator ----------------------------------------------

class CFLError(ValueError):
    pass


@dataclass
class GridState:
    """Periodic grid function ``values[i_1, .., i_n, y]`` at ``time``."""

    n: int
    h: float
    lower: tuple
    graph: WeightedGraph
    values: np.ndarray
    time: float

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError("grid simulator supports n in {1, 2}")
        if self.values.ndim != self.n + 1 or self.values.shape[-1] != self.graph.size:
            raise ValueError("grid values must have shape (N,)*n + (m,)")
        if not np.all(self.values > 0):
            raise ValueError("grid values must be strictly positive")

    @property
    def shape(self) -> tuple:
        return self.values.shape[:-1]

    @property
    def extent(self) -> tuple:
        return tuple(self.h * s for s in self.shape)

    def axes(self) -> list[np.ndarray]:
        return [lo + self.h * np.arange(s) for lo, s in zip(self.lower, self.shape)]

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([c.ravel() for c in mesh], axis=-1)


@dataclass(frozen=True)
class SimulationConfig:
    n: int
    h: float
    box: float  # side length of the periodic box
    dt: float
    t_end: float
    scheme: str = "strang"
    snapshot_every: int = 0  # 0: only initial and final state
    lower: tuple | None = None

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["lower"] = list(self.lower) if self.lower is not None else None
        return d

    @property
    def max_dt(self) -> float:
        return self.h**2 / (2 * self.n)


def _laplace_periodic(values: np.ndarray, n: int, h: float) -> np.ndarray:
    out = -2.0 * n * values
    for ax in range(n):
        out = out + np.roll(values, 1, axis=ax) + np.roll(values, -1, axis=ax)
    return out / h**2


def grid_from_solution(sol: GaussianMixtureSolution, t: float, cfg: SimulationConfig) -> GridState:
    """Sample ``sol`` at time ``t`` on the periodic grid described by ``cfg``."""
    N = int(round(cfg.box / cfg.h))
    if not math.isclose(N * cfg.h, cfg.box, rel_tol=1e-9):
        raise ValueError("box must be an integer multiple of h")
    lower = cfg.lower if cfg.lower is not None else (-cfg.box / 2,) * cfg.n
    axes = [lo + cfg.h * np.arange(N) for lo in lower]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([c.ravel() for c in mesh], axis=-1)
    vals = sol.value(t, pts).reshape((N,) * cfg.n + (sol.graph.size,))
    return GridState(cfg.n, cfg.h, tuple(lower), sol.graph, vals, float(t))


def simulate(g: WeightedGraph, cfg: SimulationConfig, u0: GridState) -> list[GridState]:
    """Evolve ``u0`` to ``cfg.t_end`` and return the recorded snapshots.

    One step is ``exp(dt/2 L_d)``, an explicit central-difference heat step,
    then ``exp(dt/2 L_d)``. Under ``dt <= h^2 / (2n)`` every factor is a
    nonnegative matrix, so positivity is kept. The step is shortened so that
    an integer number of steps lands exactly on ``t_end``.
    """
    if cfg.scheme != "strang":
        raise ValueError(f"unknown scheme {cfg.scheme!r}")
    if u0.graph != g:
        raise ValueError("initial state lives on a different graph")
    if u0.n != cfg.n or not math.isclose(u0.h, cfg.h):
        raise ValueError("initial state does not match the configured grid")
    if not np.all(u0.values > 0):
        raise ValueError("initial data must be strictly positive")
    if cfg.dt > cfg.max_dt * (1 + 1e-12):
        raise CFLError(f"dt = {cfg.dt} violates the CFL bound; admissible dt <= {cfg.max_dt}")
    span = cfg.t_end - u0.time
    if span < 0:
        raise ValueError("t_end precedes the initial time")
    steps = int(math.ceil(span / cfg.dt - 1e-9)) if span > 0 else 0
    dt = span / steps if steps else 0.0
    half = g.heat_matrix(dt / 2).T if steps else None
    vals = u0.values.copy()
    out = [replace(u0, values=vals.copy())]
    for k in range(1, steps + 1):
        vals = vals @ half
        vals = vals + dt * _laplace_periodic(vals, cfg.n, cfg.h)
        vals = vals @ half
        if (cfg.snapshot_every and k % cfg.snapshot_every == 0) or k == steps:
            t = u0.time + k * dt
            out.append(GridState(cfg.n, cfg.h, u0.lower, g, vals.copy(), t))
    return out


def total_mass(state: GridState) -> float:
    return float(state.values.sum() * state.h**state.n)


def convergence_table(
    sol: GaussianMixtureSolution,
    t0: float,
    t1: float,
    hs: Sequence[float],
    box: float,
    n: int = 1,
    dt_factor: float = 0.25,
    floor: float = 1e-12,
) -> list[dict]:
    """L-infinity errors of :func:`simulate` against the exact evaluator.

    ``dt = dt_factor * h^2``. Rows whose error is below ``floor`` times the
    solution maximum are flagged as roundoff dominated and get no order.
    """
    rows = []
    for h in hs:
        cfg = SimulationConfig(n=n, h=h, box=box, dt=dt_factor * h * h, t_end=t1)
        u0 = grid_from_solution(sol, t0, cfg)
        final = simulate(sol.graph, cfg, u0)[-1]
        exact = grid_from_solution(sol, t1, cfg).values if t1 > t0 else u0.values
        err = float(np.max(np.abs(final.values - exact)))
        flagged = err < floor * float(np.max(np.abs(exact)))
        rows.append({"h": h, "dt": cfg.dt, "error": err, "roundoff_floor": flagged, "order": None})
    for a, b in zip(rows, rows[1:]):
        if not (a["roundoff_floor"] or b["roundoff_floor"]) and b["error"] > 0:
            b["order"] = math.log(a["error"] / b["error"]) / math.log(a["h"] / b["h"])
    return rows


def _central_grad(v: np.ndarray, n: int, h: float) -> np.ndarray:
    return np.stack(
        [(np.roll(v, -1, axis=ax) - np.roll(v, 1, axis=ax)) / (2 * h) for ax in range(n)], axis=-1
    )


def grid_log_residual(prev: GridState, cur: GridState, nxt: GridState) -> tuple[np.ndarray, np.ndarray]:
    """Finite-difference log-evolution residual at ``cur`` and its error budget.

    Returns ``(residual, budget)`` on the grid, where the budget is
    ``5 (h^2 + dt^2)`` times a local derivative scale assembled from the
    fourth differences of ``u`` and ``v = log u`` and the third differences
    of ``v``.
    """
    g, n, h = cur.graph, cur.n, cur.h
    v = np.log(cur.values)
    dt_v = (np.log(nxt.values) - np.log(prev.values)) / (nxt.time - prev.time)
    grad_v = _central_grad(v, n, h)
    lap_v = _laplace_periodic(v, n, h)
    res = dt_v - lap_v - ld_apply(g, v) - (np.sum(grad_v**2, axis=-1) + psi_upsilon(g, v))
    lap2_u = _laplace_periodic(_laplace_periodic(cur.values, n, h), n, h)
    lap2_v = _laplace_periodic(lap_v, n, h)
    d3_v = _central_grad(lap_v, n, h)
    dt = 0.5 * (nxt.time - prev.time)
    scale = (
        np.abs(lap2_u) / cur.values
        + np.abs(lap2_v)
        + np.sqrt(np.sum(grad_v**2, axis=-1) * np.sum(d3_v**2, axis=-1))
        + 1.0
    )
    budget = 5.0 * (h * h + dt * dt) * scale
    return res, budget


def grid_liyau_lhs(state: GridState, dt: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Li-Yau left-hand side ``-(Laplace_h + L_d) log u`` on a grid state and its budget.

    The budget is ``5 (h^2 + dt^2)`` times the local derivative scale used by
    :func:`grid_log_residual` (spatial parts only).
    """
    g, n, h = state.graph, state.n, state.h
    v = np.log(state.values)
    lap_v = _laplace_periodic(v, n, h)
    lhs = -(lap_v + ld_apply(g, v))
    grad_v = _central_grad(v, n, h)
    d3_v = _central_grad(lap_v, n, h)
    scale = (
        np.abs(_laplace_periodic(lap_v, n, h))
        + np.sqrt(np.sum(grad_v**2, axis=-1) * np.sum(d3_v**2, axis=-1))
        + 1.0
    )
    return lhs, 5.0 * (h * h + dt * dt) * scale


__all__ += ["log_terms", "grid_liyau_lhs"]
