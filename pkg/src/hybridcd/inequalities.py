"""Li-Yau, Harnack and hybrid curvature-dimension checks on concrete solutions.

Every ``verify_*`` routine evaluates a slack (right-hand side minus
left-hand side) over an explicit, seeded sample plan and reports the worst
sample. Passing means no violation on the declared plan; it is not a proof.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .graph import WeightedGraph, b_h, graph_distance, k_min, ld_apply, psi2_upsilon, psi_upsilon, validate
from .heat import GaussianMixtureSolution, PointEvaluation, log_terms

__all__ = [
    "CAVEAT",
    "TOLERANCE",
    "InequalityReport",
    "TensorPlan",
    "BallPlan",
    "PairPlan",
    "liyau_lhs",
    "liyau_lhs_points",
    "verify_liyau_global",
    "liyau_local_check",
    "minimal_local_constant",
    "g_function",
    "harnack_rhs_global",
    "harnack_rhs_local",
    "verify_harnack_global",
    "verify_harnack_local",
    "hybrid_gamma2",
    "hybrid_terms",
    "verify_cd_hyb",
    "reevaluate",
    "dump_report",
    "load_report",
    "reports_to_csv",
]

CAVEAT = "no violation found on the declared sample plan; this is not a proof"
TOLERANCE = 1e-9


@dataclass
class InequalityReport:
    kind: str
    samples: int
    min_slack: float
    worst_point: dict
    parameters: dict
    passed: bool
    tolerance: float = TOLERANCE
    plan: dict = field(default_factory=dict)
    caveat: str = CAVEAT

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    @classmethod
    def from_dict(cls, data: dict) -> "InequalityReport":
        params = {k: _from_json_number(v) for k, v in data["parameters"].items()}
        return cls(
            kind=data["kind"],
            samples=int(data["samples"]),
            min_slack=float(data["min_slack"]),
            worst_point=data["worst_point"],
            parameters=params,
            passed=bool(data["passed"]),
            tolerance=float(data["tolerance"]),
            plan=data.get("plan", {}),
            caveat=data.get("caveat", CAVEAT),
        )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _from_json_number(v):
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return v


# sample plans -------------------------------------------------------------

@dataclass(frozen=True)
class TensorPlan:
    """Log-spaced times times an ``x`` grid covering the centers +- ``width * sqrt(t)``."""

    t_min: float = 0.05
    t_max: float = 10.0
    n_t: int = 25
    n_x: int = 400  # total spatial points per time; per axis for n=2 is its square root
    width: float = 6.0

    def times(self) -> np.ndarray:
        return np.geomspace(self.t_min, self.t_max, self.n_t)

    def points(self, sol: GaussianMixtureSolution, t: float) -> np.ndarray:
        n = sol.n
        per_axis = self.n_x if n == 1 else max(2, int(round(self.n_x ** (1.0 / n))))
        centers = sol._centers[~sol._flat] if np.any(~sol._flat) else np.zeros((1, n))
        lo = centers.min(axis=0) - self.width * math.sqrt(t)
        hi = centers.max(axis=0) + self.width * math.sqrt(t)
        axes = [np.linspace(lo[k], hi[k], per_axis) for k in range(n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([c.ravel() for c in mesh], axis=-1)

    def to_dict(self) -> dict:
        return {"type": "tensor", **asdict(self)}


@dataclass(frozen=True)
class BallPlan:
    """Log-spaced times times seeded uniform points of the ball ``B_rho(z)``."""

    center: tuple
    rho: float
    t_min: float = 0.05
    t_max: float = 10.0
    n_t: int = 25
    n_x: int = 400
    seed: int = 0

    def times(self) -> np.ndarray:
        return np.geomspace(self.t_min, self.t_max, self.n_t)

    def all_points(self, n: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        d = rng.standard_normal((self.n_t, self.n_x, n))
        d /= np.linalg.norm(d, axis=-1, keepdims=True)
        r = self.rho * rng.uniform(size=(self.n_t, self.n_x, 1)) ** (1.0 / n)
        return np.asarray(self.center, dtype=float) + r * d

    def to_dict(self) -> dict:
        out = {"type": "ball", **asdict(self)}
        out["center"] = list(self.center)
        return out


@dataclass(frozen=True)
class PairPlan:
    """Seeded random pairs ``(t1, x1, y1)``, ``(t2, x2, y2)`` with ``t1 < t2``."""

    pairs: int = 10_000
    t_min: float = 0.05
    t_max: float = 5.0
    gap_min: float = 0.01
    gap_max: float = 5.0
    spread: float = 4.0
    seed: int = 0
    same_species: bool = False

    def draw(self, sol: GaussianMixtureSolution) -> dict:
        rng = np.random.default_rng(self.seed)
        n, m = sol.n, sol.graph.size
        t1 = np.exp(rng.uniform(math.log(self.t_min), math.log(self.t_max), self.pairs))
        gap = np.exp(rng.uniform(math.log(self.gap_min), math.log(self.gap_max), self.pairs))
        centers = sol._centers[~sol._flat] if np.any(~sol._flat) else np.zeros((1, n))
        mid = centers.mean(axis=0)
        x1 = mid + rng.uniform(-self.spread, self.spread, (self.pairs, n))
        x2 = mid + rng.uniform(-self.spread, self.spread, (self.pairs, n))
        y1 = rng.integers(m, size=self.pairs)
        y2 = y1.copy() if self.same_species else rng.integers(m, size=self.pairs)
        return {"t1": t1, "t2": t1 + gap, "x1": x1, "x2": x2, "y1": y1, "y2": y2}

    def to_dict(self) -> dict:
        return {"type": "pairs", **asdict(self)}


# Li-Yau ---------------------------------------------------------------------

def _liyau_forms(sol: GaussianMixtureSolution, ev: PointEvaluation):
    lt = log_terms(sol, ev)
    gamma = lt["grad_v2"] + lt["psi_v"]
    form_a = gamma - lt["dt_v"]
    form_b = -(lt["lap_v"] + lt["ld_v"])
    return form_a, form_b, gamma, lt


def liyau_lhs_points(sol: GaussianMixtureSolution, t: float, X) -> np.ndarray:
    """``|grad v|^2 + Psi_Upsilon(v) - dt v`` at points ``X`` (P, n), all vertices."""
    if not t > 0:
        raise ValueError(f"Li-Yau quantities need t > 0, got {t}")
    ev = sol.evaluate(t, X)
    a, b, _gamma, _lt = _liyau_forms(sol, ev)
    if np.any(np.abs(a - b) > 1e-9 * (1.0 + np.abs(a))):
        raise AssertionError("the two Li-Yau forms disagree; log-evolution identity broken")
    return a


def liyau_lhs(sol: GaussianMixtureSolution, t: float, x, y) -> float:
    """Li-Yau left-hand side at one point; also equals ``-(Laplace + L_d) log u``."""
    X = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    return float(liyau_lhs_points(sol, t, X)[0, sol.vertex_index(y)])


def _point(sol, t, x, i) -> dict:
    return {"t": float(t), "x": [float(c) for c in np.atleast_1d(x)], "y": sol.graph.vertices[i]}


def _scan(sol, plan_iter, slack_fn):
    """Minimum slack over ``(t, X)`` blocks; ties resolve to the first sample."""
    best = math.inf
    where = None
    count = 0
    for t, X in plan_iter:
        s = slack_fn(t, X)  # (P, m)
        count += s.size
        k = int(np.argmin(s))
        if s.flat[k] < best:
            p, i = divmod(k, s.shape[1])
            best = float(s.flat[k])
            where = _point(sol, t, X[p], i)
    return best, where, count


def verify_liyau_global(
    sol: GaussianMixtureSolution, d: float, plan: TensorPlan | None = None, tol: float = TOLERANCE
) -> InequalityReport:
    """Check ``|grad v|^2 + Psi_Upsilon(v) - dt v <= d/(2t)`` on a tensor plan."""
    plan = plan or TensorPlan()

    def slack(t, X):
        return d / (2 * t) - liyau_lhs_points(sol, t, X)

    best, where, count = _scan(sol, ((t, plan.points(sol, t)) for t in plan.times()), slack)
    return InequalityReport(
        kind="liyau_global",
        samples=count,
        min_slack=best,
        worst_point=where,
        parameters={"d": d, "n": sol.n},
        passed=best >= -tol,
        tolerance=tol,
        plan=plan.to_dict(),
    )


def _local_rhs(d, theta, rho, C, t):
    return d / (2 * t * (1 - theta)) + C / (2 * (1 - theta) * rho**2) * (1 + 1 / (theta * (1 - theta)))


def _check_theta(theta):
    if not 0 < theta < 1:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")


def _local_lhs_points(sol, theta, t, X):
    ev = sol.evaluate(t, X)
    a, b, gamma, lt = _liyau_forms(sol, ev)
    return (1 - theta) * gamma - lt["dt_v"]


def _ball_blocks(plan: BallPlan, n):
    pts = plan.all_points(n)
    return zip(plan.times(), pts)


def liyau_local_check(
    sol: GaussianMixtureSolution,
    theta: float,
    rho: float,
    z,
    C: float,
    d: float,
    plan: BallPlan | None = None,
    tol: float = TOLERANCE,
) -> InequalityReport:
    """Check the theta-local Li-Yau bound on samples of ``B_rho(z)``.

    ``C`` is supplied by the caller; only its existence is known in general.
    """
    _check_theta(theta)
    if not rho > 0 or C < 0:
        raise ValueError("need rho > 0 and C >= 0")
    z = tuple(float(c) for c in np.atleast_1d(z))
    plan = plan or BallPlan(center=z, rho=rho)
    if tuple(plan.center) != z or plan.rho != rho:
        raise ValueError("the ball plan must use the same center and radius")

    def slack(t, X):
        return _local_rhs(d, theta, rho, C, t) - _local_lhs_points(sol, theta, t, X)

    best, where, count = _scan(sol, _ball_blocks(plan, sol.n), slack)
    return InequalityReport(
        kind="liyau_local",
        samples=count,
        min_slack=best,
        worst_point=where,
        parameters={"d": d, "theta": theta, "rho": rho, "C": C, "z": list(z), "n": sol.n},
        passed=best >= -tol,
        tolerance=tol,
        plan=plan.to_dict(),
    )


def minimal_local_constant(
    sol: GaussianMixtureSolution,
    theta: float,
    rho: float,
    z,
    d: float,
    plan: BallPlan | None = None,
    rel_tol: float = 1e-12,
) -> dict:
    """Smallest ``C >= 0`` passing :func:`liyau_local_check` on the plan.

    Found by bisection on ``C`` and cross-checked against the closed form
    ``max(0, max_samples (LHS - d/(2t(1-theta))) * 2 (1-theta) rho^2 / (1 + 1/(theta(1-theta))))``.
    """
    _check_theta(theta)
    z = tuple(float(c) for c in np.atleast_1d(z))
    plan = plan or BallPlan(center=z, rho=rho)
    factor = 2 * (1 - theta) * rho**2 / (1 + 1 / (theta * (1 - theta)))
    excess = -math.inf
    for t, X in _ball_blocks(plan, sol.n):
        e = _local_lhs_points(sol, theta, t, X) - d / (2 * t * (1 - theta))
        excess = max(excess, float(e.max()))
    closed = max(0.0, excess * factor)

    def passes(C):
        return liyau_local_check(sol, theta, rho, z, C, d, plan, tol=0.0).passed

    lo, hi = 0.0, max(1.0, 2 * closed)
    if passes(lo):
        bisected = 0.0
    else:
        while not passes(hi):
            hi *= 2
        while hi - lo > rel_tol * max(hi, 1e-300):
            mid = 0.5 * (lo + hi)
            lo, hi = (lo, mid) if passes(mid) else (mid, hi)
        bisected = hi
    if abs(bisected - closed) > 1e-8 * max(1.0, closed):
        raise AssertionError(f"bisection {bisected} disagrees with closed form {closed}")
    return {"C": bisected, "closed_form": closed, "theta": theta, "rho": rho, "d": d}


def g_function(sol: GaussianMixtureSolution, theta: float, t: float, x, y) -> float:
    """``G = -t (theta (|grad v|^2 + Psi_Upsilon(v)) + L v)`` with both forms cross-checked."""
    _check_theta(theta)
    if not t > 0:
        raise ValueError(f"G needs t > 0, got {t}")
    X = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    ev = sol.evaluate(t, X)
    _a, _b, gamma, lt = _liyau_forms(sol, ev)
    i = sol.vertex_index(y)
    lv = lt["lap_v"] + lt["ld_v"]
    first = float(-t * (theta * gamma + lv)[0, i])
    second = float(t * ((1 - theta) * gamma - lt["dt_v"])[0, i])
    if abs(first - second) > 1e-9 * (1.0 + abs(first)):
        raise AssertionError("the two forms of G disagree")
    return first


# Harnack --------------------------------------------------------------------

def _check_times(t1, t2):
    if not (0 < t1 < t2):
        raise ValueError(f"Harnack needs 0 < t1 < t2, got t1={t1}, t2={t2}")


def _log_harnack_global(d, t1, t2, dx2, dist_y, kmin):
    gap = t2 - t1
    return 0.5 * d * np.log(t2 / t1) + dx2 / (4 * gap) + 2 * np.asarray(dist_y) ** 2 / (kmin * gap)


def harnack_rhs_global(d, t1, t2, x1, x2, dist_y, kmin) -> float:
    """``(t2/t1)^{d/2} exp(|x2-x1|^2/(4(t2-t1)) + 2 dist_y^2/(kmin (t2-t1)))``."""
    _check_times(t1, t2)
    if not kmin > 0:
        raise ValueError("k_min must be positive")
    dx = np.atleast_1d(np.asarray(x2, dtype=float) - np.asarray(x1, dtype=float))
    return float(math.exp(_log_harnack_global(d, t1, t2, float(dx @ dx), dist_y, kmin)))


def _log_harnack_local(d, theta, rho, C, t1, t2, dx2, dist_y, kmin):
    gap = t2 - t1
    q = 1 - theta
    return (
        d / (2 * q) * np.log(t2 / t1)
        + dx2 / (4 * q * gap)
        + 2 * np.asarray(dist_y) ** 2 / (q * kmin * gap)
        + C * gap / (2 * q * rho**2) * (1 + 1 / (theta * q))
    )


def harnack_rhs_local(d, theta, rho, C, t1, t2, x1, x2, dist_y, kmin, z=None) -> float:
    """Right-hand side factor of the theta-local Harnack inequality.

    If ``z`` is given, ``x1`` and ``x2`` must lie in ``B_rho(z)``.
    """
    _check_theta(theta)
    _check_times(t1, t2)
    if not rho > 0 or C < 0 or not kmin > 0:
        raise ValueError("need rho > 0, C >= 0 and k_min > 0")
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if z is not None:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if np.linalg.norm(x1 - z) > rho or np.linalg.norm(x2 - z) > rho:
            raise ValueError("x1 and x2 must lie in the ball B_rho(z)")
    dx = x2 - x1
    return float(math.exp(_log_harnack_local(d, theta, rho, C, t1, t2, float(dx @ dx), dist_y, kmin)))


def _distance_table(g: WeightedGraph) -> np.ndarray:
    m = g.size
    D = np.zeros((m, m))
    for a in range(m):
        for b in range(m):
            D[a, b] = graph_distance(g, g.vertices[a], g.vertices[b])
    return D


def _pair_log_u(sol, t, X, ys):
    """``log u(t[k], X[k], ys[k])`` for arrays of pairs (one evaluation per pair)."""
    out = np.empty(len(t))
    for k in range(len(t)):
        ev = sol.evaluate(float(t[k]), X[k][None, :])
        out[k] = ev.log_u()[0, ys[k]]
    return out


def _harnack_scan(sol, draw, log_rhs):
    lu1 = _pair_log_u(sol, draw["t1"], draw["x1"], draw["y1"])
    lu2 = _pair_log_u(sol, draw["t2"], draw["x2"], draw["y2"])
    # relative slack 1 - u1 / (RHS u2), computed in log space
    slack = -np.expm1(lu1 - log_rhs - lu2)
    k = int(np.argmin(slack))
    g = sol.graph
    where = {
        "t1": float(draw["t1"][k]),
        "x1": [float(c) for c in draw["x1"][k]],
        "y1": g.vertices[int(draw["y1"][k])],
        "t2": float(draw["t2"][k]),
        "x2": [float(c) for c in draw["x2"][k]],
        "y2": g.vertices[int(draw["y2"][k])],
    }
    return float(slack[k]), where


def _harnack_preconditions(g: WeightedGraph):
    rep = validate(g)
    if not rep.connected:
        raise ValueError("Harnack comparison needs a connected graph")
    if not rep.symmetric_support:
        raise ValueError("Harnack comparison needs symmetric support")
    return k_min(g)


def verify_harnack_global(
    sol: GaussianMixtureSolution, d: float, plan: PairPlan | None = None, tol: float = TOLERANCE
) -> InequalityReport:
    """Check ``u(t1,x1,y1) <= RHS * u(t2,x2,y2)`` on seeded pairs, relative slack."""
    g = sol.graph
    kmin = _harnack_preconditions(g)
    plan = plan or PairPlan()
    draw = plan.draw(sol)
    dist = _distance_table(g)[draw["y1"], draw["y2"]]
    dx2 = np.sum((draw["x2"] - draw["x1"]) ** 2, axis=1)
    log_rhs = _log_harnack_global(d, draw["t1"], draw["t2"], dx2, dist, kmin)
    best, where = _harnack_scan(sol, draw, log_rhs)
    return InequalityReport(
        kind="harnack_global",
        samples=plan.pairs,
        min_slack=best,
        worst_point=where,
        parameters={"d": d, "k_min": kmin, "n": sol.n},
        passed=best >= -tol,
        tolerance=tol,
        plan=plan.to_dict(),
    )


def verify_harnack_local(
    sol: GaussianMixtureSolution,
    d: float,
    theta: float,
    rho: float,
    C: float,
    z,
    plan: PairPlan | None = None,
    tol: float = TOLERANCE,
) -> InequalityReport:
    """Local Harnack on seeded pairs whose points are redrawn inside ``B_rho(z)``."""
    _check_theta(theta)
    g = sol.graph
    kmin = _harnack_preconditions(g)
    plan = plan or PairPlan()
    draw = plan.draw(sol)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    rng = np.random.default_rng(plan.seed + 1)
    for key in ("x1", "x2"):
        dirs = rng.standard_normal(draw[key].shape)
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        r = rho * rng.uniform(size=(plan.pairs, 1)) ** (1.0 / sol.n)
        draw[key] = z + r * dirs
    dist = _distance_table(g)[draw["y1"], draw["y2"]]
    dx2 = np.sum((draw["x2"] - draw["x1"]) ** 2, axis=1)
    log_rhs = _log_harnack_local(d, theta, rho, C, draw["t1"], draw["t2"], dx2, dist, kmin)
    best, where = _harnack_scan(sol, draw, log_rhs)
    return InequalityReport(
        kind="harnack_local",
        samples=plan.pairs,
        min_slack=best,
        worst_point=where,
        parameters={"d": d, "theta": theta, "rho": rho, "C": C, "z": list(z), "k_min": kmin, "n": sol.n},
        passed=best >= -tol,
        tolerance=tol,
        plan=plan.to_dict(),
    )


# hybrid Gamma_2 ---------------------------------------------------------------

def hybrid_terms(g: WeightedGraph, u, grad, hess, lap, grad_lap) -> dict:
    """Hybrid carre du champ quantities for ``L = Laplace + L_d`` at common points.

    Arrays carry true (unscaled) values: ``u`` (P, m), ``grad`` (P, m, n),
    ``hess`` (P, m, n, n), ``lap`` (P, m), ``grad_lap`` (P, m, n).
    """
    k = g.kernel
    mask = k > 0
    delta = u[:, None, :] - u[:, :, None]  # [p, y, z] = u_z - u_y
    dgrad = grad[:, None, :, :] - grad[:, :, None, :]
    dlap = lap[:, None, :] - lap[:, :, None]
    with np.errstate(over="ignore"):
        up = np.expm1(delta)
        ex = np.exp(delta)

    def rowsum(a):
        return np.sum(np.where(mask, k * a, 0.0), axis=-1)

    grad2 = np.einsum("pmn,pmn->pm", grad, grad)
    hs2 = np.einsum("pmab,pmab->pm", hess, hess)
    psi = psi_upsilon(g, u)
    ld_u = ld_apply(g, u)
    Lu = lap + ld_u
    # Laplace of |grad u|^2 and of Psi_Upsilon(u)
    lap_grad2 = 2 * hs2 + 2 * np.einsum("pmn,pmn->pm", grad, grad_lap)
    lap_psi = rowsum(up * dlap + ex * np.einsum("pyzn,pyzn->pyz", dgrad, dgrad))
    L_gamma = lap_grad2 + ld_apply(g, grad2) + lap_psi + ld_apply(g, psi)
    grad_Lu = grad_lap + np.sum(np.where(mask[None, :, :, None], k[None, :, :, None] * dgrad, 0.0), axis=2)
    cross = np.einsum("pmn,pmn->pm", grad, grad_Lu)
    lhs = 0.5 * (L_gamma - 2 * cross - b_h(g, u, Lu))
    return {
        "lhs": lhs,
        "gamma2": hs2,
        "psi2": psi2_upsilon(g, u),
        "gamma": grad2 + psi,
        "Lu": Lu,
    }


def _true_arrays(ev: PointEvaluation):
    c = np.exp(ev.log_scale)
    return (
        ev.u * c[:, None],
        ev.grad * c[:, None, None],
        ev.hess * c[:, None, None, None],
        ev.lap * c[:, None],
        ev.grad_lap * c[:, None, None],
    )


def hybrid_gamma2(sol: GaussianMixtureSolution, t: float, x, y) -> dict:
    """``{(Gamma + Psi_Upsilon)_2(u), Gamma_2(u), Psi_{2,Upsilon}(u)}`` of the slice ``u(t, ., .)``."""
    if not t > 0:
        raise ValueError(f"hybrid Gamma_2 needs t > 0, got {t}")
    X = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    terms = hybrid_terms(sol.graph, *_true_arrays(sol.evaluate(t, X)))
    i = sol.vertex_index(y)
    return {"lhs": float(terms["lhs"][0, i]), "gamma2": float(terms["gamma2"][0, i]), "psi2": float(terms["psi2"][0, i])}


def _cd_hyb_slack(sol, kappa, d, t, X):
    terms = hybrid_terms(sol.graph, *_true_arrays(sol.evaluate(t, X)))
    inv_d = 0.0 if math.isinf(d) else 1.0 / d
    return terms["lhs"] - kappa * terms["gamma"] - inv_d * terms["Lu"] ** 2


def _lemma_slack(sol, t, X):
    terms = hybrid_terms(sol.graph, *_true_arrays(sol.evaluate(t, X)))
    return terms["lhs"] - terms["gamma2"] - terms["psi2"]


def verify_cd_hyb(
    sol: GaussianMixtureSolution,
    kappa: float,
    d: float,
    plan: TensorPlan | None = None,
    tol: float = TOLERANCE,
) -> InequalityReport:
    """Check the hybrid curvature-dimension inequality on time slices of ``sol``."""
    plan = plan or TensorPlan()
    best, where, count = _scan(
        sol,
        ((t, plan.points(sol, t)) for t in plan.times()),
        lambda t, X: _cd_hyb_slack(sol, kappa, d, t, X),
    )
    return InequalityReport(
        kind="cd_hyb",
        samples=count,
        min_slack=best,
        worst_point=where,
        parameters={"kappa": kappa, "d": d, "n": sol.n},
        passed=best >= -tol,
        tolerance=tol,
        plan=plan.to_dict(),
    )


def verify_gamma2_lemma(
    sol: GaussianMixtureSolution, plan: TensorPlan | None = None, tol: float = TOLERANCE
) -> InequalityReport:
    """Check ``(Gamma + Psi_Upsilon)_2(u) >= Gamma_2(u) + Psi_{2,Upsilon}(u)`` on time slices."""
    plan = plan or TensorPlan()
    best, where, count = _scan(
        sol, ((t, plan.points(sol, t)) for t in plan.times()), lambda t, X: _lemma_slack(sol, t, X)
    )
    return InequalityReport(
        kind="lemma_gamma2",
        samples=count,
        min_slack=best,
        worst_point=where,
        parameters={"n": sol.n},
        passed=best >= -tol,
        tolerance=tol,
        plan=plan.to_dict(),
    )


__all__ += ["verify_gamma2_lemma"]


# re-evaluation and I/O ---------------------------------------------------------

def reevaluate(sol: GaussianMixtureSolution, report: InequalityReport) -> float:
    """Recompute the slack at the stored worst point."""
    p = report.parameters
    w = report.worst_point
    if report.kind.startswith("harnack"):
        g = sol.graph
        i1, i2 = g.index[w["y1"]], g.index[w["y2"]]
        dist = graph_distance(g, w["y1"], w["y2"])
        dx = np.asarray(w["x2"]) - np.asarray(w["x1"])
        if report.kind == "harnack_global":
            lr = _log_harnack_global(p["d"], w["t1"], w["t2"], float(dx @ dx), dist, p["k_min"])
        else:
            lr = _log_harnack_local(
                p["d"], p["theta"], p["rho"], p["C"], w["t1"], w["t2"], float(dx @ dx), dist, p["k_min"]
            )
        lu1 = sol.evaluate(w["t1"], np.asarray(w["x1"])[None, :]).log_u()[0, i1]
        lu2 = sol.evaluate(w["t2"], np.asarray(w["x2"])[None, :]).log_u()[0, i2]
        return float(-np.expm1(lu1 - lr - lu2))
    t = w["t"]
    X = np.asarray(w["x"], dtype=float)[None, :]
    i = sol.vertex_index(w["y"])
    if report.kind == "liyau_global":
        s = p["d"] / (2 * t) - liyau_lhs_points(sol, t, X)
    elif report.kind == "liyau_local":
        s = _local_rhs(p["d"], p["theta"], p["rho"], p["C"], t) - _local_lhs_points(sol, p["theta"], t, X)
    elif report.kind == "cd_hyb":
        s = _cd_hyb_slack(sol, p["kappa"], p["d"], t, X)
    elif report.kind == "lemma_gamma2":
        s = _lemma_slack(sol, t, X)
    else:
        raise ValueError(f"unknown report kind {report.kind!r}")
    return float(s[0, i])


def dump_report(report: InequalityReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path) -> InequalityReport:
    with open(path) as fh:
        return InequalityReport.from_dict(json.load(fh))


def reports_to_csv(reports, path) -> None:
    """One row per check: kind, params, samples, min_slack, passed."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "params", "samples", "min_slack", "passed"])
        for r in reports:
            params = json.dumps(_jsonable(r.parameters), sort_keys=True)
            w.writerow([r.kind, params, r.samples, repr(r.min_slack), r.passed])
