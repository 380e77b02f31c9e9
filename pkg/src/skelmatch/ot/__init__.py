"""Optimal-transport matching between two sets of local feature vectors.

Node sets are ``(P, C)`` arrays (or FeatureMaps, flattened to their
``N*T`` local vectors). The relevance score of two sets is
``sum_ij (1 - d_ij) * pi_ij`` under the optimal plan ``pi`` for cosine
costs ``d`` and cross-reference node weights.

The hot loops live in a compiled extension (``_kernels``); a pure-Python
implementation of the same algorithms is used when the extension is not
built or when ``SKELMATCH_BACKEND=python``.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError, SolverError
from . import _fallback

try:
    from . import _kernels
except ImportError:  # extension not built
    _kernels = None

NORM_EPS = 1e-12
WEIGHT_FLOOR = 1e-6
EXACT_LIMIT = 4096

BACKENDS = {"python": _fallback}
if _kernels is not None:
    BACKENDS["compiled"] = _kernels


def get_backend(name=None):
    """Resolve a backend module by name (``compiled``, ``python`` or ``auto``)."""
    if name is None:
        name = os.environ.get("SKELMATCH_BACKEND", "auto")
    if not isinstance(name, str):
        return name
    if name == "auto":
        return BACKENDS.get("compiled", _fallback)
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


BACKEND = get_backend().NAME


@dataclass(frozen=True)
class SolverOptions:
    solver: str = "auto"
    epsilon: float = 0.05
    tol: float = 1e-6
    max_iter: int = 1000
    exact_limit: int = EXACT_LIMIT
    backend: str = None

    def __post_init__(self):
        if self.solver not in ("exact", "sinkhorn", "auto"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1 or self.exact_limit < 1:
            raise ValueError("max_iter and exact_limit must be positive")

    def choose(self, P, Q):
        if self.solver == "auto":
            return "exact" if P * Q <= self.exact_limit else "sinkhorn"
        return self.solver


@dataclass(eq=False)
class TransportPlan:
    plan: np.ndarray
    r: np.ndarray
    c: np.ndarray
    cost: float
    solver: str
    iterations: int
    marginal_violation: float
    converged: bool = True
    epsilon: float = None
    extra: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.plan.shape

    def to_dict(self):
        out = {
            "dims": list(self.plan.shape),
            "r": self.r.tolist(),
            "c": self.c.tolist(),
            "plan": self.plan.tolist(),
            "cost": float(self.cost),
            "solver": self.solver,
            "iterations": int(self.iterations),
            "marginal_violation": float(self.marginal_violation),
            "converged": bool(self.converged),
        }
        if self.epsilon is not None:
            out["epsilon"] = self.epsilon
        return out

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def as_nodes(obj):
    """Coerce a FeatureMap or array-like into a float64 ``(P, C)`` array."""
    if hasattr(obj, "nodes"):
        return obj.nodes()
    X = np.asarray(obj, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[0] < 1:
        raise ShapeError(f"node set must be a non-empty (P, C) array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ShapeError("node set contains non-finite values")
    return X


def _check_dims(X, Y):
    if X.shape[1] != Y.shape[1]:
        raise ShapeError(f"feature dimensions differ: {X.shape[1]} vs {Y.shape[1]}", "dimension-mismatch")


def cost_matrix(X, Y):
    """Cosine distances ``1 - cos(x_i, y_j)`` in ``[0, 2]``.

    Pairs involving a (near-)zero vector cost 1, i.e. are treated as
    orthogonal.
    """
    X, Y = as_nodes(X), as_nodes(Y)
    _check_dims(X, Y)
    nx = np.linalg.norm(X, axis=1)
    ny = np.linalg.norm(Y, axis=1)
    okx = nx >= NORM_EPS
    oky = ny >= NORM_EPS
    d = (X / np.where(okx, nx, 1.0)[:, None]) @ (Y / np.where(oky, ny, 1.0)[:, None]).T
    np.clip(d, -1.0, 1.0, out=d)
    np.subtract(1.0, d, out=d)
    if not okx.all():
        d[~okx, :] = 1.0
    if not oky.all():
        d[:, ~oky] = 1.0
    return d


def _normalize(raw, floor):
    total = raw.sum()
    w = raw / total if total > 0 else np.zeros_like(raw)
    w = w + floor
    return w / w.sum()


def cross_reference_weights(X, Y, floor=WEIGHT_FLOOR, return_raw=False):
    """Node masses from each node's agreement with the other set's mean.

    ``raw_r[i] = max(x_i . mean(Y), 0)`` and symmetrically for ``c``. Each
    side is normalized to sum 1, offset by ``floor`` and renormalized, so
    every node keeps some mass and the weights are invariant to rescaling
    the features.
    """
    X, Y = as_nodes(X), as_nodes(Y)
    _check_dims(X, Y)
    raw_r = np.maximum(X @ Y.mean(axis=0), 0.0)
    raw_c = np.maximum(Y @ X.mean(axis=0), 0.0)
    r, c = _normalize(raw_r, floor), _normalize(raw_c, floor)
    if return_raw:
        return r, c, raw_r, raw_c
    return r, c


def _validate_problem(d, r, c):
    d = np.ascontiguousarray(d, dtype=np.float64)
    r = np.ascontiguousarray(r, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    if d.ndim != 2 or d.shape != (r.size, c.size) or r.ndim != 1 or c.ndim != 1:
        raise ShapeError(f"cost {d.shape} does not match marginals ({r.size}, {c.size})", "dimension-mismatch")
    if d.size == 0:
        raise ShapeError("empty transport problem", "dimension-mismatch")
    if not (np.all(np.isfinite(d)) and np.all(np.isfinite(r)) and np.all(np.isfinite(c))):
        raise SolverError("non-finite costs or marginals", "infeasible-marginals")
    if r.min() < 0 or c.min() < 0:
        raise SolverError("negative marginal mass", "infeasible-marginals")
    if abs(r.sum() - c.sum()) > 1e-12 * max(1.0, r.sum()):
        raise SolverError(f"unbalanced marginals: {r.sum()!r} vs {c.sum()!r}", "infeasible-marginals")
    return d, r, c


def _dot(a, b):
    return float(np.dot(a.ravel(), b.ravel()))


def _violation(plan, r, c):
    return float(max(np.abs(plan.sum(axis=1) - r).max(), np.abs(plan.sum(axis=0) - c).max()))


def solve_exact(d, r, c, exact_limit=EXACT_LIMIT, backend=None):
    """Exact optimal plan of the balanced transportation problem.

    Network simplex on the bipartite supply/demand graph: least-cost
    starting tree, most-negative reduced cost entering (lowest flat index
    on ties), and Bland's rule after a run of degenerate pivots.
    """
    d, r, c = _validate_problem(d, r, c)
    P, Q = d.shape
    if P * Q > exact_limit:
        raise SolverError(f"{P}x{Q} problem exceeds exact limit {exact_limit}", "size-limit-exceeded")
    kern = get_backend(backend)
    order = np.argsort(d.ravel(), kind="stable").astype(np.intp)
    tol = 1e-12 * max(1.0, float(np.abs(d).max()))
    max_iter = 1000 + 50 * P * Q
    bi, bj, bf, iters, status = kern.network_simplex(d, r, c, order, max_iter, tol)
    if status != _fallback.OK:
        why = "iteration limit" if status == _fallback.ITER_LIMIT else "basis breakdown"
        raise SolverError(f"network simplex failed ({why}) on {P}x{Q} problem", "no-convergence")
    plan = np.zeros((P, Q))
    np.add.at(plan, (np.asarray(bi), np.asarray(bj)), np.asarray(bf))
    return TransportPlan(plan, r, c, _dot(d, plan), "exact", int(iters), _violation(plan, r, c))


def round_to_polytope(F, r, c, backend=None):
    """Copy of ``F`` projected onto ``{pi >= 0, pi 1 = r, pi^T 1 = c}``."""
    F = np.array(F, dtype=np.float64, order="C")
    r = np.ascontiguousarray(r, dtype=np.float64)
    c = np.ascontiguousarray(c, dtype=np.float64)
    return get_backend(backend).round_plan(F, r, c)


def solve_sinkhorn(d, r, c, epsilon=0.05, tol=1e-6, max_iter=1000, backend=None):
    """Entropic approximation of the exact plan, rounded back to feasibility."""
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    d, r, c = _validate_problem(d, r, c)
    kern = get_backend(backend)
    rows = np.flatnonzero(r > 0)
    cols = np.flatnonzero(c > 0)
    full = rows.size == r.size and cols.size == c.size
    sub = d if full else np.ascontiguousarray(d[np.ix_(rows, cols)])
    F, iters, err, status = kern.sinkhorn(sub, r[rows], c[cols], float(epsilon), float(tol), int(max_iter))
    if status == _fallback.BREAKDOWN:
        raise SolverError(f"sinkhorn numerical breakdown at epsilon={epsilon}", "no-convergence")
    if not full:
        G = np.zeros(d.shape)
        G[np.ix_(rows, cols)] = F
        F = G
    plan = kern.round_plan(F, r, c)
    violation = _violation(plan, r, c)
    if violation > 10 * tol:
        raise SolverError(f"marginal violation {violation:.3g} after rounding", "no-convergence")
    return TransportPlan(
        plan, r, c, _dot(d, plan), "sinkhorn", int(iters), violation,
        converged=status == _fallback.OK, epsilon=float(epsilon), extra={"dual_error": float(err)},
    )


def solve(d, r, c, options=None):
    options = options or SolverOptions()
    which = options.choose(*np.shape(d))
    if which == "exact":
        return solve_exact(d, r, c, options.exact_limit, options.backend)
    return solve_sinkhorn(d, r, c, options.epsilon, options.tol, options.max_iter, options.backend)


def relevance_score(X, Y, options=None):
    """Semantic relevance ``s = sum (1 - d) * pi`` and the plan it came from."""
    X, Y = as_nodes(X), as_nodes(Y)
    d = cost_matrix(X, Y)
    r, c = cross_reference_weights(X, Y)
    plan = solve(d, r, c, options)
    # sum (1 - d) pi without a temporary
    return float(plan.plan.sum()) - plan.cost, plan
