"""Multi-scale, cross-scale and combined relevance scores between pyramids.

Strategies:

====  =====================================================
S     single scale, s(Xs1, Ys1)
Ms    sum of s over spatial levels s1..s3
Mt    sum of s over temporal levels t1..t3
M     mean of Ms and Mt
Cs    sum over the 6 ordered pairs of distinct spatial levels,
      each level averaged over joints first (T frame vectors)
Ct    same over temporal levels, averaged over frames (N joint vectors)
MC    mean of Ms, Mt, Cs and Ct
====  =====================================================
"""

import json
from dataclasses import dataclass, field

from .errors import ShapeError
from .ot import SolverOptions, relevance_score

KINDS = ("S", "Ms", "Mt", "M", "Cs", "Ct", "MC")
TERM_COUNTS = {"Ms": 3, "Mt": 3, "Cs": 6, "Ct": 6}

_SPATIAL = ("s1", "s2", "s3")
_TEMPORAL = ("t1", "t2", "t3")


def _diag_terms(levels):
    return [(f"s(X{a},Y{a})", a, a) for a in levels]


def _cross_terms(levels):
    return [(f"s(pool(X{a}),pool(Y{b}))", "pool_" + a, "pool_" + b)
            for a in levels for b in levels if a != b]


GROUP_TERMS = {
    "Ms": _diag_terms(_SPATIAL),
    "Mt": _diag_terms(_TEMPORAL),
    "Cs": _cross_terms(_SPATIAL),
    "Ct": _cross_terms(_TEMPORAL),
}
GROUPS_OF = {"S": (), "Ms": ("Ms",), "Mt": ("Mt",), "M": ("Ms", "Mt"),
             "Cs": ("Cs",), "Ct": ("Ct",), "MC": ("Ms", "Mt", "Cs", "Ct")}
SINGLE_TERM = GROUP_TERMS["Ms"][0]


@dataclass(frozen=True)
class MatchStrategy:
    kind: str = "MC"
    options: SolverOptions = field(default_factory=SolverOptions)
    inner_normalization: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}; expected one of {', '.join(KINDS)}")

    def terms(self):
        if self.kind == "S":
            return [SINGLE_TERM]
        return [t for g in GROUPS_OF[self.kind] for t in GROUP_TERMS[g]]


def strategy_total(kind, components, inner_normalization=False):
    """Apply a strategy's formula to a component map of term scores."""
    if kind == "S":
        return components[SINGLE_TERM[0]]
    sums = []
    for g in GROUPS_OF[kind]:
        total = sum(components[t[0]] for t in GROUP_TERMS[g])
        sums.append(total / TERM_COUNTS[g] if inner_normalization else total)
    return sum(sums) / len(sums)


@dataclass(eq=False)
class MatchScore:
    total: float
    components: dict
    strategy: str
    inner_normalization: bool = False

    def aggregates(self):
        """Per-group sums (``s_ms``, ``s_mt``, ``s_cs``, ``s_ct``) that are available."""
        out = {}
        for g in ("Ms", "Mt", "Cs", "Ct"):
            ids = [t[0] for t in GROUP_TERMS[g]]
            if all(i in self.components for i in ids):
                out["s_" + g.lower()] = sum(self.components[i] for i in ids)
        return out

    def recompute(self):
        return strategy_total(self.strategy, self.components, self.inner_normalization)

    def to_dict(self):
        return {
            "strategy": self.strategy,
            "inner_normalization": self.inner_normalization,
            "total": self.total,
            "aggregates": self.aggregates(),
            "components": dict(self.components),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _check_shapes(Xp, Yp, names):
    for name in names:
        a, b = Xp.level(name).shape, Yp.level(name).shape
        if a != b:
            raise ShapeError(f"level {name}: shapes {a} and {b} differ", "shape-mismatch")


def match(Xp, Yp, strategy=None):
    """Score two pyramids under ``strategy`` (default: MC, auto solver)."""
    strategy = strategy or MatchStrategy()
    terms = strategy.terms()
    levels = sorted({k[-2:] for _, a, b in terms for k in (a, b)})
    _check_shapes(Xp, Yp, levels)
    xs, ys = Xp.node_sets(), Yp.node_sets()
    components = {}
    done = {}
    for term_id, a, b in terms:
        # s1 and t1 are the same map, so their diagonal terms coincide
        key = (a, b) if a.startswith("pool_") else (a.replace("t1", "s1"), b.replace("t1", "s1"))
        if key not in done:
            done[key] = relevance_score(xs[a], ys[b], strategy.options)[0]
        components[term_id] = done[key]
    total = strategy_total(strategy.kind, components, strategy.inner_normalization)
    return MatchScore(total, components, strategy.kind, strategy.inner_normalization)


def _single(kind):
    def fn(Xp, Yp, options=None):
        return match(Xp, Yp, MatchStrategy(kind, options or SolverOptions()))

    fn.__name__ = {"Ms": "multi_spatial", "Mt": "multi_temporal",
                   "Cs": "cross_spatial", "Ct": "cross_temporal"}[kind]
    return fn


multi_spatial = _single("Ms")
multi_temporal = _single("Mt")
cross_spatial = _single("Cs")
cross_temporal = _single("Ct")


def combined(Xp, Yp, strategy):
    return match(Xp, Yp, strategy)
