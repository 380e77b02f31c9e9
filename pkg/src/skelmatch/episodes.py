"""Episodic one-shot evaluation.

Protocol 1 averages accuracy over random n-way 1-shot episodes drawn from
the novel classes. Protocol 2 classifies every remaining novel-class
sample against a fixed gallery of one exemplar per class.

Episode ``i`` of a run with seed ``s`` draws from
``numpy.random.default_rng(SeedSequence([s, i]))`` (PCG64), so an episode
does not depend on how many episodes precede it or on worker scheduling.
"""

import csv
import io
import json
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SamplingError, ShapeError
from .matching import MatchStrategy, match


@dataclass(frozen=True)
class EpisodeSpec:
    n_way: int = 5
    k_shot: int = 1
    n_query: int = 15
    seed: int = 0

    def __post_init__(self):
        if self.n_way < 1:
            raise ConfigError("n_way must be >= 1", "config-invalid")
        if self.k_shot != 1:
            raise ConfigError("only 1-shot episodes are supported", "config-invalid")
        if self.n_query < 1:
            raise ConfigError("n_query must be >= 1", "config-invalid")


@dataclass
class Episode:
    index: int
    classes: tuple
    support: dict  # class -> sample id
    queries: list  # (sample id, true class)


@dataclass
class EpisodeResult:
    index: int
    classes: tuple
    support: dict
    queries: list  # dicts: id, true, pred, scores
    correct: int
    total: int

    @property
    def accuracy(self):
        return self.correct / self.total

    def to_dict(self):
        return {
            "index": self.index,
            "classes": list(self.classes),
            "support": {str(k): v for k, v in self.support.items()},
            "accuracy": self.accuracy,
            "correct": self.correct,
            "total": self.total,
            "queries": self.queries,
        }


def episode_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def _class_pool(pool):
    if hasattr(pool, "by_class"):
        pool = pool.by_class()
    return {int(k): sorted(v) for k, v in sorted(pool.items())}


def sample_episode(pool, spec, index=0, classes=None):
    """Draw one episode.

    Parameters
    ----------
    pool : Dataset or dict
        Sample ids per class.
    spec : EpisodeSpec
    index : int
        Episode number; combined with ``spec.seed`` to seed the draw.
    classes : iterable of int, optional
        Candidate classes (default: every class in ``pool``).

    Returns
    -------
    Episode
    """
    by_class = _class_pool(pool)
    cand = sorted(by_class) if classes is None else sorted(int(a) for a in classes)
    need = spec.k_shot + spec.n_query
    for a in cand:
        have = len(by_class.get(a, ()))
        if have < need:
            raise SamplingError(f"class {a} has {have} samples, episode needs {need}")
    if spec.n_way > len(cand):
        raise SamplingError(f"{spec.n_way}-way episode but only {len(cand)} candidate classes")
    rng = episode_rng(spec.seed, index)
    chosen = sorted(int(a) for a in rng.choice(cand, size=spec.n_way, replace=False))
    support, queries = {}, []
    for a in chosen:
        ids = by_class[a]
        pick = rng.permutation(len(ids))[:need]
        support[a] = ids[pick[0]]
        queries.extend((ids[k], a) for k in pick[1:])
    return Episode(index, tuple(chosen), support, queries)


class PairScorer:
    """Memoised ``match(query, support).total`` over a dataset.

    Scores are keyed by ``(query_id, support_id)``. With ``symmetric=True``
    the key is the unordered pair, which halves the work when every sample
    plays both roles; the strategies' scores are symmetric in exact
    arithmetic.
    """

    def __init__(self, dataset, strategy=None, symmetric=False):
        self.dataset = dataset
        self.strategy = strategy or MatchStrategy()
        self.symmetric = symmetric
        self._cache = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._cache)

    def __call__(self, query_id, support_id):
        key = (query_id, support_id)
        if self.symmetric and support_id < query_id:
            key = (support_id, query_id)
        val = self._cache.get(key)
        if val is None:
            a, b = key
            val = match(self.dataset.pyramid(a), self.dataset.pyramid(b), self.strategy).total
            with self._lock:
                self._cache[key] = val
        return val


def classify_query(query, supports, strategy=None, score_fn=None):
    """Predict the support class with the highest relevance to ``query``.

    ``supports`` maps class id to a pyramid (or to a sample id when
    ``score_fn(query, support)`` is given). Ties go to the lowest class id.
    Returns ``(class, {class: score})``.
    """
    if not supports:
        raise SamplingError("no support classes", "config-invalid")
    strategy = strategy or MatchStrategy()
    scores = {}
    for a in sorted(supports):
        try:
            if score_fn is not None:
                scores[a] = float(score_fn(query, supports[a]))
            else:
                scores[a] = float(match(query, supports[a], strategy).total)
        except ShapeError as exc:
            raise ShapeError(f"support class {a}: {exc}", exc.code) from None
    best = None
    for a, s in scores.items():
        if best is None or s > scores[best]:
            best = a
    return best, scores


def _run_episode(ep, scorer, shuffle_labels, seed):
    truth = [t for _, t in ep.queries]
    if shuffle_labels:
        # control: predictions are untouched, true labels permuted within the episode
        truth = [truth[k] for k in episode_rng(seed, ep.index).permutation(len(truth))]
    rows, correct = [], 0
    for (qid, _), true in zip(ep.queries, truth):
        pred, scores = classify_query(qid, ep.support, score_fn=scorer)
        correct += pred == true
        rows.append({"id": qid, "true": true, "pred": pred,
                     "scores": [scores[a] for a in ep.classes]})
    return EpisodeResult(ep.index, ep.classes, ep.support, rows, correct, len(rows))


def resolve_workers(workers=None):
    """Worker count: explicit value, else CPU count, capped by ``SKELMATCH_THREADS``."""
    n = workers or os.cpu_count() or 1
    cap = os.environ.get("SKELMATCH_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"SKELMATCH_THREADS must be an integer, got {cap!r}", "config-invalid") from None
    return max(1, int(n))


def _map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as ex:
        return list(ex.map(fn, items))


def _summary(accs):
    accs = np.asarray(accs, dtype=np.float64)
    n = accs.size
    mean = float(accs.mean())
    ci = 1.96 * float(accs.std(ddof=1)) / math.sqrt(n) if n > 1 else 0.0
    return mean, ci


def evaluate_protocol1(dataset, split, spec=None, strategy=None, n_episodes=1000,
                       shuffle_labels=False, workers=1, scorer=None):
    """Mean accuracy over random episodes on ``split.test_classes``.

    The 95% interval is ``1.96 * std / sqrt(n_episodes)`` over per-episode
    accuracies. ``shuffle_labels`` gives the chance-level control.
    """
    spec = spec or EpisodeSpec()
    strategy = strategy or MatchStrategy()
    if n_episodes < 1:
        raise ConfigError("n_episodes must be >= 1", "config-invalid")
    if scorer is None:
        # every sample can be query and support, so score unordered pairs once
        scorer = PairScorer(dataset, strategy, symmetric=True)
    pool = dataset.by_class(set(split.test_classes))
    episodes = [sample_episode(pool, spec, i, split.test_classes) for i in range(n_episodes)]
    results = _map(lambda ep: _run_episode(ep, scorer, shuffle_labels, spec.seed), episodes,
                   resolve_workers(workers))
    mean, ci = _summary([r.accuracy for r in results])
    return {
        "protocol": 1,
        "split": split.name,
        "strategy": strategy.kind,
        "n_way": spec.n_way,
        "k_shot": spec.k_shot,
        "n_query": spec.n_query,
        "seed": spec.seed,
        "shuffle_labels": bool(shuffle_labels),
        "n_episodes": n_episodes,
        "accuracy": mean,
        "ci95": ci,
        "episodes": [r.to_dict() for r in results],
    }


def evaluate_protocol2(dataset, split, strategy=None, workers=1, scorer=None):
    """Classify every non-exemplar novel-class sample against the exemplar gallery."""
    strategy = strategy or MatchStrategy()
    if not split.exemplar_ids:
        raise ConfigError(f"split {split.name!r} has no exemplar_ids", "config-invalid")
    gallery = {}
    for eid in split.exemplar_ids:
        if eid not in dataset:
            raise SamplingError(f"exemplar {eid!r} is not in the dataset", "missing-exemplar")
        gallery[dataset.label(eid)] = eid
    exemplars = set(split.exemplar_ids)
    test = set(split.test_classes)
    queries = [(s.id, s.label) for s in sorted(dataset.samples, key=lambda s: s.id)
               if s.label in test and s.id not in exemplars]
    if not queries:
        raise SamplingError("no test samples besides the exemplars", "empty-evaluation")
    if scorer is None:
        scorer = PairScorer(dataset, strategy)

    def one(q):
        pred, scores = classify_query(q[0], gallery, score_fn=scorer)
        return pred, scores

    out = _map(one, queries, resolve_workers(workers))
    classes = sorted(gallery)
    index = {a: k for k, a in enumerate(classes)}
    labels = sorted(set(classes) | {t for _, t in queries})
    row = {a: k for k, a in enumerate(labels)}
    confusion = np.zeros((len(labels), len(classes)), dtype=np.int64)
    rows = []
    for (qid, true), (pred, scores) in zip(queries, out):
        confusion[row[true], index[pred]] += 1
        rows.append({"id": qid, "true": true, "pred": pred, "scores": [scores[a] for a in classes]})
    correct = sum(r["true"] == r["pred"] for r in rows)
    per_class = {}
    for a in labels:
        n = int(confusion[row[a]].sum())
        if n:
            per_class[str(a)] = float(confusion[row[a], index[a]] / n) if a in index else 0.0
    return {
        "protocol": 2,
        "split": split.name,
        "strategy": strategy.kind,
        "n_classes": len(classes),
        "gallery": {str(a): gallery[a] for a in classes},
        "n_queries": len(rows),
        "accuracy": correct / len(rows),
        "per_class_accuracy": per_class,
        "confusion": {"rows": labels, "cols": classes, "matrix": confusion.tolist()},
        "queries": rows,
    }


def reduced_training_report(split, class_counts=(20, 40, 60, 80, 100), seed=0):
    """Nested training-class subsets for data-efficiency studies.

    One random ordering of ``split.train_classes`` is drawn from ``seed``;
    the subset of size ``k`` is its first ``k`` classes, so smaller subsets
    are contained in larger ones.
    """
    train = list(split.train_classes)
    for k in class_counts:
        if k < 1 or k > len(train):
            raise ConfigError(
                f"count {k} outside 1..{len(train)} training classes of {split.name!r}", "count-too-large"
            )
    order = np.random.default_rng(seed).permutation(len(train))
    out = []
    for k in class_counts:
        keep = tuple(sorted(train[i] for i in order[:k]))
        meta = dict(split.metadata, parent=split.name, n_train=int(k), seed=int(seed))
        out.append(type(split)(f"{split.name}-train{k}", keep, split.test_classes, split.exemplar_ids, meta))
    return out


def report_to_json(report):
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


SUMMARY_FIELDS = ("strategy", "protocol", "accuracy", "ci95", "n_episodes")


def summary_csv(reports):
    """CSV summary rows, one per report."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, SUMMARY_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow({
            "strategy": r["strategy"],
            "protocol": r["protocol"],
            "accuracy": repr(float(r["accuracy"])),
            "ci95": repr(float(r.get("ci95", 0.0))),
            "n_episodes": r.get("n_episodes", r.get("n_queries")),
        })
    return buf.getvalue()
