"""Multi-spatial and multi-temporal feature pyramids built by average pooling.

Spatial scales: 25 joints -> 10 parts -> 6 super-parts. Temporal scales:
T -> T/2 -> T/4 frames via stride-2 averaging.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .skeleton import FeatureMap

# (name, 1-based joint numbers) exactly as tabulated for the NTU/PKU 25-joint layout
PART_TABLE = (
    ("Neck", (3, 4, 21)),
    ("Trunk", (1, 2, 5, 9, 13, 17)),
    ("Right arm", (9, 10, 11)),
    ("Right hand", (12, 24, 25)),
    ("Left arm", (5, 6, 7)),
    ("Left hand", (8, 22, 23)),
    ("Right leg", (17, 18, 19)),
    ("Right foot", (19, 20)),
    ("Left leg", (13, 14, 15)),
    ("Left foot", (15, 16)),
)

# (name, 1-based part numbers, 1-based joint numbers)
SUPER_PART_TABLE = (
    ("Neck", (1,), (3, 4, 21)),
    ("Trunk", (2,), (1, 2, 5, 9, 13, 17)),
    ("Right upper limb", (3, 4), (9, 10, 11, 12, 24, 25)),
    ("Left upper limb", (5, 6), (5, 6, 7, 8, 22, 23)),
    ("Right lower limb", (7, 8), (17, 18, 19, 20)),
    ("Left lower limb", (9, 10), (13, 14, 15, 16)),
)


@dataclass(frozen=True)
class PoolingSpec:
    """Groups of finer-scale node indices (0-based) averaged into coarse nodes.

    Groups may overlap; a node contributes fully to every group listing it.
    """

    name: str
    n_inputs: int
    groups: tuple

    def __post_init__(self):
        groups = tuple((str(g), tuple(int(i) for i in members)) for g, members in self.groups)
        object.__setattr__(self, "groups", groups)
        if not groups:
            raise ShapeError(f"pooling spec {self.name!r} has no groups")
        for g, members in groups:
            if not members:
                raise ShapeError(f"group {g!r} is empty")
            bad = [i for i in members if not 0 <= i < self.n_inputs]
            if bad:
                raise ShapeError(f"group {g!r} has indices {bad} outside 0..{self.n_inputs - 1}")

    @property
    def n_outputs(self):
        return len(self.groups)

    def group(self, name):
        for g, members in self.groups:
            if g == name:
                return members
        raise KeyError(name)

    def matrix(self):
        """``(n_outputs, n_inputs)`` averaging matrix."""
        w = np.zeros((self.n_outputs, self.n_inputs))
        for k, (_, members) in enumerate(self.groups):
            for i in members:
                w[k, i] += 1.0
            w[k] /= len(members)
        return w

    def replicate(self, n_bodies):
        """The same grouping applied independently to each body's node block."""
        if n_bodies == 1:
            return self
        groups = []
        for b in range(n_bodies):
            suffix = "" if b == 0 else f" (body {b + 1})"
            off = b * self.n_inputs
            groups += [(g + suffix, tuple(i + off for i in m)) for g, m in self.groups]
        return PoolingSpec(f"{self.name} x{n_bodies}", self.n_inputs * n_bodies, tuple(groups))

    def to_json(self, index_base=0):
        return json.dumps(
            {
                "name": self.name,
                "n_inputs": self.n_inputs,
                "index_base": index_base,
                "groups": {g: [i + index_base for i in m] for g, m in self.groups},
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        base = int(doc.get("index_base", 0))
        groups = tuple((g, [i - base for i in m]) for g, m in doc["groups"].items())
        return cls(doc.get("name", "custom"), int(doc["n_inputs"]), groups)


def builtin_spatial_specs():
    """Joint->part and part->super-part specs for the 25-joint skeleton."""
    parts = PoolingSpec("joints->parts", 25, tuple((n, [j - 1 for j in js]) for n, js in PART_TABLE))
    supers = PoolingSpec(
        "parts->super-parts", 10, tuple((n, [p - 1 for p in ps]) for n, ps, _ in SUPER_PART_TABLE)
    )
    return parts, supers


def spatial_pool(fmap, spec):
    if fmap.N != spec.n_inputs:
        raise ShapeError(
            f"spec {spec.name!r} expects {spec.n_inputs} nodes, map has {fmap.N}", "spec-shape-mismatch"
        )
    if fmap.spatial_scale >= 3:
        raise ShapeError("map is already at the coarsest spatial scale", "spec-shape-mismatch")
    data = fmap.data.astype(np.float64, copy=False)
    out = np.empty((fmap.C, spec.n_outputs, fmap.T))
    for k, (_, members) in enumerate(spec.groups):
        out[:, k, :] = data[:, list(members), :].mean(axis=1)
    return FeatureMap(out, fmap.spatial_scale + 1, fmap.temporal_scale, dict(fmap.meta))


def temporal_pool(fmap):
    """Average adjacent frame pairs (window 2, stride 2).

    Odd lengths replicate the last frame first, so nothing is dropped.
    """
    if fmap.T < 2:
        raise ShapeError(f"need at least 2 frames to pool, got {fmap.T}", "too-short")
    if fmap.temporal_scale >= 3:
        raise ShapeError("map is already at the coarsest temporal scale", "too-short")
    data = fmap.data.astype(np.float64, copy=False)
    if fmap.T % 2:
        data = np.concatenate([data, data[:, :, -1:]], axis=2)
    out = data.reshape(fmap.C, fmap.N, -1, 2).mean(axis=3)
    return FeatureMap(out, fmap.spatial_scale, fmap.temporal_scale + 1, dict(fmap.meta))


LEVELS = ("s1", "s2", "s3", "t1", "t2", "t3")


@dataclass(eq=False)
class ScalePyramid:
    """Feature maps at spatial scales s1..s3 and temporal scales t1..t3.

    ``s1`` and ``t1`` are the same object.
    """

    s1: FeatureMap
    s2: FeatureMap
    s3: FeatureMap
    t2: FeatureMap
    t3: FeatureMap
    source_id: str = ""

    def __post_init__(self):
        s1, s2, s3, t2, t3 = self.s1, self.s2, self.s3, self.t2, self.t3
        c = s1.C
        for name, m in (("s2", s2), ("s3", s3), ("t2", t2), ("t3", t3)):
            if m.C != c:
                raise ShapeError(f"level {name}: {m.C} channels, s1 has {c}", "shape-mismatch")
        for name, m in (("s2", s2), ("s3", s3)):
            if m.T != s1.T:
                raise ShapeError(f"level {name}: {m.T} frames, s1 has {s1.T}", "shape-mismatch")
        for name, m in (("t2", t2), ("t3", t3)):
            if m.N != s1.N:
                raise ShapeError(f"level {name}: {m.N} nodes, t1 has {s1.N}", "shape-mismatch")
        if t2.T != -(-s1.T // 2) or t3.T != -(-t2.T // 2):
            raise ShapeError(
                f"temporal levels must halve the frame count: {s1.T}, {t2.T}, {t3.T}", "shape-mismatch"
            )

    @property
    def t1(self):
        return self.s1

    @property
    def spatial(self):
        return (self.s1, self.s2, self.s3)

    @property
    def temporal(self):
        return (self.s1, self.t2, self.t3)

    def level(self, name):
        return getattr(self, name)

    def shapes(self):
        return {name: self.level(name).shape for name in LEVELS}

    def node_sets(self):
        """Flattened per-level node sets plus the axis-pooled sets used for
        cross-scale matching. Computed once and cached on the pyramid."""
        cache = self.__dict__.get("_node_cache")
        if cache is None:
            cache = {}
            for name in LEVELS:
                data = self.level(name).data.astype(np.float64, copy=False)
                cache[name] = self.level(name).nodes()
                if name[0] == "s":
                    cache["pool_" + name] = np.ascontiguousarray(data.mean(axis=1).T)
                else:
                    cache["pool_" + name] = np.ascontiguousarray(data.mean(axis=2).T)
            self.__dict__["_node_cache"] = cache
        return cache

    def map_levels(self, fn):
        """New pyramid with ``fn(data)`` applied to every level's array."""
        m = {n: FeatureMap(fn(self.level(n).data), self.level(n).spatial_scale, self.level(n).temporal_scale)
             for n in ("s1", "s2", "s3", "t2", "t3")}
        return ScalePyramid(**m, source_id=self.source_id)


def build_pyramid(fmap, specs=None):
    """Pool a scale-(1, 1) map into the full pyramid.

    A map with ``k * 25`` nodes (k bodies) gets the built-in specs
    replicated per body.
    """
    if (fmap.spatial_scale, fmap.temporal_scale) != (1, 1):
        raise ShapeError("build_pyramid needs a scale-(1, 1) map", "shape-mismatch")
    if specs is None:
        parts, supers = builtin_spatial_specs()
        if fmap.N % parts.n_inputs:
            raise ShapeError(
                f"built-in pooling needs a multiple of {parts.n_inputs} nodes, got {fmap.N}", "spec-shape-mismatch"
            )
        k = fmap.N // parts.n_inputs
        specs = (parts.replicate(k), supers.replicate(k))
    s2 = spatial_pool(fmap, specs[0])
    s3 = spatial_pool(s2, specs[1])
    t2 = temporal_pool(fmap)
    t3 = temporal_pool(t2)
    return ScalePyramid(fmap, s2, s3, t2, t3, fmap.meta.get("source_id", ""))


def pyramid_from_maps(levels, source_id=""):
    """Assemble a pyramid from independently computed per-level maps.

    ``levels`` maps level names to FeatureMaps; ``t1`` may be omitted (it
    is ``s1``) but if given must equal ``s1``.
    """
    missing = [n for n in ("s1", "s2", "s3", "t2", "t3") if n not in levels]
    if missing:
        raise ShapeError(f"missing pyramid levels: {', '.join(missing)}", "shape-mismatch")
    if "t1" in levels and levels["t1"] is not levels["s1"]:
        if levels["t1"].shape != levels["s1"].shape or not np.array_equal(levels["t1"].data, levels["s1"].data):
            raise ShapeError("t1 must be identical to s1", "shape-mismatch")
    return ScalePyramid(levels["s1"], levels["s2"], levels["s3"], levels["t2"], levels["t3"], source_id)


def load_pyramid_dir(path):
    """Read ``s1.stsk, s2.stsk, s3.stsk, t2.stsk, t3.stsk`` from a directory."""
    from .tensorio import read_tensor

    levels = {}
    for name in ("s1", "s2", "s3", "t2", "t3"):
        levels[name] = read_tensor(os.path.join(path, f"{name}.stsk"))
    return pyramid_from_maps(levels, os.path.basename(os.path.normpath(path)))


def save_pyramid_dir(pyr, path, dtype=None):
    from .tensorio import write_tensor

    os.makedirs(path, exist_ok=True)
    for name in ("s1", "s2", "s3", "t2", "t3"):
        write_tensor(pyr.level(name), os.path.join(path, f"{name}.stsk"), dtype)
