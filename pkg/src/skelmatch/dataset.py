"""Labelled collections of pyramids, loaded lazily from a manifest.

Manifest format (JSON)::

    {"entries": [{"id": "S001C003P008R001A001", "label": 1, "path": "S001...A001.stsk"},
                 {"id": "x", "label": 2, "levels": {"s1": "x/s1.stsk", ...}}]}

``path`` may point at a scale-1 ``.stsk`` tensor (pooled into a pyramid),
a directory of per-level tensors, or a raw ``.skeleton`` / ``.json``
sequence. Relative paths resolve against the manifest's directory.
"""

import json
import os
import threading
from dataclasses import dataclass

from .errors import ConfigError
from .pyramid import build_pyramid, load_pyramid_dir, pyramid_from_maps
from .skeleton import load_sequence, sequence_features
from .tensorio import read_tensor


@dataclass
class Sample:
    id: str
    label: int
    source: object = None  # path, level dict, or an in-memory ScalePyramid


class Dataset:
    def __init__(self, samples, frames=32, center=True, bodies="primary"):
        self.samples = list(samples)
        self.frames = frames
        self.center = center
        self.bodies = bodies
        self._by_id = {}
        for s in self.samples:
            if s.id in self._by_id:
                raise ConfigError(f"duplicate sample id {s.id!r}", "manifest")
            self._by_id[s.id] = s
        self._pyramids = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self.samples)

    def __contains__(self, sample_id):
        return sample_id in self._by_id

    def __getitem__(self, sample_id):
        return self._by_id[sample_id]

    def ids(self):
        return [s.id for s in self.samples]

    def label(self, sample_id):
        return self._by_id[sample_id].label

    def by_class(self, classes=None):
        """``{label: sorted sample ids}``, optionally restricted to ``classes``."""
        out = {}
        for s in self.samples:
            if classes is None or s.label in classes:
                out.setdefault(s.label, []).append(s.id)
        return {k: sorted(v) for k, v in sorted(out.items())}

    def pyramid(self, sample_id):
        pyr = self._pyramids.get(sample_id)
        if pyr is None:
            pyr = self._load(self._by_id[sample_id])
            with self._lock:
                pyr = self._pyramids.setdefault(sample_id, pyr)
        return pyr

    def _load(self, sample):
        src = sample.source
        if hasattr(src, "node_sets"):
            return src
        if isinstance(src, dict):
            pyr = pyramid_from_maps({k: read_tensor(v) for k, v in src.items()}, sample.id)
        elif os.path.isdir(src):
            pyr = load_pyramid_dir(src)
        elif src.endswith(".stsk"):
            pyr = build_pyramid(read_tensor(src))
        else:
            seq = load_sequence(src)
            pyr = build_pyramid(sequence_features(seq, self.frames, self.center, self.bodies))
        pyr.source_id = sample.id
        return pyr

    @classmethod
    def from_pyramids(cls, items):
        """``items``: iterable of ``(id, label, ScalePyramid)``."""
        return cls(Sample(i, int(lab), p) for i, lab, p in items)

    @classmethod
    def from_manifest(cls, path, **kw):
        try:
            with open(path) as f:
                doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"manifest {path}: {exc}", "manifest") from None
        root = os.path.dirname(os.path.abspath(path))
        samples = []
        for k, e in enumerate(doc.get("entries", [])):
            try:
                sid, label = str(e["id"]), e["label"]
            except KeyError as exc:
                raise ConfigError(f"manifest entry {k} lacks {exc}", "manifest") from None
            if label is None:
                raise ConfigError(f"manifest entry {sid!r} has no label", "manifest")
            if "levels" in e:
                src = {n: os.path.join(root, p) for n, p in e["levels"].items()}
            elif "path" in e:
                src = os.path.join(root, e["path"])
            else:
                raise ConfigError(f"manifest entry {sid!r} has neither path nor levels", "manifest")
            samples.append(Sample(sid, int(label), src))
        return cls(samples, **kw)


def write_manifest(entries, path):
    with open(path, "w") as f:
        json.dump({"entries": entries}, f, indent=2)
        f.write("\n")
