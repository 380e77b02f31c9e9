"""Synthetic labelled pyramids with Gaussian feature clusters per class.

Each class ``a`` has a unit centroid ``mu_a`` in ``R^C``; a sample's
feature map puts ``mu_a + sigma * noise`` at every node and frame.
Centroids are redrawn until every pair has cosine at most ``max_cos``.
"""

import os

import numpy as np

from .dataset import Dataset, Sample, write_manifest
from .pyramid import build_pyramid
from .skeleton import FeatureMap
from .splits import SplitDefinition
from .tensorio import write_tensor


def sample_id(index, label):
    return f"SYN{index:04d}A{label:03d}"


def class_centroids(n_classes, C, max_cos=0.5, rng=None, max_tries=1000):
    rng = rng if rng is not None else np.random.default_rng(0)
    for _ in range(max_tries):
        mu = rng.standard_normal((n_classes, C))
        mu /= np.linalg.norm(mu, axis=1, keepdims=True)
        G = mu @ mu.T
        np.fill_diagonal(G, -1.0)
        if G.max() <= max_cos:
            return mu
    raise ValueError(f"no {n_classes} centroids in R^{C} with pairwise cosine <= {max_cos}")


def synthetic_maps(n_classes=5, per_class=16, C=16, N=25, T=32, sigma=0.15, max_cos=0.5,
                   seed=0, exemplar_at_centroid=False):
    """``(id, label, FeatureMap)`` triples, class-major.

    With ``exemplar_at_centroid`` the first sample of each class is the
    noise-free centroid map.
    """
    rng = np.random.default_rng(seed)
    mu = class_centroids(n_classes, C, max_cos, rng)
    out = []
    k = 0
    for a in range(n_classes):
        for j in range(per_class):
            data = np.broadcast_to(mu[a][:, None, None], (C, N, T)).copy()
            if not (exemplar_at_centroid and j == 0):
                data += sigma * rng.standard_normal((C, N, T))
            k += 1
            sid = sample_id(k, a + 1)
            out.append((sid, a + 1, FeatureMap(data, meta={"source_id": sid})))
    return out


def synthetic_dataset(**kw):
    return Dataset.from_pyramids((sid, a, build_pyramid(f)) for sid, a, f in synthetic_maps(**kw))


def synthetic_split(dataset, name="synthetic"):
    """All classes novel; the first sample of each class is its exemplar."""
    by_class = dataset.by_class()
    first = {a: min(ids, key=lambda i: int(i[3:7])) for a, ids in by_class.items()}
    return SplitDefinition(name, (), tuple(by_class), tuple(first[a] for a in sorted(first)),
                           {"generator": "synthetic"})


def write_synthetic(out_dir, **kw):
    """Write ``.stsk`` files, ``manifest.json`` and ``split.json`` under ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for sid, a, fmap in synthetic_maps(**kw):
        write_tensor(fmap, os.path.join(out_dir, sid + ".stsk"))
        entries.append({"id": sid, "label": a, "path": sid + ".stsk"})
    write_manifest(entries, os.path.join(out_dir, "manifest.json"))
    ds = Dataset(Sample(e["id"], e["label"]) for e in entries)
    split = synthetic_split(ds)
    with open(os.path.join(out_dir, "split.json"), "w") as f:
        f.write(split.to_json(indent=2) + "\n")
    return os.path.join(out_dir, "manifest.json"), os.path.join(out_dir, "split.json")
