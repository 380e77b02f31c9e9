"""Skeleton sequences, feature maps and the raw ingestion path.

Coordinates are stored as ``(T, M, J, 3)`` arrays (frames, bodies, joints,
xyz).  Feature maps are ``(C, N, T)`` arrays, the layout every matching
routine consumes.
"""

import json
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, SkeletonParseError

NTU_JOINTS = 25
SPINE_BASE = 0  # joint 1 in the 1-based NTU numbering

_NTU_LABEL = re.compile(r"A(\d+)$")
_PKU_LABEL = re.compile(r"A_?(\d+)$")


@dataclass(eq=False)
class SkeletonSequence:
    coords: np.ndarray
    present: np.ndarray = None
    label: int = None
    source_id: str = ""

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.coords.ndim != 4 or self.coords.shape[-1] != 3:
            raise ShapeError(f"coords must be (T, M, J, 3), got {self.coords.shape}")
        if self.coords.shape[0] < 1 or self.coords.shape[1] < 1:
            raise ShapeError("sequence needs at least one frame and one body")
        if not np.all(np.isfinite(self.coords)):
            raise ShapeError("non-finite joint coordinates")
        if self.present is None:
            self.present = np.ones(self.coords.shape[:2], dtype=bool)
        else:
            self.present = np.asarray(self.present, dtype=bool)
            if self.present.shape != self.coords.shape[:2]:
                raise ShapeError("present mask must be (T, M)")

    @property
    def n_frames(self):
        return self.coords.shape[0]

    @property
    def n_bodies(self):
        return self.coords.shape[1]

    @property
    def n_joints(self):
        return self.coords.shape[2]


@dataclass(eq=False)
class FeatureMap:
    """A ``C x N x T`` feature tensor tagged with its pyramid position."""

    data: np.ndarray
    spatial_scale: int = 1
    temporal_scale: int = 1
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.dtype not in (np.float32, np.float64):
            data = data.astype(np.float64)
        if data.ndim != 3:
            raise ShapeError(f"feature map must be 3-D (C, N, T), got shape {data.shape}")
        if min(data.shape) < 1:
            raise ShapeError(f"empty feature map {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ShapeError("feature map contains non-finite values")
        if self.spatial_scale not in (1, 2, 3) or self.temporal_scale not in (1, 2, 3):
            raise ShapeError(
                f"scales must be in 1..3, got ({self.spatial_scale}, {self.temporal_scale})"
            )
        self.data = np.ascontiguousarray(data)

    @property
    def shape(self):
        return self.data.shape

    @property
    def C(self):
        return self.data.shape[0]

    @property
    def N(self):
        return self.data.shape[1]

    @property
    def T(self):
        return self.data.shape[2]

    def nodes(self):
        """Flatten to an ``(N*T, C)`` array of local feature vectors."""
        return self.data.reshape(self.C, -1).T.astype(np.float64)


def label_from_id(source_id):
    """Action class encoded in an NTU (``...A013``) or PKU (``0002-L_A_11``) id."""
    stem = os.path.splitext(os.path.basename(source_id))[0]
    m = _NTU_LABEL.search(stem) or _PKU_LABEL.search(stem)
    return int(m.group(1)) if m else None


def _read_text(source):
    if isinstance(source, bytes):
        return source.decode("utf-8"), None
    if isinstance(source, str) and "\n" not in source and os.path.exists(source):
        with open(source, "rb") as f:
            return f.read().decode("utf-8"), source
    if isinstance(source, os.PathLike):
        with open(source, "rb") as f:
            return f.read().decode("utf-8"), os.fspath(source)
    if hasattr(source, "read"):
        raw = source.read()
        return (raw.decode("utf-8") if isinstance(raw, bytes) else raw), getattr(source, "name", None)
    return source, None


def parse_ntu_skeleton(source, source_id=None):
    """Parse the NTU RGB+D ``.skeleton`` text layout.

    Only the first three fields of each joint line (x, y, z) are kept.
    Frames without bodies are dropped; bodies missing from a frame are
    zero-filled and flagged in ``present``.

    ``source`` may be a path, bytes, text, or a readable file object.
    """
    text, path = _read_text(source)
    if source_id is None:
        source_id = os.path.splitext(os.path.basename(path))[0] if path else ""
    lines = text.splitlines()
    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines):
            raise SkeletonParseError("unexpected end of file", "truncated-file", pos + 1)
        pos += 1
        return lines[pos - 1], pos

    def read_count(what):
        line, lineno = next_line()
        fields = line.split()
        try:
            if len(fields) != 1:
                raise ValueError
            n = int(fields[0])
        except ValueError:
            raise SkeletonParseError(
                f"expected {what} count, got {line.strip()!r}", "malformed-header", lineno
            ) from None
        if n < 0:
            raise SkeletonParseError(f"negative {what} count", "malformed-header", lineno)
        return n

    n_frames = read_count("frame")
    frames = []
    n_joints = None
    for _ in range(n_frames):
        n_bodies = read_count("body")
        bodies = []
        for _ in range(n_bodies):
            header, lineno = next_line()
            if len(header.split()) < 2:
                raise SkeletonParseError(
                    f"malformed body header {header.strip()!r}", "malformed-header", lineno
                )
            nj = read_count("joint")
            if n_joints is None:
                n_joints = nj
            elif nj != n_joints:
                raise SkeletonParseError(
                    f"joint count {nj} differs from earlier {n_joints}", "malformed-header", pos
                )
            joints = np.empty((nj, 3))
            for k in range(nj):
                line, lineno = next_line()
                fields = line.split()
                try:
                    if len(fields) < 3:
                        raise ValueError
                    joints[k] = [float(v) for v in fields[:3]]
                except ValueError:
                    raise SkeletonParseError(
                        f"non-numeric joint field in {line.strip()!r}", "non-numeric-field", lineno
                    ) from None
                if not np.all(np.isfinite(joints[k])):
                    raise SkeletonParseError("non-finite joint coordinate", "non-numeric-field", lineno)
            bodies.append(joints)
        if bodies:
            frames.append(bodies)

    if not frames:
        raise SkeletonParseError(f"no frame with a body in {source_id or 'input'}", "empty-after-cleaning")
    return _assemble(frames, n_joints, label_from_id(source_id) if source_id else None, source_id)


def _assemble(frames, n_joints, label, source_id):
    n_bodies = max(len(b) for b in frames)
    coords = np.zeros((len(frames), n_bodies, n_joints, 3))
    present = np.zeros((len(frames), n_bodies), dtype=bool)
    for t, bodies in enumerate(frames):
        for m, joints in enumerate(bodies):
            coords[t, m] = joints
            present[t, m] = True
    return SkeletonSequence(coords, present, label, source_id)


def parse_json_sequence(source, source_id=None):
    """Parse ``{"frames": [[[x, y, z] * N] * M] * T, "label": int}``."""
    text, path = _read_text(source)
    if source_id is None:
        source_id = os.path.splitext(os.path.basename(path))[0] if path else ""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SkeletonParseError(str(exc), "malformed-header", exc.lineno) from None
    if not isinstance(doc, dict) or "frames" not in doc:
        raise SkeletonParseError("missing 'frames' key", "malformed-header")
    frames = []
    n_joints = None
    for t, bodies in enumerate(doc["frames"]):
        parsed = []
        for body in bodies:
            try:
                joints = np.asarray(body, dtype=np.float64)
            except (TypeError, ValueError):
                raise SkeletonParseError(f"frame {t}: non-numeric joint", "non-numeric-field") from None
            if joints.ndim != 2 or joints.shape[1] != 3:
                raise SkeletonParseError(f"frame {t}: joints must be [x, y, z] triples", "malformed-header")
            if n_joints is None:
                n_joints = joints.shape[0]
            elif joints.shape[0] != n_joints:
                raise SkeletonParseError(f"frame {t}: inconsistent joint count", "malformed-header")
            if not np.all(np.isfinite(joints)):
                raise SkeletonParseError(f"frame {t}: non-finite coordinate", "non-numeric-field")
            parsed.append(joints)
        if parsed:
            frames.append(parsed)
    if not frames:
        raise SkeletonParseError("no frame with a body", "empty-after-cleaning")
    label = doc.get("label")
    if label is None and source_id:
        label = label_from_id(source_id)
    return _assemble(frames, n_joints, None if label is None else int(label), source_id)


def sequence_to_json(seq):
    frames = []
    for t in range(seq.n_frames):
        frames.append([seq.coords[t, m].tolist() for m in range(seq.n_bodies) if seq.present[t, m]])
    doc = {"frames": frames}
    if seq.label is not None:
        doc["label"] = int(seq.label)
    return json.dumps(doc)


def load_sequence(path):
    """Dispatch on extension: ``.json`` or NTU ``.skeleton`` text."""
    if str(path).lower().endswith(".json"):
        return parse_json_sequence(path)
    return parse_ntu_skeleton(path)


def _body_variance(seq, m):
    mask = seq.present[:, m]
    if mask.sum() < 2:
        return 0.0
    return float(seq.coords[mask, m].var(axis=0).sum())


def select_bodies(seq, mode="primary"):
    """Keep the most active body (``primary``) or the two most active (``both``).

    Activity is the total per-coordinate variance over the frames in which
    the body is present. Ties go to the lower body index.
    """
    if mode not in ("primary", "both"):
        raise ValueError(f"unknown body mode {mode!r}")
    variances = [_body_variance(seq, m) for m in range(seq.n_bodies)]
    # stable sort on -variance keeps lower index first among ties
    order = sorted(range(seq.n_bodies), key=lambda m: -variances[m])
    keep = order[: 1 if mode == "primary" else 2]
    coords = seq.coords[:, keep]
    present = seq.present[:, keep]
    if mode == "both" and len(keep) == 1:
        coords = np.concatenate([coords, np.zeros_like(coords)], axis=1)
        present = np.concatenate([present, np.zeros_like(present)], axis=1)
    return SkeletonSequence(coords.copy(), present.copy(), seq.label, seq.source_id)


def resample_frames(seq, T=32):
    """Linearly interpolate onto ``T`` frames spanning the first..last frame."""
    if T < 4 or T % 4:
        raise ShapeError(f"target length must be a positive multiple of 4, got {T}", "invalid-target-length")
    n = seq.n_frames
    if n == 1:
        coords = np.repeat(seq.coords, T, axis=0)
        present = np.repeat(seq.present, T, axis=0)
        return SkeletonSequence(coords, present, seq.label, seq.source_id)
    pos = np.linspace(0.0, n - 1, T)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, n - 1)
    w = (pos - lo)[:, None, None, None]
    coords = (1.0 - w) * seq.coords[lo] + w * seq.coords[hi]
    present = seq.present[lo] & (seq.present[hi] | (pos == lo)[:, None])
    return SkeletonSequence(coords, present, seq.label, seq.source_id)


def raw_features(seq, center=True):
    """Coordinates as a ``C=3`` feature map at scale (1, 1).

    Bodies are laid out consecutively along the node axis, so a two-body
    sequence yields ``N = 2 * J``. Centering subtracts the first body's
    spine base in every frame; absent bodies stay at zero.
    """
    coords = seq.coords
    if center:
        origin = coords[:, 0, SPINE_BASE, :]
        coords = np.where(seq.present[:, :, None, None], coords - origin[:, None, None, :], 0.0)
    T, M, J, _ = coords.shape
    data = coords.reshape(T, M * J, 3).transpose(2, 1, 0)
    return FeatureMap(np.ascontiguousarray(data), 1, 1, {"source_id": seq.source_id, "label": seq.label})


def sequence_features(seq, T=32, center=True, bodies="primary"):
    """The default ingestion chain: select bodies, resample, lay out as features."""
    return raw_features(resample_frames(select_bodies(seq, bodies), T), center)
