import numpy as np
import pytest

from skelmatch import ot
from skelmatch.pyramid import build_pyramid
from skelmatch.skeleton import FeatureMap

BACKENDS = sorted(ot.BACKENDS)


def ntu_text(n_frames=5, n_bodies=1, n_joints=25, seed=0, empty_frames=()):
    """NTU ``.skeleton`` text with random joints."""
    rng = np.random.default_rng(seed)
    out = [str(n_frames)]
    for t in range(n_frames):
        nb = 0 if t in empty_frames else n_bodies
        out.append(str(nb))
        for b in range(nb):
            out.append(f"7204{b} 0 1 1 1 1 0 0.1 0.2 2")
            out.append(str(n_joints))
            for _ in range(n_joints):
                x, y, z = rng.standard_normal(3)
                out.append(f"{x:.6f} {y:.6f} {z + 3:.6f} 0.1 0.2 300 200 0.1 0.2 0.3 0.9 2")
    return "\n".join(out) + "\n"


def random_fmap(C=4, N=25, T=8, seed=0, shift=0.0):
    rng = np.random.default_rng(seed)
    return FeatureMap(rng.standard_normal((C, N, T)) + shift)


def random_pyramid(C=4, N=25, T=8, seed=0, shift=0.0):
    return build_pyramid(random_fmap(C, N, T, seed, shift))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def consistent_pyramid(C=4, N=25, T=8, seed=0, shift=0.0):
    """Independent random levels whose axis-pooled sets coincide across scales.

    Cross-scale self terms are then exactly 1, so ``MC(X, X) = 4.5``.
    """
    from skelmatch.pyramid import pyramid_from_maps

    rng = np.random.default_rng(seed)
    s1 = rng.standard_normal((C, N, T)) + shift
    s2 = rng.standard_normal((C, 10, T)) + shift
    s3 = rng.standard_normal((C, 6, T)) + shift
    t2 = rng.standard_normal((C, N, T // 2)) + shift
    t3 = rng.standard_normal((C, N, T // 4)) + shift
    s2 += (s1.mean(1) - s2.mean(1))[:, None, :]
    s3 += (s1.mean(1) - s3.mean(1))[:, None, :]
    t2 += (s1.mean(2) - t2.mean(2))[:, :, None]
    t3 += (s1.mean(2) - t3.mean(2))[:, :, None]
    return pyramid_from_maps({
        "s1": FeatureMap(s1), "s2": FeatureMap(s2, 2), "s3": FeatureMap(s3, 3),
        "t2": FeatureMap(t2, 1, 2), "t3": FeatureMap(t3, 1, 3),
    })
