"""Homogeneous norm and distance on a Carnot group.

Group operations stay exact; rounding happens only when a layer norm is
taken.  Sampling helpers produce exact dyadic points so that sampled data can
be fed back into the exact group law.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .algebra import CarnotAlgebra, GradedVector, dilate
from .bch import BCHEngine

_DYADIC = 2**24


class HomogeneousMetric:
    """||x|| = sum_i |x_i|^(1/i) with a Euclidean (default) or max norm per layer."""

    def __init__(self, algebra: CarnotAlgebra, layer_norm: str = "euclidean", engine: BCHEngine | None = None):
        if layer_norm not in ("euclidean", "max"):
            raise ValueError("layer_norm must be 'euclidean' or 'max'")
        self.algebra = algebra
        self.layer_norm = layer_norm
        self.engine = engine or BCHEngine(algebra)
        self._slices = [slice(algebra.offsets[i], algebra.offsets[i] + d) for i, d in enumerate(algebra.layer_dims)]

    def _layer(self, arr: np.ndarray) -> np.ndarray:
        if self.layer_norm == "max":
            return np.max(np.abs(arr), axis=-1) if arr.shape[-1] else np.zeros(arr.shape[:-1])
        return np.linalg.norm(arr, axis=-1)

    def norm_array(self, X: np.ndarray) -> np.ndarray:
        """Row-wise norm of a float array of points."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        total = np.zeros(X.shape[0])
        for i, sl in enumerate(self._slices, start=1):
            total += self._layer(X[:, sl]) ** (1.0 / i)
        return total

    def norm(self, x: GradedVector) -> float:
        self.algebra.check(x)
        if x.is_zero():
            return 0.0
        return float(self.norm_array(x.as_float())[0])

    def distance(self, x: GradedVector, y: GradedVector) -> float:
        return self.norm(self.engine.product(-x, y))

    def distance_array(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return self.norm_array(self.engine.product_float(-np.asarray(X, float), Y))


def homogeneous_norm(m: HomogeneousMetric, x: GradedVector) -> float:
    return m.norm(x)


def distance(m: HomogeneousMetric, x: GradedVector, y: GradedVector) -> float:
    return m.distance(x, y)


def verify_homogeneity(m: HomogeneousMetric, t, x: GradedVector, y: GradedVector, tol: float = 1e-9) -> bool:
    """|d(λ_t x, λ_t y) - t d(x, y)| <= tol * t * d(x, y)."""
    t = Fraction(t)
    if t <= 0:
        raise ValueError("t must be positive")
    a = m.algebra
    lhs = m.distance(dilate(a, t, x), dilate(a, t, y))
    rhs = float(t) * m.distance(x, y)
    return abs(lhs - rhs) <= tol * rhs


# ---------------------------------------------------------------------------
# sampling


def _truncate(v: float) -> Fraction:
    return Fraction(math.trunc(v * _DYADIC), _DYADIC)


def _raw_ball(m: HomogeneousMetric, radius: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """Dyadic float points with ||xi|| <= radius, layer budgets split by a Dirichlet draw."""
    a = m.algebra
    r = a.step
    w = rng.dirichlet(np.ones(r + 1), size=count)[:, :r]
    out = np.zeros((count, a.dim))
    for i, sl in enumerate(m._slices, start=1):
        d = a.layer_dims[i - 1]
        g = rng.standard_normal((count, d))
        if m.layer_norm == "max":
            u = g / np.max(np.abs(g), axis=1, keepdims=True)
        else:
            u = g / np.linalg.norm(g, axis=1, keepdims=True)
        out[:, sl] = u * ((radius * w[:, i - 1]) ** i)[:, None]
    # truncation toward zero shrinks every layer norm
    return np.trunc(out * _DYADIC) / _DYADIC


def ball_sample(m: HomogeneousMetric, center: GradedVector, radius, count: int, seed: int = 0) -> list[GradedVector]:
    """Exact points center * xi with ||xi|| <= radius; deterministic in ``seed``."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if count <= 0:
        return []
    rng = np.random.default_rng([seed, 0])
    raw = _raw_ball(m, float(radius), count, rng)
    out = []
    for row in raw:
        xi = GradedVector(tuple(_truncate(v) for v in row))
        out.append(m.engine.product(center, xi))
    return out


def ball_sample_array(m: HomogeneousMetric, radius: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """Float counterpart of :func:`ball_sample` centered at 0."""
    return _raw_ball(m, float(radius), count, rng)


def quasi_triangle_estimate(m: HomogeneousMetric, n_samples: int, radius: float = 1.0, seed: int = 0) -> float:
    """Max over sampled triples of d(x, z) / (d(x, y) + d(y, z))."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = np.random.default_rng([seed, 1])
    pts = [ball_sample_array(m, radius, n_samples, rng) for _ in range(3)]
    x, y, z = pts
    dxz = m.distance_array(x, z)
    denom = m.distance_array(x, y) + m.distance_array(y, z)
    ok = denom > 0
    if not ok.any():
        return 0.0
    return float(np.max(dxz[ok] / denom[ok]))
