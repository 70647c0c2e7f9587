"""Shared numerical substrate: 3-vectors, Gauss-Legendre quadrature in one
and three dimensions, and reproducible counter-based random streams."""

from __future__ import annotations

import functools

import numpy as np

__all__ = [
    "vec3",
    "norm",
    "unit",
    "require_unit",
    "angle_between",
    "gauss_legendre",
    "quad_1d",
    "quad_3d",
    "RngStream",
]

UNIT_TOL = 1e-12


def vec3(x: float, y: float, z: float) -> np.ndarray:
    """Build a finite 3-vector as a float64 array."""
    v = np.array([x, y, z], dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"vector components must be finite, got {v}")
    return v


def norm(v) -> float:
    return float(np.sqrt(np.dot(v, v)))


def unit(v) -> np.ndarray:
    """Normalize ``v`` to unit length."""
    v = np.asarray(v, dtype=float)
    n = norm(v)
    if n == 0.0 or not np.isfinite(n):
        raise ValueError(f"cannot normalize vector with norm {n}")
    return v / n


def require_unit(v, tol: float = UNIT_TOL) -> np.ndarray:
    """Validate that ``v`` has unit norm within ``tol`` and return it."""
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    n = norm(v)
    if abs(n - 1.0) > tol:
        raise ValueError(f"expected a unit vector, got norm {n!r}")
    return v


def angle_between(u, v) -> float:
    """Angle in [0, pi] between two unit vectors.

    The dot product is clamped to [-1, 1] before the arccos so that rounding
    just outside the interval cannot produce a NaN.
    """
    u = require_unit(u)
    v = require_unit(v)
    d = float(np.dot(u, v))
    if d > 1.0:
        d = 1.0
    elif d < -1.0:
        d = -1.0
    return float(np.arccos(d))


@functools.lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1]."""
    if n < 2:
        raise ValueError(f"need at least 2 quadrature nodes, got {n}")
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def quad_1d(f, lo: float, hi: float, n: int) -> float:
    """Gauss-Legendre estimate of the integral of ``f`` over [lo, hi].

    Exact to rounding for polynomials of degree <= 2n - 1.  For analytic
    integrands the error decays geometrically in n, so doubling n roughly
    squares the error until rounding dominates.
    """
    x, w = gauss_legendre(n)
    mid = 0.5 * (hi + lo)
    half = 0.5 * (hi - lo)
    total = 0.0
    for xi, wi in zip(x, w):
        t = mid + half * xi
        val = f(t)
        if not np.isfinite(val):
            raise ValueError(f"integrand returned non-finite value {val!r} at x={t!r}")
        total += wi * val
    return half * total


def quad_3d(f, half_width: float, n_per_axis: int, vectorized: bool = False) -> complex:
    """Tensor-product Gauss-Legendre estimate of a complex volume integral.

    Integrates ``f`` over the cube [-half_width, half_width]^3; the integrand
    must decay inside the cube.  By default ``f`` maps one 3-vector to one
    complex value.  With ``vectorized=True`` it receives an (m, 3) array of
    points and must return m values, which is much faster for large grids.
    """
    if half_width <= 0.0:
        raise ValueError(f"half_width must be positive, got {half_width}")
    x, w = gauss_legendre(n_per_axis)
    x = half_width * x
    w = half_width * w
    gx, gy, gz = np.meshgrid(x, x, x, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    wts = (w[:, None, None] * w[None, :, None] * w[None, None, :]).ravel()
    if vectorized:
        vals = np.asarray(f(pts), dtype=complex)
        if vals.shape != (len(pts),):
            raise ValueError(f"vectorized integrand returned shape {vals.shape}, expected ({len(pts)},)")
    else:
        vals = np.fromiter((complex(f(p)) for p in pts), dtype=complex, count=len(pts))
    bad = ~np.isfinite(vals)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ValueError(f"integrand returned non-finite value {vals[i]!r} at R={pts[i]}")
    return complex(np.dot(wts, vals))


class RngStream:
    """Reproducible random stream keyed by (seed, stream_id).

    Backed by the counter-based Philox generator, so equal keys give
    bitwise-equal draw sequences on every platform.  Streams are meant to be
    single-owner: give each logical trial or configuration its own stream_id
    instead of sharing one stream across threads.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) % 2**64
        self.stream_id = int(stream_id) % 2**64
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def substream(self, stream_id: int) -> "RngStream":
        """Fresh stream with the same seed and a different stream id."""
        return RngStream(self.seed, stream_id)

    def uniform(self, size=None):
        """Uniform draws from [0, 1)."""
        return self._gen.uniform(size=size)

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size=size)

    def poisson(self, lam: float) -> int:
        return int(self._gen.poisson(lam))
