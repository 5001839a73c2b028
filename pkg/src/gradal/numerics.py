"""Shared numeric kernels: seeded RNG streams, Student-t tail, PCA, norms.

Matrices throughout the package are plain two-dimensional float64 numpy
arrays. The ``Rng`` wrapper exists so that every random draw in an
experiment is addressed by ``(seed, label)`` and is therefore reproducible
bit-for-bit regardless of call order anywhere else in the program.
"""

import hashlib
import math

import numpy as np


class Rng:
    """Deterministic random stream keyed by a 64-bit seed and a text label.

    The underlying generator is Philox (counter-based), keyed with a
    SHA-256 hash of ``(seed, label)``. Two instances built with the same
    seed and label emit identical sequences on any platform, and derived
    sub-streams are independent of how much the parent has been consumed.
    """

    def __init__(self, seed: int, label: str = "root"):
        self.seed = int(seed)
        self.label = label
        digest = hashlib.sha256(f"{self.seed}\x1f{label}".encode()).digest()
        key = int.from_bytes(digest[:16], "little")
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def derive(self, label: str) -> "Rng":
        """Fresh child stream for ``label``; does not consume this stream."""
        return Rng(self.seed, f"{self.label}/{label}")

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n, size=None, replace=True, p=None):
        return self._gen.choice(n, size=size, replace=replace, p=p)

    def __repr__(self):
        return f"Rng(seed={self.seed}, label={self.label!r})"


def derive_seed(seed: int, *labels) -> int:
    """Stable non-negative 63-bit integer from a seed and a label path."""
    text = "/".join([str(int(seed))] + [str(part) for part in labels])
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def l2_norm(v) -> float:
    """Euclidean norm of a vector; zero exactly when the vector is zero."""
    return float(np.linalg.norm(np.asarray(v, dtype=float)))


def _beta_cf(a: float, b: float, x: float) -> float:
    # Continued fraction for the incomplete beta (modified Lentz).
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-12:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) via continued fraction, accurate to ~1e-10."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def student_t_sf(t_stat: float, dof: int) -> float:
    """Two-sided tail probability P(|T_dof| >= |t_stat|).

    Uses the identity P(|T| >= t) = I_x(dof/2, 1/2) with
    x = dof / (dof + t^2).
    """
    t_stat = float(t_stat)
    if not math.isfinite(t_stat):
        raise ValueError("invalid statistic")
    dof = int(dof)
    if dof < 1:
        raise ValueError("dof must be >= 1")
    if t_stat == 0.0:
        return 1.0
    x = dof / (dof + t_stat * t_stat)
    p = regularized_incomplete_beta(0.5 * dof, 0.5, x)
    return min(max(p, 0.0), 1.0)


def pca_project(points: np.ndarray, dims: int) -> np.ndarray:
    """Project mean-centered rows onto the top ``dims`` principal components.

    Components are ordered by descending eigenvalue of the sample
    covariance, and each component's sign is fixed so its
    largest-magnitude loading is positive. Data whose rows are all
    identical projects to the zero matrix.

    Args:
        points: (n, d) matrix, n >= 2.
        dims: number of components, 1 <= dims <= min(n, d).

    Returns:
        (n, dims) matrix of component scores.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-D matrix")
    n, d = pts.shape
    if n < 2:
        raise ValueError("need at least 2 rows")
    if not 1 <= dims <= min(n, d):
        raise ValueError(f"dims must be in [1, {min(n, d)}], got {dims}")
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:dims]
    components = eigvecs[:, order]
    for j in range(components.shape[1]):
        k = int(np.argmax(np.abs(components[:, j])))
        if components[k, j] < 0:
            components[:, j] = -components[:, j]
    return centered @ components
