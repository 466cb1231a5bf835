"""Manifold geometry kernels for the block solver.

Five manifold kinds are supported: Euclidean matrix spaces, unit spheres,
Stiefel frames, symmetric positive definite (SPD) matrices under the
affine-invariant metric, and fixed-rank matrices treated as a constraint
set embedded in Euclidean ambient space.

All operations are pure functions of immutable value objects (`Point`,
`TangentVector`, `ProductPoint`).  Stiefel and fixed-rank kinds have no
closed-form exponential/log maps; callers get `UnsupportedKind` instead of
a silent approximation, and `dist` falls back to the ambient Frobenius
distance on those kinds (documented, not geodesic).
"""

from __future__ import annotations

import dataclasses
import math
from typing import Union

import numpy as np
import numpy.linalg as la

# Eigenvalues at or below this are treated as numerically singular in the
# SPD kernels (matrix log/exp/sqrt fail loudly instead of clipping).
EIG_FLOOR = 1e-12

# Relative singular-value cutoff for rank decisions in projections.
RANK_RTOL = 1e-12


class GeometryError(Exception):
    """Base class for geometry kernel failures."""


class UnsupportedKind(GeometryError):
    """The operation has no closed form on this manifold kind."""


class DegenerateInput(GeometryError):
    """Input lies outside the operation's numerical domain."""


# ---------------------------------------------------------------------------
# Manifold kinds


@dataclasses.dataclass(frozen=True)
class Euclidean:
    rows: int
    cols: int


@dataclasses.dataclass(frozen=True)
class Sphere:
    dim: int


@dataclasses.dataclass(frozen=True)
class Stiefel:
    n: int
    k: int


@dataclasses.dataclass(frozen=True)
class SPD:
    n: int


@dataclasses.dataclass(frozen=True)
class FixedRank:
    """Matrices of exactly rank `rank`, a constraint set inside Euclidean
    ambient space rather than a kind with its own geodesic toolkit."""

    rows: int
    cols: int
    rank: int


ManifoldKind = Union[Euclidean, Sphere, Stiefel, SPD, FixedRank]


def ambient_shape(kind: ManifoldKind) -> tuple:
    if isinstance(kind, Euclidean):
        return (kind.rows, kind.cols)
    if isinstance(kind, Sphere):
        return (kind.dim,)
    if isinstance(kind, Stiefel):
        return (kind.n, kind.k)
    if isinstance(kind, SPD):
        return (kind.n, kind.n)
    if isinstance(kind, FixedRank):
        return (kind.rows, kind.cols)
    raise UnsupportedKind(f"unknown manifold kind {kind!r}")


def injectivity_floor(kind: ManifoldKind) -> float:
    """Lower bound r0 on the injectivity radius of the kind.

    Sphere: pi.  Stiefel: 0.89*pi.  Euclidean and SPD are Hadamard
    (infinite).  FixedRank uses its Euclidean ambient value.
    """
    if isinstance(kind, Sphere):
        return math.pi
    if isinstance(kind, Stiefel):
        return 0.89 * math.pi
    if isinstance(kind, (Euclidean, SPD, FixedRank)):
        return math.inf
    raise UnsupportedKind(f"unknown manifold kind {kind!r}")


def r_hat(kind: ManifoldKind) -> float:
    """min{r0, 1}; equals 1 for every supported kind since 0.89*pi > 1."""
    return min(injectivity_floor(kind), 1.0)


# ---------------------------------------------------------------------------
# Value objects


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclasses.dataclass(frozen=True, eq=False)
class Point:
    manifold: ManifoldKind
    data: np.ndarray

    def __post_init__(self):
        arr = _freeze(self.data)
        shape = ambient_shape(self.manifold)
        if arr.shape != shape:
            raise GeometryError(
                f"point shape {arr.shape} does not match {self.manifold!r} "
                f"ambient shape {shape}"
            )
        object.__setattr__(self, "data", arr)


@dataclasses.dataclass(frozen=True, eq=False)
class TangentVector:
    base: Point
    data: np.ndarray

    def __post_init__(self):
        arr = _freeze(self.data)
        if arr.shape != self.base.data.shape:
            raise GeometryError(
                f"tangent shape {arr.shape} does not match base shape "
                f"{self.base.data.shape}"
            )
        object.__setattr__(self, "data", arr)


@dataclasses.dataclass(frozen=True, eq=False)
class ProductPoint:
    """Ordered tuple of per-block points; the solver state."""

    blocks: tuple

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))

    def __len__(self):
        return len(self.blocks)

    def __getitem__(self, i):
        return self.blocks[i]

    def replace(self, i: int, p: Point) -> "ProductPoint":
        blocks = list(self.blocks)
        blocks[i] = p
        return ProductPoint(tuple(blocks))


def _point_like(x: Point, data: np.ndarray) -> Point:
    return Point(x.manifold, data)


def zero_tangent(x: Point) -> TangentVector:
    return TangentVector(x, np.zeros_like(x.data))


# ---------------------------------------------------------------------------
# Small linear-algebra helpers


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _eigh_floor(s: np.ndarray) -> tuple:
    """Eigendecomposition of a symmetric matrix with a positivity floor."""
    w, v = la.eigh(_sym(s))
    if w.min() <= EIG_FLOOR:
        raise DegenerateInput(
            f"matrix has eigenvalue {w.min():.3e} at or below the "
            f"{EIG_FLOOR:.0e} floor"
        )
    return w, v


def _spd_apply(s: np.ndarray, fn) -> np.ndarray:
    w, v = _eigh_floor(s)
    return _sym((v * fn(w)) @ v.T)


def _spd_sqrt_pair(s: np.ndarray) -> tuple:
    """(s^{1/2}, s^{-1/2}) from one eigendecomposition."""
    w, v = _eigh_floor(s)
    r = np.sqrt(w)
    return _sym((v * r) @ v.T), _sym((v / r) @ v.T)


def _sym_expm(a: np.ndarray) -> np.ndarray:
    w, v = la.eigh(_sym(a))
    return _sym((v * np.exp(w)) @ v.T)


def _signed_svd(x: np.ndarray) -> tuple:
    """Thin SVD with a deterministic sign convention: the first nonzero
    entry of every left singular vector is made nonnegative (flipping the
    matching right singular vector), so repeated runs emit identical bytes.
    """
    u, s, vt = la.svd(x, full_matrices=False)
    for j in range(u.shape[1]):
        col = u[:, j]
        nz = np.nonzero(col)[0]
        if nz.size and col[nz[0]] < 0:
            u[:, j] = -col
            vt[j, :] = -vt[j, :]
    return u, s, vt


# ---------------------------------------------------------------------------
# Metric


def _tdata(u) -> np.ndarray:
    """Tangent payload: accepts a TangentVector or a bare array."""
    if isinstance(u, TangentVector):
        return u.data
    return np.asarray(u, dtype=float)


def inner(x: Point, u, v) -> float:
    """Riemannian inner product at x.

    SPD uses the affine-invariant form (1/2)Tr(U Sigma^-1 V Sigma^-1);
    every other kind uses the induced Frobenius/dot product.
    """
    ud, vd = _tdata(u), _tdata(v)
    if ud.shape != x.data.shape or vd.shape != x.data.shape:
        raise GeometryError("tangent vector does not match the point")
    if isinstance(x.manifold, SPD):
        w, q = _eigh_floor(x.data)
        # congruence by Sigma^{-1/2} turns the metric into half-Frobenius
        qi = (q / np.sqrt(w)) @ q.T
        a = qi @ ud @ qi
        b = qi @ vd @ qi
        return 0.5 * float(np.sum(a * b))
    return float(np.sum(ud * vd))


def norm(x: Point, u) -> float:
    return math.sqrt(max(inner(x, u, u), 0.0))


# ---------------------------------------------------------------------------
# Tangent projections and gradients


def proj_tangent(x: Point, v: np.ndarray) -> TangentVector:
    """Orthogonal projection of an ambient array onto the tangent space."""
    v = np.asarray(v, dtype=float)
    if v.shape != x.data.shape:
        raise GeometryError("ambient array shape mismatch")
    kind = x.manifold
    if isinstance(kind, Euclidean):
        return TangentVector(x, v)
    if isinstance(kind, Sphere):
        return TangentVector(x, v - float(x.data @ v) * x.data)
    if isinstance(kind, Stiefel):
        return TangentVector(x, v - x.data @ _sym(x.data.T @ v))
    if isinstance(kind, SPD):
        return TangentVector(x, _sym(v))
    if isinstance(kind, FixedRank):
        u, _, vt = _signed_svd(x.data)
        u = u[:, : kind.rank]
        vt = vt[: kind.rank, :]
        pu = u @ (u.T @ v)
        pv = (v @ vt.T) @ vt
        return TangentVector(x, pu + pv - pu @ vt.T @ vt)
    raise UnsupportedKind(f"unknown manifold kind {kind!r}")


def egrad_to_rgrad(x: Point, eucl_grad: np.ndarray) -> TangentVector:
    """Convert a Euclidean gradient into the Riemannian gradient at x.

    For kinds carrying the induced metric this is tangent projection; SPD
    under the affine-invariant metric rescales: 2 * Sigma sym(G) Sigma.
    """
    g = np.asarray(eucl_grad, dtype=float)
    if g.shape != x.data.shape:
        raise GeometryError("gradient shape mismatch")
    if isinstance(x.manifold, SPD):
        s = x.data
        return TangentVector(x, _sym(2.0 * s @ _sym(g) @ s))
    return proj_tangent(x, g)


# ---------------------------------------------------------------------------
# Moving on the manifold


def retract(x: Point, eta) -> Point:
    """First-order retraction.  Exact exponential on SPD, normalization on
    the sphere, polar factor on Stiefel, truncated SVD on fixed rank."""
    ed = _tdata(eta)
    if not np.any(ed):
        return x
    kind = x.manifold
    if isinstance(kind, Euclidean):
        return _point_like(x, x.data + ed)
    if isinstance(kind, Sphere):
        y = x.data + ed
        return _point_like(x, y / la.norm(y))
    if isinstance(kind, Stiefel):
        return proj_manifold(kind, x.data + ed)
    if isinstance(kind, SPD):
        return exp_map(x, ed)
    if isinstance(kind, FixedRank):
        return proj_manifold(kind, x.data + ed)
    raise UnsupportedKind(f"unknown manifold kind {kind!r}")


def exp_map(x: Point, eta) -> Point:
    """Exponential map; defined for Euclidean, Sphere, and SPD only."""
    kind = x.manifold
    ed = _tdata(eta)
    if isinstance(kind, Euclidean):
        return _point_like(x, x.data + ed)
    if isinstance(kind, Sphere):
        t = la.norm(ed)
        if t == 0.0:
            return x
        return _point_like(x, math.cos(t) * x.data + (math.sin(t) / t) * ed)
    if isinstance(kind, SPD):
        if not np.any(ed):
            return x
        sh, sih = _spd_sqrt_pair(x.data)
        inner_exp = _sym_expm(sih @ ed @ sih)
        return _point_like(x, _sym(sh @ inner_exp @ sh))
    raise UnsupportedKind(
        f"exp_map has no closed form on {type(kind).__name__}"
    )


def log_map(x: Point, y: Point) -> TangentVector:
    """Inverse exponential map; defined for Euclidean, Sphere, and SPD."""
    kind = x.manifold
    if isinstance(kind, Euclidean):
        return TangentVector(x, y.data - x.data)
    if isinstance(kind, Sphere):
        c = float(np.clip(x.data @ y.data, -1.0, 1.0))
        if 1.0 + c <= 1e-12:
            raise DegenerateInput("antipodal sphere points: log map undefined")
        v = y.data - c * x.data
        s = la.norm(v)
        if s < 1e-16:
            return zero_tangent(x)
        # atan2 = the angle; conditioned well at both ends unlike acos
        return TangentVector(x, (math.atan2(s, c) / s) * v)
    if isinstance(kind, SPD):
        sh, sih = _spd_sqrt_pair(x.data)
        inner_log = _spd_apply(sih @ y.data @ sih, np.log)
        return TangentVector(x, _sym(sh @ inner_log @ sh))
    raise UnsupportedKind(
        f"log_map has no closed form on {type(kind).__name__}"
    )


def transport(x: Point, y: Point, u) -> TangentVector:
    """Carry a tangent vector from x to y.

    Exact (isometric) along the minimizing geodesic on Euclidean, Sphere,
    and SPD; projection transport on Stiefel and FixedRank, where the exact
    map is unavailable and the solver never relies on isometry.
    """
    kind = x.manifold
    ud = _tdata(u)
    if isinstance(kind, Euclidean):
        return TangentVector(y, ud)
    if isinstance(kind, Sphere):
        lv = log_map(x, y)
        theta = la.norm(lv.data)
        if theta < 1e-16:
            return TangentVector(y, ud)
        e = lv.data / theta
        coef = float(e @ ud)
        moved = ud + coef * (
            (math.cos(theta) - 1.0) * e - math.sin(theta) * x.data
        )
        return TangentVector(y, moved)
    if isinstance(kind, SPD):
        sh, sih = _spd_sqrt_pair(x.data)
        mid = _spd_apply(sih @ y.data @ sih, np.sqrt)
        e = sh @ mid @ sih
        return TangentVector(y, _sym(e @ ud @ e.T))
    if isinstance(kind, (Stiefel, FixedRank)):
        return proj_tangent(y, ud)
    raise UnsupportedKind(f"unknown manifold kind {kind!r}")


# ---------------------------------------------------------------------------
# Distances


def dist(x, y) -> float:
    """Geodesic distance on Euclidean/Sphere/SPD; ambient Frobenius
    distance on Stiefel/FixedRank (equivalent to the geodesic one up to
    constants on those compact/embedded kinds).  Product states combine as
    the root of the sum of squared block distances."""
    if isinstance(x, ProductPoint):
        if not isinstance(y, ProductPoint) or len(x) != len(y):
            raise GeometryError("product structure mismatch")
        return math.sqrt(
            sum(dist(a, b) ** 2 for a, b in zip(x.blocks, y.blocks))
        )
    kind = x.manifold
    if kind != y.manifold:
        raise GeometryError("points live on different manifolds")
    if isinstance(kind, (Euclidean, Stiefel, FixedRank)):
        return float(la.norm(x.data - y.data))
    if isinstance(kind, Sphere):
        # atan2 form stays accurate where arccos loses half the digits
        c = float(x.data @ y.data)
        s = float(la.norm(x.data - c * y.data))
        return math.atan2(s, c)
    if isinstance(kind, SPD):
        _, sih = _spd_sqrt_pair(y.data)
        w, _ = _eigh_floor(sih @ x.data @ sih)
        return float(la.norm(np.log(w)) / math.sqrt(2.0))
    raise UnsupportedKind(f"unknown manifold kind {kind!r}")


def grad_dist_sq(x: Point, p: Point) -> TangentVector:
    """Riemannian gradient of theta -> dist(theta, p)^2 at x: -2 log_x(p)."""
    lv = log_map(x, p)
    return TangentVector(x, -2.0 * lv.data)


# ---------------------------------------------------------------------------
# Projections onto the manifold


def proj_manifold(kind: ManifoldKind, x: np.ndarray) -> Point:
    """Metric projection of an ambient array onto the manifold.

    Stiefel: polar factor U V^T of the SVD (the nearest orthonormal frame).
    FixedRank: truncated SVD.  Both are errors when the projection is not
    unique (rank-deficient input, tied singular values at the cut).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != ambient_shape(kind):
        raise GeometryError("ambient array shape mismatch")
    if isinstance(kind, Euclidean):
        return Point(kind, x)
    if isinstance(kind, Sphere):
        n = la.norm(x)
        if n <= 1e-12:
            raise DegenerateInput("cannot project a near-zero vector")
        return Point(kind, x / n)
    if isinstance(kind, Stiefel):
        u, s, vt = _signed_svd(x)
        if s[-1] <= RANK_RTOL * s[0]:
            raise DegenerateInput(
                "rank-deficient input: orthonormal projection not unique"
            )
        return Point(kind, u @ vt)
    if isinstance(kind, FixedRank):
        u, s, vt = _signed_svd(x)
        r = kind.rank
        if s[r - 1] <= RANK_RTOL * s[0]:
            raise DegenerateInput(
                "input has numerical rank below the target rank"
            )
        if r < s.size and s[r - 1] - s[r] <= RANK_RTOL * s[0]:
            raise DegenerateInput(
                "tied singular values at the rank cut: projection not unique"
            )
        return Point(kind, (u[:, :r] * s[:r]) @ vt[:r, :])
    raise UnsupportedKind(
        f"proj_manifold is not defined on {type(kind).__name__}"
    )


def check_point(x: Point, tol: float = 1e-10) -> None:
    """Validate the membership invariants of a point; raises on failure."""
    kind = x.manifold
    if isinstance(kind, Euclidean):
        if not np.all(np.isfinite(x.data)):
            raise DegenerateInput("non-finite entries")
        return
    if isinstance(kind, Sphere):
        if abs(la.norm(x.data) - 1.0) > tol:
            raise DegenerateInput("sphere point is not unit norm")
        return
    if isinstance(kind, Stiefel):
        gram = x.data.T @ x.data
        if la.norm(gram - np.eye(kind.k)) > tol:
            raise DegenerateInput("stiefel point is not orthonormal")
        return
    if isinstance(kind, SPD):
        if la.norm(x.data - x.data.T) > tol * max(1.0, la.norm(x.data)):
            raise DegenerateInput("matrix is not symmetric")
        w = la.eigvalsh(_sym(x.data))
        if w.min() <= 0.0:
            raise DegenerateInput("matrix is not positive definite")
        return
    if isinstance(kind, FixedRank):
        s = la.svd(x.data, compute_uv=False)
        if s[kind.rank - 1] <= 1e-10 * s[0]:
            raise DegenerateInput("matrix rank fell below the target rank")
        return
    raise UnsupportedKind(f"unknown manifold kind {kind!r}")


# ---------------------------------------------------------------------------
# Seeded samplers (used by the diagnostics probes and tests)


def random_point(kind: ManifoldKind, rng: np.random.Generator) -> Point:
    shape = ambient_shape(kind)
    g = rng.standard_normal(shape)
    if isinstance(kind, Euclidean):
        return Point(kind, g)
    if isinstance(kind, Sphere):
        return Point(kind, g / la.norm(g))
    if isinstance(kind, Stiefel):
        return proj_manifold(kind, g)
    if isinstance(kind, SPD):
        # orthogonal frame with eigenvalues bounded in [0.5, 2]
        q, _, _ = _signed_svd(g)
        w = rng.uniform(0.5, 2.0, kind.n)
        return Point(kind, _sym((q * w) @ q.T))
    if isinstance(kind, FixedRank):
        a = rng.standard_normal((kind.rows, kind.rank))
        b = rng.standard_normal((kind.rank, kind.cols))
        return Point(kind, a @ b)
    raise UnsupportedKind(f"unknown manifold kind {kind!r}")


def random_tangent(
    x: Point, rng: np.random.Generator, scale: float = 1.0
) -> TangentVector:
    """Random tangent vector at x with Riemannian norm `scale`."""
    v = proj_tangent(x, rng.standard_normal(x.data.shape))
    n = norm(x, v)
    if n <= 1e-12:
        raise DegenerateInput("sampled tangent vector collapsed to zero")
    return TangentVector(x, v.data * (scale / n))
