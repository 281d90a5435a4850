"""Catalog manifolds in R^3: circles, round 2-spheres, isolated points and
finite disjoint unions of them.

Every component has an explicit chart, an intrinsic measure (length, area or
zero), a closed-form nearest-point map and a closed-form reach.  The union's
reach also accounts for the separation between components.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

TWO_PI = 2.0 * math.pi


def _vec3(v, name) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64).reshape(-1)
    if a.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    return a


def _plane_frame(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # e1: the world axis least aligned with the normal, projected into the plane
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(normal)))] = 1.0
    e1 = axis - normal * (normal @ axis)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(normal, e1)


@dataclass(frozen=True, eq=False)
class Circle:
    center: np.ndarray
    normal: np.ndarray
    radius: float

    kind = "circle"
    intrinsic_dim = 1

    def __post_init__(self):
        c = _vec3(self.center, "center")
        n = _vec3(self.normal, "normal")
        nn = np.linalg.norm(n)
        if nn == 0:
            raise ValueError("circle normal must be nonzero")
        if not self.radius > 0:
            raise ValueError("circle radius must be positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "normal", n / nn)
        object.__setattr__(self, "radius", float(self.radius))
        e1, e2 = _plane_frame(self.normal)
        object.__setattr__(self, "e1", e1)
        object.__setattr__(self, "e2", e2)

    @property
    def measure(self) -> float:
        return TWO_PI * self.radius

    @property
    def reach(self) -> float:
        return self.radius

    def point(self, theta) -> np.ndarray:
        t = np.asarray(theta, dtype=np.float64)[..., None]
        return self.center + self.radius * (np.cos(t) * self.e1 + np.sin(t) * self.e2)

    def chart(self, X) -> np.ndarray:
        """Angle in [0, 2pi) of the in-plane direction of each point."""
        d = np.asarray(X, dtype=np.float64) - self.center
        return np.mod(np.arctan2(d @ self.e2, d @ self.e1), TWO_PI)

    def tangent(self, theta) -> np.ndarray:
        t = np.asarray(theta, dtype=np.float64)[..., None]
        return (-np.sin(t) * self.e1 + np.cos(t) * self.e2)[..., None, :]

    def sample_params(self, rng, n) -> np.ndarray:
        return rng.uniform(0.0, TWO_PI, size=(n, 1))

    def grid_params(self, n) -> np.ndarray:
        return (TWO_PI * np.arange(n) / n)[:, None]

    def param_point(self, params) -> np.ndarray:
        return self.point(np.asarray(params)[..., 0])

    def project(self, X, tie_tol=1e-9):
        """Nearest points, distances, chart angles and uniqueness flags."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        d = X - self.center
        h = d @ self.normal
        inplane = d - h[:, None] * self.normal
        rho = np.linalg.norm(inplane, axis=1)
        unique = rho > tie_tol
        theta = np.where(unique, np.mod(np.arctan2(d @ self.e2, d @ self.e1), TWO_PI), 0.0)
        nearest = self.point(theta)
        dist = np.sqrt(h * h + (rho - self.radius) ** 2)
        return nearest, dist, theta[:, None], unique

    def distance(self, X) -> np.ndarray:
        return self.project(X)[1]

    def to_dict(self) -> dict:
        return {"kind": "circle", "center": self.center.tolist(),
                "normal": self.normal.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Sphere2:
    """Round 2-sphere; chart parameters are (polar angle from +z, azimuth)."""

    center: np.ndarray
    radius: float

    kind = "sphere2"
    intrinsic_dim = 2

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "center"))
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def measure(self) -> float:
        return 4.0 * math.pi * self.radius**2

    @property
    def reach(self) -> float:
        return self.radius

    def param_point(self, params) -> np.ndarray:
        p = np.asarray(params, dtype=np.float64)
        pol, az = p[..., 0:1], p[..., 1:2]
        dirs = np.concatenate(
            [np.sin(pol) * np.cos(az), np.sin(pol) * np.sin(az), np.cos(pol)], axis=-1
        )
        return self.center + self.radius * dirs

    def chart(self, X) -> np.ndarray:
        d = np.atleast_2d(np.asarray(X, dtype=np.float64)) - self.center
        r = np.linalg.norm(d, axis=1)
        pol = np.arccos(np.clip(d[:, 2] / np.where(r > 0, r, 1.0), -1.0, 1.0))
        az = np.mod(np.arctan2(d[:, 1], d[:, 0]), TWO_PI)
        return np.column_stack([pol, az])

    def tangent(self, params) -> np.ndarray:
        p = np.atleast_2d(np.asarray(params, dtype=np.float64))
        pol, az = p[:, 0], p[:, 1]
        t_pol = np.column_stack([np.cos(pol) * np.cos(az), np.cos(pol) * np.sin(az), -np.sin(pol)])
        t_az = np.column_stack([-np.sin(az), np.cos(az), np.zeros_like(az)])
        return np.stack([t_pol, t_az], axis=1)

    def sample_params(self, rng, n) -> np.ndarray:
        z = rng.uniform(-1.0, 1.0, size=n)
        az = rng.uniform(0.0, TWO_PI, size=n)
        return np.column_stack([np.arccos(z), az])

    def grid_params(self, n) -> np.ndarray:
        # roughly n cells, polar rows at midpoints, twice as many azimuth columns
        rows = max(1, int(round(math.sqrt(n / 2.0))))
        cols = max(1, int(math.ceil(n / rows)))
        pol = math.pi * (np.arange(rows) + 0.5) / rows
        az = TWO_PI * np.arange(cols) / cols
        P, A = np.meshgrid(pol, az, indexing="ij")
        return np.column_stack([P.ravel(), A.ravel()])

    def project(self, X, tie_tol=1e-9):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        d = X - self.center
        r = np.linalg.norm(d, axis=1)
        unique = r > tie_tol
        safe = np.where(unique, r, 1.0)[:, None]
        dirs = np.where(unique[:, None], d / safe, np.array([0.0, 0.0, 1.0]))
        nearest = self.center + self.radius * dirs
        return nearest, np.abs(r - self.radius), self.chart(nearest), unique

    def distance(self, X) -> np.ndarray:
        return self.project(X)[1]

    def to_dict(self) -> dict:
        return {"kind": "sphere2", "center": self.center.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Point:
    location: np.ndarray

    kind = "point"
    intrinsic_dim = 0
    measure = 0.0
    reach = math.inf

    def __post_init__(self):
        object.__setattr__(self, "location", _vec3(self.location, "location"))

    def param_point(self, params) -> np.ndarray:
        n = np.asarray(params).shape[0] if np.ndim(params) > 1 else 1
        return np.tile(self.location, (n, 1))

    def chart(self, X) -> np.ndarray:
        return np.zeros((len(np.atleast_2d(X)), 0))

    def tangent(self, params) -> np.ndarray:
        return np.zeros((len(params), 0, 3))

    def sample_params(self, rng, n) -> np.ndarray:
        return np.zeros((n, 0))

    def grid_params(self, n) -> np.ndarray:
        return np.zeros((1, 0))

    def project(self, X, tie_tol=1e-9):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        n = len(X)
        return (np.tile(self.location, (n, 1)), np.linalg.norm(X - self.location, axis=1),
                np.zeros((n, 0)), np.ones(n, dtype=bool))

    def distance(self, X) -> np.ndarray:
        return self.project(X)[1]

    def to_dict(self) -> dict:
        return {"kind": "point", "location": self.location.tolist()}


Component = Circle | Sphere2 | Point


def component_from_dict(d: dict) -> Component:
    kind = d.get("kind")
    if kind == "circle":
        return Circle(d["center"], d["normal"], d["radius"])
    if kind == "sphere2":
        return Sphere2(d["center"], d["radius"])
    if kind == "point":
        return Point(d["location"])
    raise ValueError(f"unsupported component kind {kind!r}")


def component_distance(a: Component, b: Component, grid: int = 4096) -> float:
    """Minimum distance between two components.

    Dense grid over the lower-dimensional component's chart (distance to the
    other component is closed form), then local refinement from the best
    grid cells.
    """
    if a.intrinsic_dim > b.intrinsic_dim:
        a, b = b, a
    if a.intrinsic_dim == 0:
        return float(b.distance(a.location[None])[0])

    def f(p):
        return float(b.distance(a.param_point(np.atleast_1d(p))[None])[0])

    params = a.grid_params(grid if a.intrinsic_dim == 1 else 64 * grid)
    vals = b.distance(a.param_point(params))
    best = float(vals.min())
    for i in np.argsort(vals, kind="stable")[:4]:
        p0 = params[i]
        if a.intrinsic_dim == 1:
            step = TWO_PI / len(params)
            res = minimize_scalar(lambda t: f([t]), bounds=(p0[0] - step, p0[0] + step),
                                  method="bounded", options={"xatol": 1e-12})
            best = min(best, float(res.fun))
        else:
            res = minimize(f, p0, method="Nelder-Mead",
                           options={"xatol": 1e-11, "fatol": 1e-14, "maxiter": 4000})
            best = min(best, float(res.fun))
    return max(best, 0.0)


@dataclass(frozen=True, eq=False)
class ManifoldSpec:
    """A finite disjoint union of catalog components in R^3."""

    components: tuple
    ambient_dim: int = 3
    min_separation: float = 1e-9
    separations: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a manifold needs at least one component")
        if self.ambient_dim != 3:
            raise ValueError("catalog components live in R^3")
        object.__setattr__(self, "components", comps)
        m = len(comps)
        sep = np.full((m, m), np.inf)
        for i in range(m):
            for j in range(i + 1, m):
                d = component_distance(comps[i], comps[j])
                if d <= self.min_separation:
                    raise ValueError(
                        f"components {i} and {j} are not disjoint (distance {d:.3g})"
                    )
                sep[i, j] = sep[j, i] = d
        object.__setattr__(self, "separations", sep)

    @property
    def max_component_dim(self) -> int:
        return max(c.intrinsic_dim for c in self.components)

    @property
    def measures(self) -> list[float]:
        return [c.measure for c in self.components]

    def __len__(self):
        return len(self.components)

    def to_dict(self) -> dict:
        return {"components": [c.to_dict() for c in self.components]}

    @classmethod
    def from_dict(cls, d: dict) -> "ManifoldSpec":
        return cls(tuple(component_from_dict(c) for c in d["components"]))


def unit_circle() -> ManifoldSpec:
    return ManifoldSpec((Circle([0, 0, 0], [0, 0, 1], 1.0),))


def interlaced_circles() -> ManifoldSpec:
    """Unit circle about the origin in z=0 linked with a unit circle about
    (1, 0, 0) in the plane y=0."""
    return ManifoldSpec((Circle([0, 0, 0], [0, 0, 1], 1.0), Circle([1, 0, 0], [0, 1, 0], 1.0)))


def total_measure(spec: ManifoldSpec) -> float:
    return float(sum(spec.measures))


# -- point sets --------------------------------------------------------------

@dataclass
class PointSet:
    """Sampled points with their component ids and chart parameters.

    ``params`` has two columns; unused ones (1-d components, points) are NaN.
    """

    component_id: np.ndarray
    params: np.ndarray
    coords: np.ndarray

    def __post_init__(self):
        self.component_id = np.asarray(self.component_id, dtype=np.int64).reshape(-1)
        self.params = np.asarray(self.params, dtype=np.float64).reshape(-1, 2)
        self.coords = np.asarray(self.coords, dtype=np.float64).reshape(-1, 3)
        if not len(self.component_id) == len(self.params) == len(self.coords):
            raise ValueError("point set columns have different lengths")

    def __len__(self):
        return len(self.coords)

    def subset(self, mask) -> "PointSet":
        return PointSet(self.component_id[mask], self.params[mask], self.coords[mask])

    @classmethod
    def empty(cls) -> "PointSet":
        return cls(np.zeros(0, dtype=np.int64), np.zeros((0, 2)), np.zeros((0, 3)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["component_id", "param0", "param1", "x", "y", "z"])
            for cid, p, x in zip(self.component_id, self.params, self.coords):
                w.writerow([int(cid), *(fmt(v) for v in p), *(fmt(v) for v in x)])

    @classmethod
    def from_csv(cls, path) -> "PointSet":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            return cls.empty()
        cid = [int(r["component_id"]) for r in rows]
        params = [[float(r[k]) if r[k] != "" else np.nan for k in ("param0", "param1")] for r in rows]
        coords = [[float(r[k]) for k in "xyz"] for r in rows]
        return cls(cid, params, coords)


def fmt(v) -> str:
    """17 significant digits; NaN as an empty field."""
    v = float(v)
    return "" if math.isnan(v) else format(v, ".17g")


def _pointset(spec, comp_ids, rng_params) -> PointSet:
    n = len(comp_ids)
    params = np.full((n, 2), np.nan)
    coords = np.zeros((n, 3))
    for j, comp in enumerate(spec.components):
        idx = np.flatnonzero(comp_ids == j)
        if len(idx) == 0:
            continue
        p = rng_params(comp, len(idx))
        params[idx, : p.shape[1]] = p
        coords[idx] = comp.param_point(p) if comp.intrinsic_dim else comp.location
    return PointSet(comp_ids, params, coords)


def sample_uniform(spec: ManifoldSpec, n_points: int, seed: int) -> PointSet:
    """i.i.d. points uniform with respect to the intrinsic measure of the union."""
    if n_points < 0:
        raise ValueError("n_points must be >= 0")
    if n_points == 0:
        return PointSet.empty()
    mu = np.array(spec.measures)
    if mu.sum() <= 0:
        raise ValueError("cannot sample atomless-uniformly from measure-zero set")
    rng = np.random.default_rng(seed)
    comp_ids = rng.choice(len(mu), size=n_points, p=mu / mu.sum())
    return _pointset(spec, comp_ids, lambda c, n: c.sample_params(rng, n))


def sample_per_component(spec: ManifoldSpec, n_per_component: int, seed: int) -> PointSet:
    """``n_per_component`` uniform points on each component, component-major order."""
    if n_per_component < 0:
        raise ValueError("n_per_component must be >= 0")
    rng = np.random.default_rng(seed)
    comp_ids = np.repeat(np.arange(len(spec)), n_per_component)
    return _pointset(spec, comp_ids, lambda c, n: c.sample_params(rng, n))


def chart_grid(spec: ManifoldSpec, n_per_component: int) -> PointSet:
    """Uniform chart grid on every component (a single point for point components)."""
    ids, params = [], []
    for j, comp in enumerate(spec.components):
        p = comp.grid_params(n_per_component)
        full = np.full((len(p), 2), np.nan)
        full[:, : p.shape[1]] = p
        ids.append(np.full(len(p), j))
        params.append(full)
    ids = np.concatenate(ids)
    params = np.concatenate(params)
    return PointSet(ids, params, points_from_params(spec, ids, params))


def points_from_params(spec: ManifoldSpec, comp_ids, params) -> np.ndarray:
    comp_ids = np.asarray(comp_ids)
    params = np.asarray(params, dtype=np.float64).reshape(-1, 2)
    out = np.zeros((len(comp_ids), 3))
    for j, comp in enumerate(spec.components):
        idx = np.flatnonzero(comp_ids == j)
        if len(idx):
            d = comp.intrinsic_dim
            out[idx] = comp.param_point(params[idx, :d]) if d else comp.location
    return out


def tangent_bases(spec: ManifoldSpec, points: PointSet) -> np.ndarray:
    """Orthonormal tangent bases, shape (N, max_dim, 3), zero-padded rows."""
    k = max(spec.max_component_dim, 1)
    out = np.zeros((len(points), k, 3))
    for j, comp in enumerate(spec.components):
        idx = np.flatnonzero(points.component_id == j)
        if len(idx) and comp.intrinsic_dim:
            d = comp.intrinsic_dim
            T = comp.tangent(points.params[idx, :d] if d > 1 else points.params[idx, 0])
            out[idx, :d] = T
    return out


# -- projection and reach ----------------------------------------------------

@dataclass(frozen=True)
class ProjectionResult:
    nearest: np.ndarray
    distance: float
    unique: bool
    component_id: int | None


@dataclass(frozen=True)
class Projection:
    """Batch form of :class:`ProjectionResult` plus chart parameters."""

    nearest: np.ndarray
    distance: np.ndarray
    unique: np.ndarray
    component_id: np.ndarray
    params: np.ndarray


def project(spec: ManifoldSpec, X, tie_tol: float = 1e-9) -> Projection:
    """Vectorized nearest-point map onto the union.

    A point is flagged non-unique when its own component's projection is
    degenerate (on a circle's axis, at a sphere's center) or when another
    component is within ``tie_tol`` of the minimal distance.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n, m = len(X), len(spec)
    dists = np.empty((m, n))
    per = []
    for j, comp in enumerate(spec.components):
        res = comp.project(X, tie_tol)
        per.append(res)
        dists[j] = res[1]
    best = np.argmin(dists, axis=0)
    dmin = dists[best, np.arange(n)]
    ties = (dists <= dmin + tie_tol).sum(axis=0) > 1
    nearest = np.zeros((n, 3))
    params = np.full((n, 2), np.nan)
    unique = ~ties
    for j, (near, _, par, uniq) in enumerate(per):
        idx = best == j
        nearest[idx] = near[idx]
        params[idx, : par.shape[1]] = par[idx]
        unique[idx] &= uniq[idx]
    return Projection(nearest, dmin, unique, best, params)


def nearest_point(spec: ManifoldSpec, x, tie_tol: float = 1e-9) -> ProjectionResult:
    if not tie_tol > 0:
        raise ValueError("tie_tol must be positive")
    x = _vec3(x, "x")
    p = project(spec, x[None], tie_tol)
    dists = np.array([c.distance(x[None])[0] for c in spec.components])
    cross_tie = int((dists <= p.distance[0] + tie_tol).sum()) > 1
    return ProjectionResult(
        nearest=p.nearest[0],
        distance=float(p.distance[0]),
        unique=bool(p.unique[0]),
        component_id=None if cross_tie else int(p.component_id[0]),
    )


@dataclass(frozen=True)
class ReachResult:
    reach: float
    limiting_mechanism: str
    separation: float


def analytic_reach(spec: ManifoldSpec) -> ReachResult:
    """min(per-component reach, half the smallest pairwise separation)."""
    for c in spec.components:
        if not isinstance(c, (Circle, Sphere2, Point)):
            raise ValueError(f"unsupported component {c!r}")
    curvature = min(c.reach for c in spec.components)
    separation = float(spec.separations.min()) if len(spec) > 1 else math.inf
    if curvature <= separation / 2:
        return ReachResult(curvature, "component_curvature", separation)
    return ReachResult(separation / 2, "inter_component_separation", separation)


def estimate_reach(points, tangents, chunk: int = 512, floor: float = 1e-12) -> float:
    """Pairwise point-cloud reach estimate.

    min over ordered pairs (p, q) of ``|q - p|^2 / (2 |(q - p) normal to T_p|)``,
    skipping pairs whose normal component is below ``floor``.
    """
    P = np.asarray(getattr(points, "coords", points), dtype=np.float64)
    if P.ndim != 2 or len(P) < 2:
        raise ValueError("estimate_reach needs at least 2 points")
    if isinstance(tangents, (list, tuple)):
        k = max((np.atleast_2d(t).shape[0] for t in tangents), default=1)
        T = np.zeros((len(P), max(k, 1), P.shape[1]))
        for i, t in enumerate(tangents):
            t = np.atleast_2d(np.asarray(t, dtype=np.float64))
            T[i, : t.shape[0]] = t
    else:
        T = np.asarray(tangents, dtype=np.float64)
        if T.ndim == 2:
            T = T[:, None, :]
    if len(T) != len(P):
        raise ValueError("one tangent basis per point required")
    # projector onto the normal space at each point
    N = np.eye(P.shape[1])[None] - np.einsum("nki,nkj->nij", T, T)
    best = math.inf
    for s in range(0, len(P), chunk):
        D = P[None, :, :] - P[s : s + chunk, None, :]            # (c, N, n)
        normal = np.matmul(D, N[s : s + chunk])
        nn = np.sqrt(np.einsum("cnd,cnd->cn", normal, normal))
        sq = np.einsum("cnd,cnd->cn", D, D)
        ok = nn >= floor
        if ok.any():
            best = min(best, float((sq[ok] / (2.0 * nn[ok])).min()))
    return best
