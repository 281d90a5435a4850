"""Constructive encoder/decoder pair that is exact off a small bad set.

Each component is cut open at a point chosen far from the protected set S:
circles at an angle, spheres at a point whose antipode is the center of an
azimuthal-equidistant chart.  A closed arc / geodesic disk around the cut is
the bad set K0.  Off K0 the chart is compressed affinely into a target
interval (k=1) or disk (k=2) laid out along the first latent axis with unit
gaps; on K0 the encoder folds back across the target so F stays continuous.
The decoder inverts the chart exactly on the targets, interpolates in
ambient space across gaps and clamps beyond the outer targets.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry as geo
from .geometry import TWO_PI, Circle, ManifoldSpec, Point, Sphere2

ON_K_TOL = 1e-9
MIN_CUT_ROOM = 1e-12


@dataclass(frozen=True)
class ComponentCut:
    """Cut descriptor for one component.

    ``cut`` is the cut angle (circle), the unit cut direction (sphere), or
    ``None`` (point components are never cut).  ``half_width`` is the bad-set
    radius in chart units: an angle for circles, a geodesic angle for spheres.
    """

    cut: float | tuple | None
    half_width: float
    target_center: tuple

    def bad_measure(self, comp) -> float:
        w = self.half_width
        if isinstance(comp, Circle):
            return 2.0 * comp.radius * w
        if isinstance(comp, Sphere2):
            return 4.0 * math.pi * comp.radius**2 * math.sin(w / 2.0) ** 2
        return 0.0


def _layout(k: int):
    """(pitch, half-width, offset) of targets along the first latent axis."""
    # k=1: intervals [2i, 2i+1]; k=2: unit disks centered at (3i, 0)
    return (2.0, 0.5, 0.5) if k == 1 else (3.0, 1.0, 0.0)


def _angle_between(a, b) -> np.ndarray:
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    return np.arctan2(cross, np.einsum("...i,...i->...", a, b))


def _sphere_frame(cut_dir):
    center = -np.asarray(cut_dir, dtype=np.float64)
    e1, e2 = geo._plane_frame(center)
    return center, e1, e2


@dataclass(frozen=True, eq=False)
class OracleAutoencoder:
    spec: ManifoldSpec
    delta: float
    protected: np.ndarray
    cuts: tuple
    latent_dim: int
    reach: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "reach", geo.analytic_reach(self.spec).reach)

    @property
    def ambient_dim(self) -> int:
        return self.spec.ambient_dim

    @property
    def bad_measures(self) -> list[float]:
        return [c.bad_measure(comp) for c, comp in zip(self.cuts, self.spec.components)]

    @property
    def bad_set_measure(self) -> float:
        return float(sum(self.bad_measures))

    # -- per-component charts, in normalized target coordinates y, |y| <= 1

    def _to_latent(self, j, y) -> np.ndarray:
        _, hw, _ = _layout(self.latent_dim)
        return np.asarray(self.cuts[j].target_center) + hw * y

    def _local_encode(self, j, params) -> np.ndarray:
        comp, cut = self.spec.components[j], self.cuts[j]
        n = len(params)
        y = np.zeros((n, self.latent_dim))
        if isinstance(comp, Circle):
            w = cut.half_width
            s = np.mod(params[:, 0] - cut.cut, TWO_PI)
            good = (s >= w) & (s <= TWO_PI - w)
            t = np.where(good, (s - w) / (TWO_PI - 2.0 * w), 0.0)
            sigma = np.where(s < w, s, s - TWO_PI)
            t = np.where(good, t, (w - sigma) / (2.0 * w))
            y[:, 0] = 2.0 * t - 1.0
        elif isinstance(comp, Sphere2):
            v = comp.param_point(params) - comp.center
            v /= comp.radius
            y[:] = self._sphere_chart(j, v)
        return y

    def _sphere_chart(self, j, v) -> np.ndarray:
        cut = self.cuts[j]
        w = cut.half_width
        p, e1, e2 = _sphere_frame(cut.cut)
        cos_phi = v @ p
        tang = v - cos_phi[:, None] * p
        phi = np.arctan2(np.linalg.norm(tang, axis=1), cos_phi)
        psi = np.arctan2(tang @ e2, tang @ e1)
        R = math.pi - w
        radial = np.where(phi <= R, phi / R, (math.pi - phi) / w)
        return radial[:, None] * np.column_stack([np.cos(psi), np.sin(psi)])

    def _local_decode(self, j, y) -> np.ndarray:
        comp, cut = self.spec.components[j], self.cuts[j]
        if isinstance(comp, Point):
            return np.tile(comp.location, (len(y), 1))
        w = cut.half_width
        if isinstance(comp, Circle):
            t = (y[:, 0] + 1.0) / 2.0
            return comp.point(cut.cut + w + t * (TWO_PI - 2.0 * w))
        p, e1, e2 = _sphere_frame(cut.cut)
        rho = np.linalg.norm(y, axis=1)
        phi = rho * (math.pi - w)
        psi = np.arctan2(y[:, 1], y[:, 0])
        v = (np.cos(phi)[:, None] * p
             + np.sin(phi)[:, None] * (np.cos(psi)[:, None] * e1 + np.sin(psi)[:, None] * e2))
        return comp.center + comp.radius * v

    def _clamped_decode(self, j, U) -> np.ndarray:
        _, hw, _ = _layout(self.latent_dim)
        y = (U - np.asarray(self.cuts[j].target_center)) / hw
        r = np.linalg.norm(y, axis=1)
        y = y / np.maximum(r, 1.0)[:, None]
        return self._local_decode(j, y)

    # -- batch interface

    def encode(self, X) -> np.ndarray:
        """F through the nearest-point projection.

        Defined wherever the projection onto K is unique, which contains the
        open tube of radius ``reach``.
        """
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        proj = geo.project(self.spec, X)
        bad = ~proj.unique
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise ValueError(f"outside encoder domain: point {X[i].tolist()}")
        U = np.zeros((len(X), self.latent_dim))
        for j, comp in enumerate(self.spec.components):
            idx = np.flatnonzero(proj.component_id == j)
            if len(idx):
                d = comp.intrinsic_dim
                U[idx] = self._to_latent(j, self._local_encode(j, proj.params[idx, :d]))
        return U

    def decode(self, U) -> np.ndarray:
        """G, total and continuous on all of R^k."""
        U = np.asarray(U, dtype=np.float64).reshape(-1, self.latent_dim)
        pitch, hw, offset = _layout(self.latent_dim)
        m = len(self.cuts)
        a = U[:, 0]
        # position along the layout: column j covers [c_j - hw, c_j + hw]
        rel = a - offset + hw
        j = np.clip(np.floor(rel / pitch).astype(np.int64), 0, m - 1)
        tau = np.clip(rel - j * pitch - 2.0 * hw, 0.0, None)
        tau = np.where(j == m - 1, 0.0, np.minimum(tau, 1.0))
        out = np.zeros((len(U), self.ambient_dim))
        for i in range(m):
            here = np.flatnonzero(j == i)
            if len(here) == 0:
                continue
            Ui = U[here]
            x = self._clamped_decode(i, Ui)
            t = tau[here]
            blend = t > 0
            if blend.any():
                nxt = self._clamped_decode(i + 1, Ui[blend])
                x[blend] = (1.0 - t[blend, None]) * x[blend] + t[blend, None] * nxt
            out[here] = x
        return out

    def reconstruct(self, X) -> np.ndarray:
        return self.decode(self.encode(X))

    def contains_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        proj = geo.project(self.spec, X)
        off = proj.distance > ON_K_TOL
        if off.any():
            i = int(np.flatnonzero(off)[0])
            raise ValueError(f"point {X[i].tolist()} is not on K (distance {proj.distance[i]:.3g})")
        out = np.zeros(len(X), dtype=bool)
        for j, comp in enumerate(self.spec.components):
            idx = np.flatnonzero(proj.component_id == j)
            if not len(idx):
                continue
            cut = self.cuts[j]
            if isinstance(comp, Circle):
                s = np.mod(proj.params[idx, 0] - cut.cut, TWO_PI)
                out[idx] = np.minimum(s, TWO_PI - s) <= cut.half_width
            elif isinstance(comp, Sphere2):
                v = (proj.nearest[idx] - comp.center) / comp.radius
                out[idx] = _angle_between(v, np.asarray(cut.cut)) <= cut.half_width
        return out

    # -- serialization

    def to_dict(self) -> dict:
        comps = []
        for comp, cut, mu in zip(self.spec.components, self.cuts, self.bad_measures):
            d = {"component": comp.to_dict(), "half_width": cut.half_width,
                 "target_center": list(cut.target_center), "bad_set_measure": mu}
            if isinstance(comp, Circle):
                d["cut_angle"] = cut.cut
            elif isinstance(comp, Sphere2):
                d["cut_direction"] = list(cut.cut)
            comps.append(d)
        return {"latent_dim": self.latent_dim, "delta": self.delta,
                "protected_points": self.protected.tolist(), "components": comps}

    @classmethod
    def from_dict(cls, d: dict) -> "OracleAutoencoder":
        spec = ManifoldSpec.from_dict({"components": [c["component"] for c in d["components"]]})
        cuts = []
        for c in d["components"]:
            cut = c.get("cut_angle")
            if "cut_direction" in c:
                cut = tuple(c["cut_direction"])
            cuts.append(ComponentCut(cut, c["half_width"], tuple(c["target_center"])))
        protected = np.array(d["protected_points"], dtype=np.float64).reshape(-1, 3)
        return cls(spec, d["delta"], protected, tuple(cuts), d["latent_dim"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "OracleAutoencoder":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _fibonacci_sphere(n) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    az = math.pi * (1.0 + math.sqrt(5.0)) * i
    r = np.sqrt(1.0 - z * z)
    return np.column_stack([r * np.cos(az), r * np.sin(az), z])


def _circle_cut(angles):
    """Cut angle farthest from all protected angles, and that distance."""
    if len(angles) == 0:
        return math.pi, math.inf
    a = np.sort(np.mod(angles, TWO_PI))
    gaps = np.diff(np.append(a, a[0] + TWO_PI))
    g = int(np.argmax(gaps))
    return float(np.mod(a[g] + gaps[g] / 2.0, TWO_PI)), float(gaps[g] / 2.0)


def _sphere_cut(dirs):
    if len(dirs) == 0:
        return (0.0, 0.0, -1.0), math.inf
    cand = np.vstack([_fibonacci_sphere(4096), -dirs])
    cand /= np.linalg.norm(cand, axis=1, keepdims=True)
    dist = _angle_between(cand[:, None, :], dirs[None, :, :]).min(axis=1)
    i = int(np.argmax(dist))
    return tuple(float(v) for v in cand[i]), float(dist[i])


def build_oracle(spec: ManifoldSpec, delta: float, S=()) -> OracleAutoencoder:
    """Build F, G and the bad set K0 with measure < delta, disjoint from S."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    S = np.asarray(S, dtype=np.float64).reshape(-1, 3)
    k = max(1, spec.max_component_dim)
    if k > 2:
        raise ValueError("catalog shapes have dimension at most 2")
    proj = geo.project(spec, S) if len(S) else None
    if proj is not None and (proj.distance > ON_K_TOL).any():
        i = int(np.argmax(proj.distance))
        raise ValueError(f"protected point {S[i].tolist()} is not on K")
    pitch, _, offset = _layout(k)
    m = len(spec)
    budget = delta / (2.0 * m)
    cuts = []
    for j, comp in enumerate(spec.components):
        center = [0.0] * k
        center[0] = offset + pitch * j
        mine = np.flatnonzero(proj.component_id == j) if proj is not None else np.zeros(0, int)
        if isinstance(comp, Point):
            cut, w = None, 0.0
        elif isinstance(comp, Circle):
            cut, room = _circle_cut(proj.params[mine, 0] if len(mine) else [])
            w = min(budget / (2.0 * comp.radius), math.pi / 2.0)
        else:
            dirs = (proj.nearest[mine] - comp.center) / comp.radius if len(mine) else np.zeros((0, 3))
            cut, room = _sphere_cut(dirs)
            s = math.sqrt(budget / (4.0 * math.pi * comp.radius**2))
            w = min(2.0 * math.asin(min(s, 1.0)), math.pi / 2.0)
        if cut is not None:
            if room <= MIN_CUT_ROOM:
                raise ValueError("protected set leaves no room for cut")
            if w >= room:
                w = room / 2.0
        cuts.append(ComponentCut(cut, float(w), tuple(center)))
    return OracleAutoencoder(spec, float(delta), S, tuple(cuts), k)


def oracle_encode(oa: OracleAutoencoder, x) -> np.ndarray:
    return oa.encode(np.asarray(x, dtype=np.float64)[None])[0]


def oracle_decode(oa: OracleAutoencoder, u) -> np.ndarray:
    return oa.decode(np.asarray(u, dtype=np.float64).reshape(1, -1))[0]


def bad_set_contains(oa: OracleAutoencoder, x) -> bool:
    return bool(oa.contains_batch(np.asarray(x, dtype=np.float64)[None])[0])


@dataclass(frozen=True)
class OracleReport:
    n_samples: int
    max_off_badset_error: float
    max_error_all: float
    mu_exact: float
    mu_hat: float
    mu_hat_sigma: float
    badset_hits_protected: int
    delta: float
    reach: float

    @property
    def ok(self) -> bool:
        return (self.max_off_badset_error <= 1e-9
                and self.mu_exact < self.delta
                and abs(self.mu_hat - self.mu_exact) <= 3.0 * self.mu_hat_sigma + 1e-12
                and self.badset_hits_protected == 0)


def badset_grid(oa: OracleAutoencoder, n_per_component: int) -> np.ndarray:
    """Points of K0 on a uniform grid over each bad arc / disk, cut point included."""
    pts = []
    for comp, cut in zip(oa.spec.components, oa.cuts):
        if cut.cut is None or n_per_component <= 0:
            continue
        w = cut.half_width
        if isinstance(comp, Circle):
            off = np.linspace(-w, w, max(n_per_component, 3) | 1)
            pts.append(comp.point(cut.cut + off))
        else:
            rows = max(2, int(math.sqrt(n_per_component / 2)))
            ang = np.linspace(0.0, w, rows)
            az = np.linspace(0.0, TWO_PI, 2 * rows, endpoint=False)
            A, Z = np.meshgrid(ang, az, indexing="ij")
            c = np.asarray(cut.cut)
            e1, e2 = geo._plane_frame(c)
            dirs = (np.cos(A)[..., None] * c
                    + np.sin(A)[..., None] * (np.cos(Z)[..., None] * e1 + np.sin(Z)[..., None] * e2))
            pts.append(comp.center + comp.radius * dirs.reshape(-1, 3))
    return np.vstack(pts) if pts else np.zeros((0, 3))


def verify_oracle(oa: OracleAutoencoder, n_samples: int, seed: int,
                  badset_points: int = 10_000) -> OracleReport:
    """Check exactness off K0, the measure of K0, and protection of S."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    pts = geo.sample_uniform(oa.spec, n_samples, seed)
    X = pts.coords
    err = np.linalg.norm(oa.reconstruct(X) - X, axis=1)
    inside = oa.contains_batch(X)
    total = geo.total_measure(oa.spec)
    p_hat = float(inside.mean())
    p_true = oa.bad_set_measure / total
    sigma = total * math.sqrt(p_true * (1.0 - p_true) / n_samples)
    G = badset_grid(oa, badset_points)
    max_all = float(err.max())
    if len(G):
        max_all = max(max_all, float(np.linalg.norm(oa.reconstruct(G) - G, axis=1).max()))
    hits = int(oa.contains_batch(oa.protected).sum()) if len(oa.protected) else 0
    return OracleReport(
        n_samples=n_samples,
        max_off_badset_error=float(err[~inside].max()) if (~inside).any() else 0.0,
        max_error_all=max_all,
        mu_exact=oa.bad_set_measure,
        mu_hat=p_hat * total,
        mu_hat_sigma=sigma,
        badset_hits_protected=hits,
        delta=oa.delta,
        reach=oa.reach,
    )
