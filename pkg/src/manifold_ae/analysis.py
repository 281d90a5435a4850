"""Reconstruction-error analytics for encoder/decoder pairs on catalog manifolds.

A model is anything with ``encode(X)`` and ``decode(U)`` acting on batches
(the oracle and :class:`~manifold_ae.neural.NeuralAutoencoder` both qualify).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .geometry import Circle, ManifoldSpec, Sphere2

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def default_epsilon_grid() -> list[float]:
    return np.logspace(-6.0, math.log10(2.0), 20).tolist()


def _reconstruct(model, X) -> np.ndarray:
    if hasattr(model, "reconstruct"):
        return model.reconstruct(X)
    return model.decode(model.encode(X))


def reconstruction_errors(model, points) -> np.ndarray:
    """``|G(F(x)) - x|`` per point, in input order."""
    X = np.asarray(getattr(points, "coords", points), dtype=np.float64)
    if X.size == 0:
        return np.zeros(0)
    X = np.atleast_2d(X)
    dim = getattr(model, "ambient_dim", X.shape[1])
    if X.shape[1] != dim:
        raise ValueError(f"points have dimension {X.shape[1]}, model expects {dim}")
    return np.linalg.norm(_reconstruct(model, X) - X, axis=1)


def _error_at(model, comp, params) -> np.ndarray:
    X = comp.param_point(np.atleast_2d(params))
    return np.linalg.norm(_reconstruct(model, X) - X, axis=1)


def _refine_circle(model, comp, theta, h, iters) -> float:
    # golden-section search for a maximum on [theta - h, theta + h]
    f = lambda t: float(_error_at(model, comp, [[t]])[0])
    a, b = theta - h, theta + h
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    best = max(fc, fd)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
        best = max(best, fc, fd)
    return best


def _refine_sphere(model, comp, p0, h, iters) -> float:
    # 3x3 stencil pattern search, step halved every round
    p = np.asarray(p0, dtype=np.float64)
    step = np.asarray(h, dtype=np.float64)
    offsets = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=np.float64)
    best = float(_error_at(model, comp, p)[0])
    for _ in range(iters):
        cand = p + offsets * step
        vals = _error_at(model, comp, cand)
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, p = float(vals[i]), cand[i]
        step = step / 2.0
    return best


def sup_error(model, spec: ManifoldSpec, grid_per_component: int = 100_000,
              refine_iters: int = 40) -> float:
    """Largest reconstruction error found on a chart grid plus local refinement.

    This is a max of point evaluations, so it never exceeds the true sup.
    """
    if grid_per_component < 2:
        raise ValueError("grid_per_component must be >= 2")
    best = 0.0
    for comp in spec.components:
        params = comp.grid_params(grid_per_component)
        X = comp.param_point(params) if comp.intrinsic_dim else comp.location[None]
        err = np.linalg.norm(_reconstruct(model, X) - X, axis=1)
        i = int(np.argmax(err))
        best = max(best, float(err[i]))
        if refine_iters <= 0 or comp.intrinsic_dim == 0:
            continue
        if isinstance(comp, Circle):
            h = geo.TWO_PI / len(params)
            best = max(best, _refine_circle(model, comp, float(params[i, 0]), h, refine_iters))
        elif isinstance(comp, Sphere2):
            rows = len(np.unique(params[:, 0]))
            cols = len(params) // rows
            h = (math.pi / rows, geo.TWO_PI / cols)
            best = max(best, _refine_sphere(model, comp, params[i], h, refine_iters))
    return best


def bad_set_measure(errors, epsilon: float, total_measure: float) -> float:
    """Estimated intrinsic measure of ``{x : error(x) >= epsilon}``."""
    errors = np.asarray(errors, dtype=np.float64)
    if errors.size == 0:
        raise ValueError("no errors to estimate a measure from")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return float(np.count_nonzero(errors >= epsilon)) / errors.size * total_measure


@dataclass(frozen=True)
class ReachBound:
    sup_estimate: float
    reach: float
    slack: float
    bound_satisfied: bool
    note: str


def reach_bound_report(sup_estimate: float, reach: float, slack: float = 0.1) -> ReachBound:
    """Compare a measured sup-error against the reach floor.

    Any continuous autoencoder through a k-dim bottleneck on a closed
    k-manifold has sup error >= reach, so a failure here means the search
    grid missed the error spike.
    """
    if not 0.0 <= slack < 1.0:
        raise ValueError("slack must lie in [0, 1)")
    ok = bool(sup_estimate >= reach * (1.0 - slack))
    note = "ok" if ok else "sup estimate below reach floor: search grid too coarse"
    return ReachBound(float(sup_estimate), float(reach), float(slack), ok, note)


@dataclass
class AnalysisReport:
    per_point_errors: np.ndarray
    sup_error_estimate: float
    epsilon_grid: list
    bad_set_measure_at_epsilon: list
    reach: float
    bound_satisfied: bool
    sample_count: int

    def to_dict(self) -> dict:
        return {
            "sup_error_estimate": self.sup_error_estimate,
            "reach": self.reach,
            "bound_satisfied": self.bound_satisfied,
            "epsilon_grid": list(self.epsilon_grid),
            "mu_hat": list(self.bad_set_measure_at_epsilon),
            "n_samples": self.sample_count,
        }


def analyze(model, spec: ManifoldSpec, points, epsilon_grid=None,
            grid_per_component: int = 100_000, refine_iters: int = 40,
            slack: float = 0.1) -> AnalysisReport:
    eps = sorted(default_epsilon_grid() if epsilon_grid is None else list(epsilon_grid))
    errors = reconstruction_errors(model, points)
    total = geo.total_measure(spec)
    mu = [bad_set_measure(errors, e, total) for e in eps] if errors.size else [0.0] * len(eps)
    sup = sup_error(model, spec, grid_per_component, refine_iters)
    if errors.size:
        sup = max(sup, float(errors.max()))
    reach = geo.analytic_reach(spec).reach
    verdict = reach_bound_report(sup, reach, slack)
    return AnalysisReport(errors, sup, eps, mu, reach, verdict.bound_satisfied, len(errors))


def latent_overlap_fraction(latent, component_id) -> float:
    """Fraction of points whose 1-d code falls inside another component's code range."""
    u = np.asarray(latent, dtype=np.float64).reshape(len(component_id), -1)[:, 0]
    cid = np.asarray(component_id)
    if len(u) == 0:
        return 0.0
    inside = np.zeros(len(u), dtype=bool)
    for c in np.unique(cid):
        mine = cid == c
        lo, hi = u[mine].min(), u[mine].max()
        inside |= ~mine & (u >= lo) & (u <= hi)
    return float(inside.mean())
