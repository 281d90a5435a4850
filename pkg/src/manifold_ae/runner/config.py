"""Experiment configuration: a strict JSON schema with defaults.

Errors are reported with the JSON path of the offending value, e.g.
``$.architecture.encoder_widths[-1]``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

from ..analysis import default_epsilon_grid
from ..geometry import ManifoldSpec, component_from_dict, interlaced_circles, unit_circle
from ..neural import TrainConfig, default_activations

PRESETS = {"interlaced_circles": interlaced_circles, "unit_circle": unit_circle}


class ConfigError(ValueError):
    pass


def _reject_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ConfigError(f"duplicate key {k!r}")
        out[k] = v
    return out


def _check_keys(d, path, allowed, required=()):
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}: unknown key")
    for k in required:
        if k not in d:
            raise ConfigError(f"{path}.{k}: missing required key")


def _int(d, key, path, default, lo=None):
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}.{key}: expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(f"{path}.{key}: must be >= {lo}, got {v}")
    return v


def _float(d, key, path, default, positive=False, lo=None, hi=None):
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{path}.{key}: expected a finite number, got {v!r}")
    v = float(v)
    if positive and not v > 0:
        raise ConfigError(f"{path}.{key}: must be positive, got {v}")
    if lo is not None and v < lo:
        raise ConfigError(f"{path}.{key}: must be >= {lo}, got {v}")
    if hi is not None and not v < hi:
        raise ConfigError(f"{path}.{key}: must be < {hi}, got {v}")
    return v


def _int_list(d, key, path, default):
    v = d.get(key, default)
    if not isinstance(v, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"{path}.{key}: expected a list of integers")
    if len(v) < 2:
        raise ConfigError(f"{path}.{key}: needs at least 2 widths")
    for i, x in enumerate(v):
        if x <= 0:
            raise ConfigError(f"{path}.{key}[{i}]: width must be positive, got {x}")
    return list(v)


@dataclass(frozen=True)
class OracleSection:
    delta: float
    protected_points: list
    n_random_protected: int = 0
    protected_seed: int = 0
    n_samples: int = 100_000
    seed: int = 0
    slack: float = 0.01


@dataclass(frozen=True)
class AnalysisSection:
    epsilon_grid: list = field(default_factory=default_epsilon_grid)
    sup_grid: int = 100_000
    refine_iters: int = 40
    slack: float = 0.1
    n_samples: int = 100_000
    seed: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    manifold_desc: dict
    manifold: ManifoldSpec
    n_per_component: int = 500
    n_points: int | None = None
    sampling_seed: int = 0
    encoder_widths: list = field(default_factory=lambda: [3, 128, 128, 128, 1])
    decoder_widths: list = field(default_factory=lambda: [1, 128, 128, 128, 3])
    encoder_activations: list = field(default_factory=lambda: default_activations(4))
    decoder_activations: list = field(default_factory=lambda: default_activations(4))
    training: TrainConfig = field(default_factory=TrainConfig)
    oracle: OracleSection | None = None
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    output_dir: str | None = None

    def to_dict(self) -> dict:
        t = self.training
        d = {
            "manifold": self.manifold_desc,
            "sampling": {"n_per_component": self.n_per_component, "n_points": self.n_points,
                         "seed": self.sampling_seed},
            "architecture": {
                "encoder_widths": self.encoder_widths, "decoder_widths": self.decoder_widths,
                "encoder_activations": self.encoder_activations,
                "decoder_activations": self.decoder_activations,
            },
            "training": {"epochs": t.epochs, "batch_size": t.batch_size,
                         "learning_rate": t.learning_rate, "beta1": t.beta1, "beta2": t.beta2,
                         "eps_adam": t.eps_adam, "seed": t.seed, "shuffle": t.shuffle},
            "analysis": {"epsilon_grid": self.analysis.epsilon_grid,
                         "sup_grid": self.analysis.sup_grid,
                         "refine_iters": self.analysis.refine_iters,
                         "slack": self.analysis.slack, "n_samples": self.analysis.n_samples,
                         "seed": self.analysis.seed},
            "output_dir": self.output_dir,
        }
        if self.oracle is not None:
            o = self.oracle
            d["oracle"] = {"delta": o.delta, "protected_points": o.protected_points,
                           "n_random_protected": o.n_random_protected,
                           "protected_seed": o.protected_seed, "n_samples": o.n_samples,
                           "seed": o.seed, "slack": o.slack}
        return d

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _parse_manifold(d, path):
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    if "preset" in d:
        _check_keys(d, path, {"preset"})
        name = d["preset"]
        if name not in PRESETS:
            raise ConfigError(f"{path}.preset: unknown preset {name!r} (known: {sorted(PRESETS)})")
        return PRESETS[name]()
    _check_keys(d, path, {"components"}, required=("components",))
    comps = d["components"]
    if not isinstance(comps, list) or not comps:
        raise ConfigError(f"{path}.components: expected a nonempty list")
    allowed = {"circle": {"kind", "center", "normal", "radius"},
               "sphere2": {"kind", "center", "radius"}, "point": {"kind", "location"}}
    parsed = []
    for i, c in enumerate(comps):
        p = f"{path}.components[{i}]"
        if not isinstance(c, dict) or c.get("kind") not in allowed:
            raise ConfigError(f"{p}.kind: expected one of {sorted(allowed)}")
        _check_keys(c, p, allowed[c["kind"]], required=tuple(allowed[c["kind"]]))
        try:
            parsed.append(component_from_dict(c))
        except (ValueError, TypeError) as e:
            raise ConfigError(f"{p}: {e}") from None
    try:
        return ManifoldSpec(tuple(parsed))
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from None


def _activations(d, key, path, n_layers):
    if key not in d:
        return default_activations(n_layers)
    v = d[key]
    if not isinstance(v, list) or len(v) != n_layers:
        raise ConfigError(f"{path}.{key}: expected a list of {n_layers} activations")
    for i, a in enumerate(v):
        if a not in ("relu", "linear"):
            raise ConfigError(f"{path}.{key}[{i}]: unknown activation {a!r}")
    return list(v)


def _points_list(v, path):
    if not isinstance(v, list):
        raise ConfigError(f"{path}: expected a list of 3-vectors")
    for i, p in enumerate(v):
        if (not isinstance(p, list) or len(p) != 3
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in p)):
            raise ConfigError(f"{path}[{i}]: expected a 3-vector")
    return [[float(x) for x in p] for p in v]


def config_from_dict(raw: dict) -> ExperimentConfig:
    _check_keys(raw, "$", {"manifold", "sampling", "architecture", "training", "oracle",
                           "analysis", "output_dir"}, required=("manifold",))
    spec = _parse_manifold(raw["manifold"], "$.manifold")

    s = raw.get("sampling", {})
    _check_keys(s, "$.sampling", {"n_per_component", "n_points", "seed"})
    n_per = _int(s, "n_per_component", "$.sampling", 500, lo=1)
    n_points = None if s.get("n_points") is None else _int(s, "n_points", "$.sampling", None, lo=1)
    s_seed = _int(s, "seed", "$.sampling", 0, lo=0)

    a = raw.get("architecture", {})
    ap = "$.architecture"
    _check_keys(a, ap, {"encoder_widths", "decoder_widths", "encoder_activations",
                        "decoder_activations"})
    enc = _int_list(a, "encoder_widths", ap, [3, 128, 128, 128, 1])
    dec = _int_list(a, "decoder_widths", ap, [1, 128, 128, 128, 3])
    if enc[-1] != dec[0]:
        raise ConfigError(
            f"{ap}.encoder_widths[-1] ({enc[-1]}) does not match {ap}.decoder_widths[0] ({dec[0]})"
        )
    if enc[0] != spec.ambient_dim:
        raise ConfigError(f"{ap}.encoder_widths[0] ({enc[0]}) must equal the ambient dimension 3")
    if dec[-1] != spec.ambient_dim:
        raise ConfigError(f"{ap}.decoder_widths[-1] ({dec[-1]}) must equal the ambient dimension 3")
    enc_act = _activations(a, "encoder_activations", ap, len(enc) - 1)
    dec_act = _activations(a, "decoder_activations", ap, len(dec) - 1)

    t = raw.get("training", {})
    tp = "$.training"
    _check_keys(t, tp, {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "eps_adam",
                        "seed", "shuffle"})
    shuffle = t.get("shuffle", True)
    if not isinstance(shuffle, bool):
        raise ConfigError(f"{tp}.shuffle: expected a boolean")
    training = TrainConfig(
        epochs=_int(t, "epochs", tp, 2000, lo=1),
        batch_size=_int(t, "batch_size", tp, 20, lo=1),
        learning_rate=_float(t, "learning_rate", tp, 1e-3, positive=True),
        beta1=_float(t, "beta1", tp, 0.9, lo=0.0, hi=1.0),
        beta2=_float(t, "beta2", tp, 0.999, lo=0.0, hi=1.0),
        eps_adam=_float(t, "eps_adam", tp, 1e-8, positive=True),
        seed=_int(t, "seed", tp, 0, lo=0),
        shuffle=shuffle,
    )

    oracle = None
    if raw.get("oracle") is not None:
        o, op = raw["oracle"], "$.oracle"
        _check_keys(o, op, {"delta", "protected_points", "n_random_protected", "protected_seed",
                            "n_samples", "seed", "slack"}, required=("delta",))
        oracle = OracleSection(
            delta=_float(o, "delta", op, None, positive=True),
            protected_points=_points_list(o.get("protected_points", []), f"{op}.protected_points"),
            n_random_protected=_int(o, "n_random_protected", op, 0, lo=0),
            protected_seed=_int(o, "protected_seed", op, 0, lo=0),
            n_samples=_int(o, "n_samples", op, 100_000, lo=1),
            seed=_int(o, "seed", op, 0, lo=0),
            slack=_float(o, "slack", op, 0.01, lo=0.0, hi=1.0),
        )

    an, anp = raw.get("analysis", {}), "$.analysis"
    _check_keys(an, anp, {"epsilon_grid", "sup_grid", "refine_iters", "slack", "n_samples", "seed"})
    eps = an.get("epsilon_grid", default_epsilon_grid())
    if (not isinstance(eps, list) or not eps
            or not all(isinstance(e, (int, float)) and not isinstance(e, bool) and e > 0 for e in eps)):
        raise ConfigError(f"{anp}.epsilon_grid: expected a nonempty list of positive numbers")
    analysis = AnalysisSection(
        epsilon_grid=sorted(float(e) for e in eps),
        sup_grid=_int(an, "sup_grid", anp, 100_000, lo=2),
        refine_iters=_int(an, "refine_iters", anp, 40, lo=0),
        slack=_float(an, "slack", anp, 0.1, lo=0.0, hi=1.0),
        n_samples=_int(an, "n_samples", anp, 100_000, lo=1),
        seed=_int(an, "seed", anp, 1, lo=0),
    )

    out = raw.get("output_dir")
    if out is not None and not isinstance(out, str):
        raise ConfigError("$.output_dir: expected a string")

    return ExperimentConfig(
        manifold_desc=raw["manifold"], manifold=spec, n_per_component=n_per, n_points=n_points,
        sampling_seed=s_seed, encoder_widths=enc, decoder_widths=dec,
        encoder_activations=enc_act, decoder_activations=dec_act, training=training,
        oracle=oracle, analysis=analysis, output_dir=out,
    )


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e}") from None
    return config_from_dict(raw)


def circles_config(**training) -> ExperimentConfig:
    """The interlaced-circles experiment: 500 points per circle, 3-128-128-128-1
    encoder, mirrored decoder, 2000 epochs of batch-20 Adam."""
    raw = {"manifold": {"preset": "interlaced_circles"},
           "sampling": {"n_per_component": 500}}
    if training:
        raw["training"] = training
    return config_from_dict(raw)
