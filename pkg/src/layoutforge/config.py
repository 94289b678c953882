"""JSON run configuration.

Lengths are given in microns and stored in nm; a value that is not a
whole number of nm is rejected, as is any key the schema does not know.
Every error names the offending field, e.g. ``via.m1.min_t2t``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

from .features import CcasConfig
from .geometry import UnitError, um_to_dbu
from .learning.losses import LossKind, SurrogateLoss
from .learning.pairwise import TrainConfig
from .metal import MetalSpec, Orientation
from .via import ViaSpec, default_metals

METAL_KEYS = ("wire_cd", "track_pitch", "min_t2t", "max_t2t", "min_length", "max_length", "t2t_grid",
              "total_x", "total_y")
VIA_KEYS = ("via1_x", "via1_y", "m1_enc", "m2_enc", "min_via1_pitch_x", "min_via1_pitch_y", "total_x", "total_y")
WIRE_RULE_KEYS = ("min_t2t", "max_t2t", "min_length", "max_length", "t2t_grid")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _section(doc: Any, path: str, required: tuple = (), optional: tuple = ()) -> dict:
    if not isinstance(doc, dict):
        raise ConfigError(path, "expected an object")
    unknown = sorted(set(doc) - set(required) - set(optional))
    if unknown:
        raise ConfigError(_join(path, unknown[0]), "unknown key")
    for key in required:
        if key not in doc:
            raise ConfigError(_join(path, key), "missing")
    return doc


def _nm(doc: dict, key: str, path: str) -> int:
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError(_join(path, key), f"expected a length in um, got {value!r}")
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(_join(path, key), "length must be finite")
    try:
        return um_to_dbu(value)
    except (UnitError, OverflowError) as exc:
        raise ConfigError(_join(path, key), str(exc)) from None


def _int(doc: dict, key: str, path: str, default=None, minimum=None) -> int:
    value = doc.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(_join(path, key), f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(_join(path, key), f"must be >= {minimum}")
    return value


def _float(doc: dict, key: str, path: str, default=None) -> float:
    value = doc.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(_join(path, key), f"expected a finite number, got {value!r}")
    return float(value)


def _build(path: str, factory, **kwargs):
    try:
        return factory(**kwargs)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


@dataclass(frozen=True)
class FeatureSettings:
    pixel_size: int = 10        # nm
    clip_x: int = 1200          # nm
    clip_y: int = 1200
    blocks_per_side: int = 12
    keep: int = 32
    layers: Optional[tuple[int, ...]] = None   # rasterised layers; None = all
    label_layer: Optional[int] = None          # layer counted for the proxy label
    ccas: Optional[CcasConfig] = None


@dataclass(frozen=True)
class TrainSettings:
    losses: tuple[LossKind, ...] = tuple(LossKind)
    config: TrainConfig = TrainConfig()
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    test_fraction: float = 0.3
    beta: float = 3.0
    gamma: float = 0.7
    p: float = 2.0

    def loss(self, kind) -> SurrogateLoss:
        return SurrogateLoss(LossKind(kind), beta=self.beta, gamma=self.gamma, p=self.p)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    metal: Optional[dict] = None      # MetalSpec keyword arguments, nm
    via: Optional[dict] = None        # ViaSpec pieces, nm
    features: FeatureSettings = FeatureSettings()
    train: TrainSettings = TrainSettings()
    output: dict = field(default_factory=dict)
    source: Optional[str] = None

    def with_seed(self, seed: Optional[int]) -> "RunConfig":
        return self if seed is None else replace(self, seed=seed)

    def with_size(self, total_x: int, total_y: int) -> "RunConfig":
        """Same rules on a different cell size (nm)."""
        out = self
        if self.metal is not None:
            out = replace(out, metal={**self.metal, "total_x": total_x, "total_y": total_y})
        if self.via is not None:
            out = replace(out, via={**self.via, "total_x": total_x, "total_y": total_y})
        return out

    @property
    def area_um2(self) -> float:
        sec = self.metal if self.metal is not None else self.via
        if sec is None:
            return 0.0
        return sec["total_x"] * sec["total_y"] / 1e6

    def metal_spec(self) -> MetalSpec:
        if self.metal is None:
            raise ConfigError("metal", "missing")
        return _build("metal", MetalSpec, seed=self.seed, **self.metal)

    def via_spec(self) -> ViaSpec:
        if self.via is None:
            raise ConfigError("via", "missing")
        v = dict(self.via)
        m1_rules, m1_layer = v.pop("m1"), v.pop("m1_layer")
        m2_rules, m2_layer = v.pop("m2"), v.pop("m2_layer")
        name = v.pop("name")
        try:
            m1, m2 = default_metals(v["via_x"], v["via_y"], v["via_pitch_x"], v["via_pitch_y"],
                                    v.pop("total_x"), v.pop("total_y"), m1_rules, m2_rules,
                                    seed=self.seed, m1_layer=m1_layer, m2_layer=m2_layer, name=name)
        except ValueError as exc:
            raise ConfigError("via", str(exc)) from None
        return _build("via", ViaSpec, m1=m1, m2=m2, seed=self.seed, name=name, **v)


def _parse_metal(doc, path="metal") -> dict:
    _section(doc, path, METAL_KEYS, ("orientation", "layer", "name"))
    out = {k: _nm(doc, k, path) for k in METAL_KEYS}
    try:
        out["orientation"] = Orientation(doc.get("orientation", "horizontal"))
    except ValueError:
        raise ConfigError(_join(path, "orientation"), "expected 'horizontal' or 'vertical'") from None
    out["layer_id"] = _int(doc, "layer", path, default=1, minimum=0)
    out["name"] = doc.get("name", "METAL")
    # fail early, with the section path, on inconsistent rules
    _build(path, MetalSpec, **out)
    return out


def _parse_wire_rules(doc, path) -> dict:
    _section(doc, path, WIRE_RULE_KEYS, ("layer",))
    return {k: _nm(doc, k, path) for k in WIRE_RULE_KEYS}


def _parse_via(doc, path="via") -> dict:
    _section(doc, path, VIA_KEYS + ("via_fraction", "m1", "m2"), ("layer", "name"))
    nm = {k: _nm(doc, k, path) for k in VIA_KEYS}
    out = {
        "via_x": nm["via1_x"], "via_y": nm["via1_y"],
        "enclosure_x": nm["m1_enc"], "enclosure_y": nm["m2_enc"],
        "via_pitch_x": nm["min_via1_pitch_x"], "via_pitch_y": nm["min_via1_pitch_y"],
        "total_x": nm["total_x"], "total_y": nm["total_y"],
        "density": _float(doc, "via_fraction", path),
        "via_layer_id": _int(doc, "layer", path, default=2, minimum=0),
        "name": doc.get("name", "VIA"),
    }
    for sub, default_layer in (("m1", 1), ("m2", 3)):
        out[sub] = _parse_wire_rules(doc[sub], _join(path, sub))
        out[f"{sub}_layer"] = _int(doc[sub], "layer", _join(path, sub), default=default_layer, minimum=0)
    return out


def _parse_features(doc, path="features") -> FeatureSettings:
    _section(doc, path, (), ("pixel_size", "clip_x", "clip_y", "blocks_per_side", "keep", "layers",
                              "label_layer", "ccas"))
    kw = {}
    for key in ("pixel_size", "clip_x", "clip_y"):
        if key in doc:
            kw[key] = _nm(doc, key, path)
    for key in ("blocks_per_side", "keep"):
        if key in doc:
            kw[key] = _int(doc, key, path, minimum=1)
    if "layers" in doc:
        layers = doc["layers"]
        if not isinstance(layers, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in layers):
            raise ConfigError(_join(path, "layers"), "expected a list of layer numbers")
        kw["layers"] = tuple(layers)
    if "label_layer" in doc:
        kw["label_layer"] = _int(doc, "label_layer", path, minimum=0)
    if "ccas" in doc:
        cpath = _join(path, "ccas")
        c = _section(doc["ccas"], cpath, ("r_max", "n_c"), ("d", "bins"))
        kw["ccas"] = _build(cpath, CcasConfig, r_max=_int(c, "r_max", cpath, minimum=1),
                            n_c=_int(c, "n_c", cpath, minimum=1), d=_int(c, "d", cpath, default=0),
                            bins=_int(c, "bins", cpath, default=16))
    fs = FeatureSettings(**kw)
    if fs.pixel_size <= 0:
        raise ConfigError(_join(path, "pixel_size"), "must be positive")
    if fs.clip_x % fs.pixel_size or fs.clip_y % fs.pixel_size:
        raise ConfigError(_join(path, "clip_x"), "clip size must be a multiple of pixel_size")
    return fs


def _parse_train(doc, path="train") -> TrainSettings:
    _section(doc, path, (), ("losses", "learning_rate", "decay", "batch", "decay_interval", "iterations",
                              "log_every", "seeds", "test_fraction", "beta", "gamma", "p"))
    kw = {}
    if "losses" in doc:
        try:
            kw["losses"] = tuple(LossKind(x) for x in doc["losses"])
        except (ValueError, TypeError):
            raise ConfigError(_join(path, "losses"), f"expected a list from {[k.value for k in LossKind]}") from None
    tc = {}
    for key in ("learning_rate", "decay"):
        if key in doc:
            tc[key] = _float(doc, key, path)
    for key in ("batch", "decay_interval", "iterations", "log_every"):
        if key in doc:
            tc[key] = _int(doc, key, path)
    kw["config"] = _build(path, TrainConfig, **tc)
    if "seeds" in doc:
        seeds = doc["seeds"]
        if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
            raise ConfigError(_join(path, "seeds"), "expected a non-empty list of integers")
        kw["seeds"] = tuple(seeds)
    for key in ("test_fraction", "beta", "gamma", "p"):
        if key in doc:
            kw[key] = _float(doc, key, path)
    ts = TrainSettings(**kw)
    if not 0.0 < ts.test_fraction < 1.0:
        raise ConfigError(_join(path, "test_fraction"), "must be in (0, 1)")
    for kind in ts.losses:
        _build(path, ts.loss, kind=kind)
    return ts


def parse_config(doc: Any, source: Optional[str] = None) -> RunConfig:
    _section(doc, "", (), ("seed", "metal", "via", "features", "train", "output"))
    kw: dict = {"source": source}
    if "seed" in doc:
        kw["seed"] = _int(doc, "seed", "", minimum=0)
    if "metal" in doc:
        kw["metal"] = _parse_metal(doc["metal"])
    if "via" in doc:
        kw["via"] = _parse_via(doc["via"])
    if "features" in doc:
        kw["features"] = _parse_features(doc["features"])
    if "train" in doc:
        kw["train"] = _parse_train(doc["train"])
    if "output" in doc:
        out = _section(doc["output"], "output", (), ("path", "cell"))
        kw["output"] = dict(out)
    cfg = RunConfig(**kw)
    if cfg.via is not None:
        cfg.via_spec()
    return cfg


def load_config(path) -> RunConfig:
    """Read and validate a config file; OSError propagates for I/O failures."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: invalid JSON ({exc})") from None
    return parse_config(doc, source=str(path))


def shipped_config_dir() -> Path:
    return Path(__file__).resolve().parent / "configs"
