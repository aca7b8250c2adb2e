"""INI run configuration.

Example::

    [grid]
    n_sites = 16

    [scaling]
    law = power
    alpha = 2

    [reaction]
    birth = logistic
    birth_r = 1.0
    birth_K = 3.0
    death = linear
    death_beta1 = 0.5

    [perturbation]
    variant = sine_mode
    amplitude = 0.3
    mode = 1
    shape = sin
    temporal = constant

    [initial]
    variant = smooth
    a = 1.0
    b = 0.5
    mode = 1

    [run]
    t_final = 0.25
    seed = 1
    replicas = 20

Every key required by the chosen variant must be present and no other key
may appear.
"""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import ConfigError, ValidationError
from .lattice import (InitialProfile, Perturbation, RateFunction, ReactionSpec,
                      ScalingLaw, TorusGrid, _REACTION_PARAMS)

SECTIONS = ("grid", "scaling", "reaction", "perturbation", "initial", "run")


@dataclass(frozen=True)
class RunConfig:
    grid: TorusGrid
    scaling: ScalingLaw
    reaction: ReactionSpec
    perturbation: Perturbation
    initial: InitialProfile
    t_final: float
    seed: int
    replicas: int
    config_hash: str = ""

    @property
    def ell(self) -> int:
        return self.scaling.resolve(self.grid.n_sites, u_max=max(10.0, 2 * self.initial.sup()))

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _take(section, name, keys, conv=float):
    if keys.get(name) is None:
        raise ConfigError(f"[{section}] missing key {name!r}")
    raw = keys.pop(name)
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {name} = {raw!r}: {exc}") from None


def _finish(section, keys):
    if keys:
        raise ConfigError(f"[{section}] unknown key(s): {', '.join(sorted(keys))}")


def _int(s):
    v = float(s)
    if v != int(v):
        raise ValueError("expected an integer")
    return int(v)


def _rate(section, prefix, keys):
    family = _take(section, prefix, keys, str).strip().lower()
    if family not in _REACTION_PARAMS:
        raise ConfigError(f"[{section}] unknown {prefix} family {family!r}")
    params = tuple(_take(section, f"{prefix}_{p}", keys) for p in _REACTION_PARAMS[family])
    return RateFunction(family, params)


def parse_config(text: str) -> RunConfig:
    """Parse configuration text; raise ``ConfigError`` on any problem."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep parameter names such as birth_K
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    extra = set(cp.sections()) - set(SECTIONS)
    if extra:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(extra))}")
    for s in SECTIONS:
        if not cp.has_section(s):
            raise ConfigError(f"missing section [{s}]")
    sec = {s: dict(cp.items(s)) for s in SECTIONS}

    try:
        keys = sec["grid"]
        grid = TorusGrid(_take("grid", "n_sites", keys, _int))
        _finish("grid", keys)

        keys = sec["scaling"]
        law = _take("scaling", "law", keys, str).strip().lower()
        if law == "power":
            scaling = ScalingLaw.power(_take("scaling", "alpha", keys))
        elif law == "exponential":
            scaling = ScalingLaw.exponential(_take("scaling", "c", keys))
        elif law == "explicit":
            scaling = ScalingLaw.explicit(_take("scaling", "ell", keys, _int))
        else:
            raise ConfigError(f"[scaling] unknown law {law!r}")
        _finish("scaling", keys)

        keys = sec["reaction"]
        reaction = ReactionSpec(_rate("reaction", "birth", keys), _rate("reaction", "death", keys))
        _finish("reaction", keys)

        keys = sec["perturbation"]
        variant = _take("perturbation", "variant", keys, str).strip().lower()
        if variant == "zero":
            pert = Perturbation.zero()
        elif variant == "sine_mode":
            amp = _take("perturbation", "amplitude", keys)
            mode = _take("perturbation", "mode", keys, _int)
            shape = _take("perturbation", "shape", keys, str).strip().lower()
            temporal = _take("perturbation", "temporal", keys, str).strip().lower()
            rate = 0.0
            if temporal == "linear":
                rate = _take("perturbation", "slope", keys)
            elif temporal == "cosine":
                rate = _take("perturbation", "omega", keys)
            pert = Perturbation(amp, mode, shape, temporal, rate)
        else:
            raise ConfigError(f"[perturbation] unknown variant {variant!r}")
        _finish("perturbation", keys)

        keys = sec["initial"]
        variant = _take("initial", "variant", keys, str).strip().lower()
        if variant == "constant":
            initial = InitialProfile.constant(_take("initial", "gamma", keys))
        elif variant == "smooth":
            initial = InitialProfile.smooth(_take("initial", "a", keys), _take("initial", "b", keys),
                                            _take("initial", "mode", keys, _int))
        else:
            raise ConfigError(f"[initial] unknown variant {variant!r}")
        _finish("initial", keys)

        keys = sec["run"]
        t_final = _take("run", "t_final", keys)
        seed = _take("run", "seed", keys, _int)
        replicas = _take("run", "replicas", keys, _int)
        _finish("run", keys)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None

    if not t_final > 0:
        raise ConfigError("[run] t_final must be positive")
    if seed < 0 or replicas < 1:
        raise ConfigError("[run] seed must be >= 0 and replicas >= 1")
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
    return RunConfig(grid, scaling, reaction, pert, initial, t_final, seed, replicas, digest)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text)
