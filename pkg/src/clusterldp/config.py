"""Model files: JSON with types, mu, kappa and an optional kappa_N rule."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .measures import ModelError, TypeSpace, as_kernel, as_measure, check_support_mass

SCHEMA_VERSION = 1
MASS_TOL = 1e-12
KNOWN_KEYS = {"schema", "types", "mu", "kappa", "kappa_N", "seed", "output"}


def _line_of(text: str, key: str) -> int:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


@dataclass(frozen=True)
class ModelConfig:
    types: TypeSpace
    mu: np.ndarray
    kappa: np.ndarray
    kappa_rule: str = "fixed"
    rule_time: float = 1.0
    seed: int | None = None
    output: str | None = None
    source: str = "<memory>"

    @property
    def ntypes(self) -> int:
        return len(self.types)

    def kappa_N(self, N: int) -> np.ndarray:
        """Finite-N kernel: ``kappa`` itself, or ``N (1 - e^{-t kappa / N})`` for the coagulation rule."""
        if self.kappa_rule == "fixed":
            return self.kappa
        return N * -np.expm1(-self.rule_time * self.kappa / N)

    def kappa_limit(self) -> np.ndarray:
        """Limit of ``kappa_N``; ``t kappa`` under the coagulation rule."""
        return self.kappa if self.kappa_rule == "fixed" else self.rule_time * self.kappa


def _fail(path, line, msg):
    raise ModelError(f"{path}:{line}: {msg}")


def parse_model(text: str, source: str = "<string>") -> ModelConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    if not isinstance(data, dict):
        _fail(source, 1, "top level must be an object")
    schema = data.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        _fail(source, _line_of(text, "schema"), f"unsupported schema {schema!r} (expected {SCHEMA_VERSION})")
    unknown = set(data) - KNOWN_KEYS
    if unknown:
        key = sorted(unknown)[0]
        _fail(source, _line_of(text, key), f"unknown key {key!r}")
    for key in ("mu", "kappa"):
        if key not in data:
            _fail(source, 1, f"missing required key {key!r}")
    try:
        mu = as_measure(data["mu"], name="mu")
    except (ModelError, ValueError, TypeError) as exc:
        _fail(source, _line_of(text, "mu"), str(exc))
    labels = data.get("types", [str(i) for i in range(mu.size)])
    try:
        types = TypeSpace(tuple(labels))
    except (ModelError, TypeError) as exc:
        _fail(source, _line_of(text, "types"), str(exc))
    if len(types) != mu.size:
        _fail(source, _line_of(text, "mu"), f"mu has {mu.size} entries for {len(types)} types")
    if abs(mu.sum() - 1.0) > MASS_TOL:
        _fail(source, _line_of(text, "mu"), f"mu must sum to 1 (got {mu.sum():.15g})")
    try:
        check_support_mass(mu)
    except ModelError as exc:
        _fail(source, _line_of(text, "mu"), str(exc))
    try:
        kappa = as_kernel(data["kappa"], ntypes=mu.size, name="kappa")
    except (ModelError, ValueError, TypeError) as exc:
        _fail(source, _line_of(text, "kappa"), str(exc))
    rule, t = "fixed", 1.0
    if "kappa_N" in data:
        spec = data["kappa_N"]
        line = _line_of(text, "kappa_N")
        if not isinstance(spec, dict) or spec.get("rule") not in ("fixed", "coagulation"):
            _fail(source, line, 'kappa_N must be {"rule": "fixed"} or {"rule": "coagulation", "t": ...}')
        rule = spec["rule"]
        t = float(spec.get("t", 1.0))
        if not t > 0:
            _fail(source, line, "coagulation time t must be positive")
    seed = data.get("seed")
    if seed is not None and (not isinstance(seed, int) or seed < 0):
        _fail(source, _line_of(text, "seed"), "seed must be a nonnegative integer")
    return ModelConfig(types, mu, kappa, rule, t, seed, data.get("output"), source)


def load_model(path) -> ModelConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ModelError(f"{path}: cannot read model file: {exc.strerror}") from None
    return parse_model(text, str(path))
