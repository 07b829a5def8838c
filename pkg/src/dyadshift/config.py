"""Run configuration: JSON ingestion, defaults, and validation.

A config is a flat JSON object.  Recognized keys and defaults:

    d           spatial dimension (only 1 is supported by the operators)
    s           target smoothness order, integer >= 1
    eps         the epsilon in the coefficient decay exponent, > 0
    theta       boundary-proximity exponent in (0, 1]; default eps / (d + s)
    r           goodness scale separation; default is the smallest integer
                whose union bound (8 d / theta) 2^(-r theta) is <= 1/2
    L           window level: the window is [0, 2^L)^d
    k_min, k_max  generation range of the window
    q           mesh exponent for wavelet tabulation; must be >= k_max + 6
    filter      built-in filter name or path to a filter file
    kernel      operator name: hilbert, smoothed_hilbert, identity
    seed        base RNG seed
    N_max       truncation depth for convergence experiments
    n_omega     number of grid samples
    mc_samples  Monte Carlo sample count for badness statistics
    outdir      output directory for reports and the manifest
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass

from .dyadic import union_bound
from .filters import FilterError


class ConfigError(ValueError):
    """Invalid or unsatisfiable run configuration."""


@dataclass
class RunConfig:
    d: int = 1
    s: int = 1
    eps: float = 0.5
    theta: float | None = None
    r: int | None = None
    L: int = 4
    k_min: int = 0
    k_max: int = 5
    q: int | None = None
    filter: str = "haar"
    kernel: str = ""
    seed: int = 0
    N_max: int = 5
    n_omega: int = 30
    mc_samples: int = 100000
    outdir: str = "runs"

    def resolved(self) -> "RunConfig":
        """Fill defaults and validate; returns self for chaining."""
        if not isinstance(self.s, int) or self.s < 1:
            raise ConfigError("invalid config: s must be an integer >= 1")
        if not self.eps > 0.0:
            raise ConfigError("invalid config: eps must be > 0")
        if self.theta is None:
            self.theta = self.eps / (self.d + self.s)
        if not 0.0 < self.theta <= 1.0:
            raise ConfigError("invalid config: theta must lie in (0, 1]")
        if self.r is None:
            self.r = default_r(self.d, self.theta)
        if self.r < 1:
            raise ConfigError("invalid config: r must be >= 1")
        if self.q is None:
            self.q = self.k_max + 6
        if self.q < self.k_max + 6:
            raise ConfigError(
                f"invalid config: q={self.q} must be >= k_max + 6 "
                f"= {self.k_max + 6}")
        if not self.kernel:
            raise ConfigError("invalid config: missing kernel")
        if self.kernel not in ("hilbert", "smoothed_hilbert", "identity"):
            raise ConfigError(f"invalid config: unknown kernel {self.kernel!r}")
        if self.k_min > self.k_max:
            raise ConfigError("invalid config: k_min must be <= k_max")
        if self.L < -self.k_min:
            raise ConfigError("invalid config: need L >= -k_min so the "
                              "coarsest cubes fit in the window")
        if self.d != 1:
            raise ConfigError("invalid config: only d = 1 is supported")
        self._check_filter()
        return self

    def _check_filter(self) -> None:
        from .wavelets import build_system
        try:
            probe = build_system(self.filter, q=6, s_target=self.s,
                                 strict=False)
        except (FilterError, OSError) as exc:
            raise ConfigError(f"invalid config: filter: {exc}") from exc
        if probe.v < self.s - 1:
            raise ConfigError(
                f"unsatisfiable (u,v): insufficient moments "
                f"(filter {self.filter!r} has v={probe.v} < s-1={self.s - 1})")

    def manifest_dict(self) -> dict:
        return asdict(self)


def default_r(d: int, theta: float) -> int:
    """Smallest r with (8 d / theta) 2^(-r theta) <= 1/2."""
    r = 1
    while union_bound(d, r, theta) > 0.5:
        r += 1
        if r > 10000:
            raise ConfigError("invalid config: no admissible r below 10000")
    return r


_KEYS = set(RunConfig.__dataclass_fields__)


def parse_config(source: str) -> RunConfig:
    """Parse a config from a file path or inline JSON text."""
    text = source
    if not source.lstrip().startswith("{"):
        if not os.path.exists(source):
            raise ConfigError(f"invalid config: no such file {source!r}")
        with open(source) as fh:
            text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid config: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError("invalid config: top level must be an object")
    unknown = set(raw) - _KEYS
    if unknown:
        raise ConfigError(
            f"invalid config: unknown keys {sorted(unknown)}")
    cfg = RunConfig(**raw)
    return cfg.resolved()


def manifest_json(cfg: RunConfig, extra: dict | None = None) -> str:
    """Deterministic manifest text: config echo plus derived quantities."""
    payload = {"config": cfg.manifest_dict()}
    payload["derived"] = {
        "union_bound": union_bound(cfg.d, cfg.r, cfg.theta),
    }
    if extra:
        payload["results"] = extra
    return json.dumps(payload, sort_keys=True, indent=2,
                      default=_json_fallback) + "\n"


def _json_fallback(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, float) and math.isnan(obj):
        return "nan"
    return str(obj)
