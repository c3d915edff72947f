"""Tolerances and numerical knobs, overridable from a key=value file.

Defaults reflect double precision driven through order-3 jets, which
loses roughly six digits in the worst chains; every gate that a test or
report judges against lives here so runs are reproducible.
"""

from __future__ import annotations

import dataclasses
import os


@dataclasses.dataclass
class Config:
    # rank / decomposition gates
    eps_rank: float = 1e-9        # smallest singular value (scaled) for rank-2 tests
    eps_dec: float = 1e-8         # residual gate for Dx = Omega Lambda^T
    eps_sing: float = 1e-9        # |lambda| below this counts as singular
    eps_k: float = 1e-10          # |K_Omega| below this counts as parabolic

    # limit probe (singular-set extrapolation)
    probe_directions: int = 8
    probe_r0: float = 4e-3
    probe_ratio: float = 0.5
    probe_levels: int = 8
    probe_richardson: int = 3
    tol_limit: float = 1e-4       # relative agreement across directions

    # reconstruction
    tol_compat: float = 1e-6      # compatibility residual gate (scaled by max ||D||)
    tol_path: float = 1e-4        # path-independence audit gate
    rk4_step: float = 1e-3

    # jets / quadrature / finite differences
    jet_order: int = 3
    quad_nodes: int = 32
    quad_max_nodes: int = 512
    fd_step: float = 1e-3

    # parallelism (grid sweeps chunked across threads when > 1)
    threads: int = 1

    def replace(self, **kw) -> "Config":
        return dataclasses.replace(self, **kw)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(Config)}


def _coerce(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    if kind in ("int", int):
        return int(raw)
    return float(raw)


def load_config(path: str | None = None, overrides: dict | None = None) -> Config:
    """Build a Config from an optional key=value file plus overrides.

    File format: one `name = value` per line, `#` comments, blank lines
    ignored. Unknown keys are an error so typos do not silently pass.
    """
    values: dict = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key = value")
                key, raw = (part.strip() for part in line.split("=", 1))
                if key not in _FIELD_TYPES:
                    raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
                values[key] = _coerce(key, raw)
    if overrides:
        for key, val in overrides.items():
            if key not in _FIELD_TYPES:
                raise ValueError(f"unknown config key {key!r}")
            values[key] = _coerce(key, str(val)) if isinstance(val, str) else val
    cfg = Config(**values)
    cap = os.environ.get("FRONTAL_LAB_THREADS")
    if cap is not None:
        cfg.threads = max(1, min(cfg.threads, int(cap)))
    return cfg


DEFAULT = Config()
