"""Run configuration: key = value files overridden by command-line flags."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import DomainError
from .hamiltonian import ControlMode


@dataclass
class RunConfig:
    quad_tol: float = 1e-10
    ode_rtol: float = 1e-10
    ode_atol: float = 1e-12
    tau_cap: float = 200.0
    grid_psi: int = 121
    grid_phi: int = 61
    fan: int = 24
    seed: int = 0
    output_dir: str = "out"
    mode: str = "full"

    def __post_init__(self):
        for name in ("quad_tol", "ode_rtol", "ode_atol", "tau_cap"):
            if not getattr(self, name) > 0.0:
                raise DomainError(f"{name} must be positive")
        for name in ("grid_psi", "grid_phi"):
            if getattr(self, name) < 2:
                raise DomainError(f"{name} must be at least 2")
        ControlMode.parse(self.mode)

    @property
    def control_mode(self) -> ControlMode:
        return ControlMode.parse(self.mode)

    @property
    def out(self) -> Path:
        p = Path(self.output_dir)
        p.mkdir(parents=True, exist_ok=True)
        return p

    def quick(self) -> "RunConfig":
        """Grid densities divided by four."""
        return dataclasses.replace(self, grid_psi=max(2, self.grid_psi // 4),
                                   grid_phi=max(2, self.grid_phi // 4),
                                   fan=max(2, self.fan // 4))


def parse_kv(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment, quotes are stripped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise DomainError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if len(val) >= 2 and val[0] == val[-1] and val[0] in "\"'":
            val = val[1:-1]
        out[key.replace("-", "_")] = val
    return out


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    values: dict = {}
    if path is not None:
        values.update(parse_kv(Path(path).read_text()))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    kw = {}
    for key, val in values.items():
        if key not in fields:
            raise DomainError(f"unknown config key {key!r}")
        typ = type(fields[key].default)
        try:
            kw[key] = typ(val) if not isinstance(val, typ) else val
        except ValueError as exc:
            raise DomainError(f"bad value for {key}: {val!r}") from exc
    return RunConfig(**kw)
