"""Run configuration shared by the recognizer and the command line."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .errors import UsageError
from .hmm import topology_mask
from .lpc import LpcConfig
from .signal_io import FramingConfig

TOPOLOGIES = ("ergodic", "left-to-right")


@dataclass(frozen=True)
class RunConfig:
    framing: FramingConfig = field(default_factory=FramingConfig)
    lpc: LpcConfig = field(default_factory=LpcConfig)
    codebook_size: int = 64
    n_states: int = 3
    topology: str = "ergodic"
    max_iters: int = 100
    tol: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        self.lpc.check_frame_len(self.framing.frame_len)
        if self.codebook_size < 1:
            raise UsageError(f"codebook_size must be >= 1, got {self.codebook_size}")
        if self.n_states < 1:
            raise UsageError(f"n_states must be >= 1, got {self.n_states}")
        if self.topology not in TOPOLOGIES:
            raise UsageError(f"topology must be one of {TOPOLOGIES}, got {self.topology!r}")
        if self.max_iters < 1:
            raise UsageError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise UsageError(f"tol must be > 0, got {self.tol}")

    @property
    def transition_mask(self):
        return topology_mask(self.n_states, self.topology)

    def to_flat(self):
        """Flat key/value view, the layout of a config file."""
        out = {k: _plain(v) for k, v in asdict(self.framing).items()}
        out.update({k: _plain(v) for k, v in asdict(self.lpc).items()})
        for f in fields(self):
            if f.name not in ("framing", "lpc"):
                out[f.name] = getattr(self, f.name)
        return out

    @classmethod
    def from_flat(cls, values, base=None):
        """Build a config from flat keys, falling back to ``base`` for missing ones."""
        base = base or cls()
        values = dict(values)
        framing_keys = {f.name for f in fields(FramingConfig)}
        lpc_keys = {f.name for f in fields(LpcConfig)}
        own_keys = {f.name for f in fields(cls)} - {"framing", "lpc"}
        unknown = set(values) - framing_keys - lpc_keys - own_keys
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        try:
            framing = replace(base.framing, **{k: v for k, v in values.items() if k in framing_keys})
            lpc = replace(base.lpc, **{k: v for k, v in values.items() if k in lpc_keys})
            return replace(base, framing=framing, lpc=lpc,
                           **{k: v for k, v in values.items() if k in own_keys})
        except (TypeError, ValueError) as exc:
            if isinstance(exc, UsageError):
                raise
            raise UsageError(f"invalid configuration: {exc}") from exc


def _plain(v):
    return v.value if hasattr(v, "value") else v


def load_config(path) -> RunConfig:
    """Read a JSON config file of flat keys (see ``RunConfig.to_flat``)."""
    try:
        values = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(values, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return RunConfig.from_flat(values)
