"""Binary eigenpair files and JSON scene files."""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .eigensolve import EigenPair
from .errors import ConfigError
from .geometry import TWO_BUMP, Scene, TorusDomain, scene_from_dict

MAGIC = b"FLABPAIR"
HEADER = struct.Struct("<8sIddd")  # magic, n, L, h, E(h)


def save_pair(path, pair: EigenPair):
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(HEADER.pack(MAGIC, pair.domain.n, pair.domain.L, pair.h, pair.E_h))
        fh.write(np.ascontiguousarray(pair.phi, dtype="<f8").tobytes())


def load_pair(path, target: float = float("nan")) -> EigenPair:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise ConfigError(f"{path}: truncated header")
    magic, n, L, h, E = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ConfigError(f"{path}: not an eigenpair file")
    body = np.frombuffer(raw, dtype="<f8", offset=HEADER.size)
    if body.size != n * n:
        raise ConfigError(f"{path}: expected {n * n} samples, found {body.size}")
    return EigenPair(h, E, body.reshape(n, n).astype(float), float("nan"), TorusDomain(L, n), target)


def load_scene(path=None) -> Scene:
    """Scene from a JSON file; ``None`` or ``"two_bump"`` gives the built-in scene."""
    if path is None or str(path) == "two_bump":
        return scene_from_dict(TWO_BUMP)
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read scene {path}: {exc}") from exc
    return scene_from_dict(d)


def save_scene(path, scene: Scene):
    Path(path).write_text(json.dumps(scene.raw or TWO_BUMP, indent=2, sort_keys=True) + "\n")
