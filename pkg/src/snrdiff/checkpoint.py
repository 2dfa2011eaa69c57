"""Checkpoint container: one-line JSON manifest + raw little-endian float64 vectors.

Layout: magic line, manifest line, then the parameter vector and the EMA
shadow back to back in manifest order. The manifest pins schema version,
architecture, EMA decay, prediction target, schedule parameters and
fingerprint, and the run seed; loading validates all of it before touching
the binary payload, so a bad file never yields partial state.
"""

from __future__ import annotations

import json

import numpy as np

from . import nn
from .errors import CheckpointError
from .schedule import NoiseSchedule

MAGIC = b"snrdiff-checkpoint\n"
SCHEMA_VERSION = 1


def save_checkpoint(m: nn.Denoiser, e: nn.EmaState, path, *, cfg, schedule: NoiseSchedule) -> None:
    """Write model + EMA state with full run metadata; round-trip is bit-exact."""
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "input_dim": m.input_dim,
        "hidden_dims": list(m.hidden_dims),
        "time_embed_dim": m.time_embed_dim,
        "activation": m.activation,
        "param_count": m.param_count,
        "ema_decay": e.decay,
        "target": cfg.target.value,
        "seed": cfg.seed,
        "schedule": {
            "kind": "linear",
            "T": cfg.schedule_T,
            "beta_start": cfg.beta_start,
            "beta_end": cfg.beta_end,
            "fingerprint": schedule.fingerprint(),
        },
    }
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(json.dumps(manifest, sort_keys=True).encode("utf-8"))
        f.write(b"\n")
        f.write(np.ascontiguousarray(m.params, dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(e.shadow, dtype="<f8").tobytes())


def load_manifest(path) -> dict:
    """Parse and validate the manifest without reading the parameter payload."""
    with open(path, "rb") as f:
        magic = f.readline()
        if magic != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file (bad magic line)")
        try:
            manifest = json.loads(f.readline().decode("utf-8"))
        except (ValueError, UnicodeDecodeError) as err:
            raise CheckpointError(f"{path}: corrupt manifest: {err}") from None
    for key in ("schema_version", "input_dim", "hidden_dims", "time_embed_dim",
                "activation", "param_count", "ema_decay", "target", "seed", "schedule"):
        if key not in manifest:
            raise CheckpointError(f"{path}: manifest missing field {key!r}")
    if manifest["schema_version"] != SCHEMA_VERSION:
        raise CheckpointError(
            f"{path}: schema_version {manifest['schema_version']} not supported (expected {SCHEMA_VERSION})"
        )
    _, count = nn.build_layout(
        manifest["input_dim"], tuple(manifest["hidden_dims"]), manifest["time_embed_dim"]
    )
    if manifest["param_count"] != count:
        raise CheckpointError(
            f"{path}: param_count {manifest['param_count']} does not match architecture manifest ({count})"
        )
    return manifest


def load_checkpoint(path) -> tuple[nn.Denoiser, nn.EmaState]:
    """Rebuild (Denoiser, EmaState) from a checkpoint; validates sizes exactly."""
    manifest = load_manifest(path)
    count = manifest["param_count"]
    with open(path, "rb") as f:
        f.readline()
        f.readline()
        payload = f.read()
    expected = 2 * count * 8
    if len(payload) != expected:
        raise CheckpointError(f"{path}: payload holds {len(payload)} bytes, expected {expected}")
    params = np.frombuffer(payload[: count * 8], dtype="<f8").astype(np.float64)
    shadow = np.frombuffer(payload[count * 8 :], dtype="<f8").astype(np.float64)
    model = nn.Denoiser(
        input_dim=manifest["input_dim"],
        hidden_dims=tuple(manifest["hidden_dims"]),
        time_embed_dim=manifest["time_embed_dim"],
        params=params,
        activation=manifest["activation"],
    )
    ema = nn.EmaState(decay=manifest["ema_decay"], shadow=shadow)
    return model, ema


def schedule_from_manifest(manifest: dict) -> NoiseSchedule:
    """Rebuild the training schedule recorded in a checkpoint manifest."""
    from .schedule import build_linear

    info = manifest["schedule"]
    s = build_linear(info["T"], info["beta_start"], info["beta_end"])
    if s.fingerprint() != info["fingerprint"]:
        raise CheckpointError(
            f"schedule fingerprint mismatch: manifest {info['fingerprint']}, rebuilt {s.fingerprint()}"
        )
    return s
