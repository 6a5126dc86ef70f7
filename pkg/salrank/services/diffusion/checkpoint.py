"""Checkpoint file: magic, JSON manifest header, little-endian float32 parameters."""

import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from salrank.config import TrainConfig
from salrank.services.diffusion.network import DenoiserParams, NetSpec
from salrank.services.diffusion.schedule import NoiseSchedule
from salrank.utils.exceptions import InputError

logger = logging.getLogger(__name__)

MAGIC = b"SALRNK01"


@dataclass(frozen=True, eq=False)
class Checkpoint:
    params: DenoiserParams
    config: TrainConfig

    @property
    def schedule(self) -> NoiseSchedule:
        return NoiseSchedule.linear(self.config.timesteps, self.config.beta_start, self.config.beta_end)


def save_checkpoint(params: DenoiserParams, config: TrainConfig, path: Path) -> None:
    header = {
        "manifest": [[name, list(shape)] for name, shape in params.manifest],
        "schedule": {
            "timesteps": config.timesteps,
            "beta_start": config.beta_start,
            "beta_end": config.beta_end,
        },
        "seed": config.seed,
        "config": config.model_dump(mode="json"),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(params.vector.astype("<f4").tobytes())
    logger.info("Saved checkpoint", extra={"path": str(path), "parameters": params.size})


def load_checkpoint(path: Path) -> Checkpoint:
    """
    Raises:
        InputError: If the file is missing, truncated or not a checkpoint
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"Checkpoint not found: {path}")
    data = path.read_bytes()
    if not data.startswith(MAGIC) or len(data) < len(MAGIC) + 4:
        raise InputError(f"{path} is not a salrank checkpoint")
    (size,) = struct.unpack("<I", data[len(MAGIC):len(MAGIC) + 4])
    start = len(MAGIC) + 4
    try:
        header = json.loads(data[start:start + size].decode("utf-8"))
        config = TrainConfig(**header["config"])
    except Exception as e:
        raise InputError(f"Corrupt checkpoint header in {path}: {e}") from e
    vector = np.frombuffer(data[start + size:], dtype="<f4").astype(np.float64)
    spec = NetSpec(
        channels=tuple(config.channels),
        feature_channels=config.feature_channels,
        time_channels=config.time_channels,
    )
    expected = [[name, list(shape)] for name, shape in spec.manifest()]
    if header.get("manifest") != expected:
        raise InputError(f"Checkpoint manifest in {path} does not match its architecture")
    try:
        params = DenoiserParams(vector=vector, spec=spec)
    except Exception as e:
        raise InputError(f"Checkpoint parameters in {path} are invalid: {e}") from e
    return Checkpoint(params=params, config=config)
