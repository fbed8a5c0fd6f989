"""File formats: binary snapshots, CSV traces, JSON reports, config files.

All binary payloads are little-endian float64.  CSV numeric cells use %.17g so
runs are reproducible bit-for-bit from the files alone.
"""

from __future__ import annotations

import hashlib
import json
import struct
import time
from pathlib import Path

import numpy as np

from .hermite import SpectralField, tri_size
from .gaussian import OUState

SNAPSHOT_MAGIC = b"SGPE0001"


def _pack_complex(c: np.ndarray) -> bytes:
    """Interleave re/im as little-endian f64."""
    flat = np.empty(2 * c.size, dtype="<f8")
    flat[0::2] = c.real
    flat[1::2] = c.imag
    return flat.tobytes()


def _unpack_complex(buf: bytes, n: int) -> np.ndarray:
    flat = np.frombuffer(buf, dtype="<f8", count=2 * n)
    return flat[0::2] + 1j * flat[1::2]


def write_snapshot(path, state: OUState, u: SpectralField | None = None) -> None:
    """Write a noise snapshot, optionally with the remainder coefficients u.

    Layout: magic, u32 deg, u32 flag (1 if u present), f64 time, then the noise
    coefficients and, when present, the u coefficients (same degree).
    """
    deg = state.field.deg_max
    if u is not None and u.deg_max != deg:
        raise ValueError("u must share the noise truncation degree")
    with open(path, "wb") as f:
        f.write(SNAPSHOT_MAGIC)
        f.write(struct.pack("<IId", deg, 1 if u is not None else 0, state.t))
        f.write(_pack_complex(state.field.coeffs))
        if u is not None:
            f.write(_pack_complex(u.coeffs))


def read_snapshot(path) -> tuple[OUState, SpectralField | None]:
    with open(path, "rb") as f:
        if f.read(8) != SNAPSHOT_MAGIC:
            raise ValueError(f"{path}: not a snapshot file")
        deg, flag, t = struct.unpack("<IId", f.read(16))
        n = tri_size(deg)
        z = SpectralField(deg, _unpack_complex(f.read(16 * n), n))
        u = None
        if flag:
            u = SpectralField(deg, _unpack_complex(f.read(16 * n), n))
    return OUState(z, t), u


def write_csv(path, header: list[str], rows) -> None:
    """CSV with %.17g formatting for floats; header row always present."""
    with open(path, "w", newline="") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for v in row:
                if isinstance(v, (float, np.floating)):
                    cells.append("%.17g" % v)
                elif isinstance(v, (int, np.integer)):
                    cells.append(str(int(v)))
                else:
                    cells.append(str(v))
            f.write(",".join(cells) + "\n")


def write_json(path, payload: dict) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(path, config: dict, outputs: list, t_start: float) -> None:
    """Record the resolved config, output checksums and wall time."""
    payload = {
        "config": config,
        "outputs": [
            {"file": str(Path(p).name), "sha256": sha256_file(p)}
            for p in outputs
        ],
        "wall_time_s": time.time() - t_start,
    }
    write_json(path, payload)


# ---------------------------------------------------------------------------
# config files: key = value lines, '#' comments

class ConfigError(ValueError):
    pass


def parse_config(path) -> dict:
    """Parse a key = value config file into strings; types resolved by callers."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not key or not val:
            raise ConfigError(f"{path}:{lineno}: empty key or value")
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = val
    return out


def config_get(cfg: dict, key: str, cast, default=None, required: bool = False):
    """Typed lookup with validation errors that name the offending key."""
    if key not in cfg:
        if required:
            raise ConfigError(f"missing required config key {key!r}")
        return default
    raw = cfg[key]
    try:
        if cast is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return cast(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {cast.__name__}")
