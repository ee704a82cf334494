"""Bootleg score files, manifests and atomic writes."""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .bootleg import BootlegScore, InvalidFingerprintError, Variant

BOOTLEG_MAGIC = b"BLSC"
BOOTLEG_VERSION = 1
_VARIANT_TAGS = {Variant.SHARP: 1, Variant.FLAT: 2, Variant.SHEET: 3}
_TAG_VARIANTS = {v: k for k, v in _VARIANT_TAGS.items()}
# magic, version u16, variant u8, reserved u8, width u64, descriptor length u32
_HEADER = struct.Struct("<4sHBBQI")


class BootlegFileError(ValueError):
    pass


class ManifestError(ValueError):
    pass


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write ``data`` to a temporary sibling file, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def encode_bootleg(score: BootlegScore, source: str = "") -> bytes:
    desc = source.encode("utf-8")
    header = _HEADER.pack(BOOTLEG_MAGIC, BOOTLEG_VERSION, _VARIANT_TAGS[score.variant], 0, score.width, len(desc))
    return header + desc + score.fingerprints.astype("<u8").tobytes()


def decode_bootleg(data: bytes) -> tuple[BootlegScore, str]:
    if len(data) < _HEADER.size:
        raise BootlegFileError("truncated bootleg file header")
    magic, version, tag, _, width, desc_len = _HEADER.unpack_from(data)
    if magic != BOOTLEG_MAGIC:
        raise BootlegFileError(f"bad magic {magic!r}, not a bootleg score file")
    if version != BOOTLEG_VERSION:
        raise BootlegFileError(f"unsupported bootleg file version {version}")
    if tag not in _TAG_VARIANTS:
        raise BootlegFileError(f"unknown variant tag {tag}")
    start = _HEADER.size + desc_len
    expected = start + 8 * width
    if len(data) != expected:
        raise BootlegFileError(f"body length mismatch: expected {expected} bytes, got {len(data)}")
    source = data[_HEADER.size:start].decode("utf-8")
    fps = np.frombuffer(data, dtype="<u8", count=width, offset=start).astype(np.uint64)
    try:
        score = BootlegScore(fps, _TAG_VARIANTS[tag])
    except InvalidFingerprintError as exc:
        raise BootlegFileError(str(exc)) from exc
    return score, source


def save_bootleg(path: str | Path, score: BootlegScore, source: str = "") -> None:
    atomic_write_bytes(path, encode_bootleg(score, source))


def load_bootleg(path: str | Path) -> BootlegScore:
    return decode_bootleg(Path(path).read_bytes())[0]


def read_manifest(path: str | Path) -> list[tuple[str, str]]:
    """Read a two-column tab separated manifest, skipping blanks and ``#`` comments."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.rstrip("\r\n").split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise ManifestError(f"{path}:{lineno}: expected two tab-separated fields")
        rows.append((parts[0], parts[1]))
    return rows


def resolve(base: str | Path, p: str) -> Path:
    q = Path(p)
    return q if q.is_absolute() else Path(base).parent / q


def read_database_manifest(path: str | Path) -> list[tuple[str, Path]]:
    """``piece_id<TAB>bootleg_path`` lines; paths are relative to the manifest."""
    rows = read_manifest(path)
    seen = set()
    out = []
    for pid, p in rows:
        if pid in seen:
            raise ManifestError(f"duplicate piece id {pid!r} in {path}")
        seen.add(pid)
        out.append((pid, resolve(path, p)))
    return out


def read_ground_truth(path: str | Path) -> list[tuple[Path, str]]:
    """``midi_path<TAB>piece_id`` lines."""
    return [(resolve(path, m), pid) for m, pid in read_manifest(path)]


class ConfigError(ValueError):
    pass


def parse_key_values(text: str, source: str = "<config>") -> dict[str, tuple[str, int]]:
    """``key = value`` lines; ``#`` starts a comment. Returns key -> (raw value, line number)."""
    values: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = (raw, lineno)
    return values
