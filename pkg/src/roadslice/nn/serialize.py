"""Self-describing model container: one .npz holding a JSON manifest plus
all parameter arrays.  Loading rejects unknown format versions and surfaces
corruption as :class:`ModelFormatError`."""

from __future__ import annotations

import json
import zipfile
from pathlib import Path

import numpy as np

from ..errors import ModelFormatError

FORMAT_VERSION = 1
_META_KEY = "__meta__"


def save_container(path: str | Path, kind: str, meta: dict,
                   arrays: dict[str, np.ndarray]) -> None:
    if _META_KEY in arrays:
        raise ValueError(f"array name {_META_KEY!r} is reserved")
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "meta": meta,
        "arrays": sorted(arrays),
    }
    payload = {_META_KEY: np.frombuffer(json.dumps(manifest).encode(), dtype=np.uint8)}
    payload.update(arrays)
    np.savez(str(path), **payload)


def load_container(path: str | Path, expect_kind: str | None = None
                   ) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    try:
        with np.load(str(path)) as data:
            if _META_KEY not in data:
                raise ModelFormatError(f"{path}: not a model container (no manifest)")
            try:
                manifest = json.loads(bytes(data[_META_KEY]).decode())
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                raise ModelFormatError(f"{path}: corrupt manifest: {exc}") from exc
            arrays = {k: np.array(data[k]) for k in data.files if k != _META_KEY}
    except (OSError, zipfile.BadZipFile, ValueError, EOFError) as exc:
        raise ModelFormatError(f"{path}: unreadable model container: {exc}") from exc

    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: format version {version} unsupported (expected {FORMAT_VERSION})"
        )
    missing = [k for k in manifest.get("arrays", []) if k not in arrays]
    if missing:
        raise ModelFormatError(f"{path}: container missing arrays {missing}")
    if expect_kind is not None and manifest.get("kind") != expect_kind:
        raise ModelFormatError(
            f"{path}: container holds {manifest.get('kind')!r}, expected {expect_kind!r}"
        )
    return manifest, arrays
