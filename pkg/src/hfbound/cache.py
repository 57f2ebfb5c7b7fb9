"""Content-addressed result cache.

Entries are keyed by the sha256 of the canonical request JSON and are valid
only for the tool version that wrote them.  Stores go through a temp file
and an atomic rename so a crashed writer can never leave a half-written
entry under a valid key.  Anything that fails integrity checks on read is
evicted and treated as a miss.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

from . import __version__
from .certificates import canonical_json
from .errors import CacheCorruptError


def default_cache_dir() -> Path:
    env = os.environ.get("HF_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "hfbound"


def request_hash(request: dict) -> str:
    return hashlib.sha256(canonical_json(request).encode()).hexdigest()


def _entry_path(cache_dir: Path, key: str) -> Path:
    return cache_dir / f"{key}.json"


def cache_store(
    request: dict,
    result,
    cache_dir: Path | str | None = None,
    version: str = __version__,
) -> Path:
    """Persist a result under the request's content hash; returns the path."""
    cache_dir = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    cache_dir.mkdir(parents=True, exist_ok=True)
    key = request_hash(request)
    entry = {
        "version": version,
        "request_hash": key,
        "request": request,
        "result": result,
    }
    final = _entry_path(cache_dir, key)
    fd, tmp = tempfile.mkstemp(dir=cache_dir, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(canonical_json(entry))
        os.replace(tmp, final)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    return final


def cache_lookup(
    request: dict,
    cache_dir: Path | str | None = None,
    version: str = __version__,
    strict: bool = False,
):
    """Return the stored result for this request, or None on a miss.

    A hit requires the entry to parse, to carry the current tool version,
    and for the hash recomputed over its stored request to match the key.
    Corrupt entries (unparseable, missing fields, hash mismatch) are deleted
    before returning; with strict=True the eviction also raises.
    """
    cache_dir = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    key = request_hash(request)
    path = _entry_path(cache_dir, key)
    try:
        raw = path.read_text()
    except OSError:
        return None

    def evict(reason: str):
        try:
            path.unlink()
        except OSError:
            pass
        if strict:
            raise CacheCorruptError(f"cache entry {path.name}: {reason}")
        return None

    try:
        entry = json.loads(raw)
    except json.JSONDecodeError:
        return evict("not valid JSON")
    if not isinstance(entry, dict) or not {
        "version",
        "request_hash",
        "request",
        "result",
    } <= entry.keys():
        return evict("missing required fields")
    if entry["request_hash"] != key or request_hash(entry["request"]) != key:
        return evict("stored request does not hash to its key")
    if entry["version"] != version:
        # stale, not corrupt: a later store simply overwrites it
        return None
    return entry["result"]
