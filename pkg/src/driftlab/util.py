"""Small shared helpers: seed derivation, config hashing, atomic file writes."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

_U64 = (1 << 64) - 1


def derive_seed(seed: int, *tags) -> int:
    """Derive a child u64 seed from a parent seed and a tag path.

    Stable across runs and platforms (unlike builtin hash()).
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed) & _U64).encode())
    for t in tags:
        h.update(b"\x00")
        h.update(str(t).encode())
    return int.from_bytes(h.digest(), "little")


def word_seed(word: str, seed: int) -> int:
    """Per-word u64 seed; the same (word, seed) always maps to the same value."""
    h = hashlib.blake2b(digest_size=8)
    h.update(word.encode("utf-8"))
    h.update(b"\x00")
    h.update(str(int(seed) & _U64).encode())
    return int.from_bytes(h.digest(), "little")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    """Short stable hash of a JSON-serializable config."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:12]


def atomic_write_text(path, text: str) -> None:
    """Write text to a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def thread_count() -> int:
    """Parallelism cap: DRIFTLAB_THREADS env var, default = CPU count."""
    raw = os.environ.get("DRIFTLAB_THREADS", "")
    if raw.strip():
        try:
            n = int(raw)
        except ValueError:
            n = 1
        return max(1, n)
    return max(1, os.cpu_count() or 1)
