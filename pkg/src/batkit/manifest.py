"""Run manifests: enough captured state to re-run a command bit-identically.

Every artifact-producing CLI command writes ``<output>.manifest.json``
*before* the artifact itself: the subcommand, argv, the fully resolved
configuration, seeds, SHA-256 digests of the inputs, the output paths, the
active float width and kernel backend, and a best-effort git description of
the working tree.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import subprocess
from pathlib import Path

from . import __version__, kernels
from .precision import float64_enabled


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def input_digest(path) -> str:
    """Digest of a file, or of a directory's sorted (name, digest) pairs."""
    p = Path(path)
    if p.is_dir():
        h = hashlib.sha256()
        for child in sorted(p.rglob("*")):
            if child.is_file():
                h.update(str(child.relative_to(p)).encode("utf-8"))
                h.update(bytes.fromhex(file_digest(child)))
        return h.hexdigest()
    return file_digest(p)


def _git_describe() -> str | None:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5, check=False)
        return out.stdout.strip() or None
    except OSError:
        return None


def write_manifest(command: str, argv: list[str], config: dict, seeds: dict,
                   inputs: dict[str, str], outputs: list[str]) -> str:
    """Write the manifest next to the first output; returns its path."""
    manifest = {
        "command": command,
        "argv": argv,
        "config": config,
        "seeds": seeds,
        "inputs": {name: input_digest(p) for name, p in inputs.items()},
        "outputs": [str(o) for o in outputs],
        "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "version": __version__,
        "float64": float64_enabled(),
        "kernel_backend": kernels.backend_name(),
        "git": _git_describe(),
    }
    path = str(outputs[0]) + ".manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
