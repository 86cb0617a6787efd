"""Run artifacts: hashing, atomic writes, JSON emission, and run manifests.

Every CLI invocation writes a manifest recording its inputs (with SHA-256
hashes), the resolved configuration, the seed, and library versions, so a run
can be replayed and compared byte for byte.
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import os
import tempfile
from pathlib import Path


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@contextlib.contextmanager
def atomic_path(final_path):
    """Yield a temp path in the target directory; rename on success, unlink on error."""
    final_path = Path(final_path)
    # Keep the suffix so format-by-extension writers (matplotlib) behave.
    fd, tmp_name = tempfile.mkstemp(dir=final_path.parent, prefix=final_path.stem + ".",
                                    suffix=final_path.suffix)
    os.close(fd)
    try:
        yield Path(tmp_name)
        os.replace(tmp_name, final_path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp_name)
        raise


def write_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def versions() -> dict[str, str]:
    import matplotlib
    import numpy
    import scipy

    from . import __version__

    return {
        "gridcast": __version__,
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
    }


def write_manifest(out_dir, command: str, argv: list[str], inputs: dict[str, str],
                   outputs: list[str], config_echo: dict, seed: int | None) -> Path:
    manifest = {
        "command": command,
        "argv": list(argv),
        "inputs": {
            name: {"path": str(path), "sha256": sha256_file(path)}
            for name, path in inputs.items()
        },
        "outputs": sorted(outputs),
        "config": config_echo,
        "seed": seed,
        "versions": versions(),
    }
    path = Path(out_dir) / f"{command}.manifest.json"
    with atomic_path(path) as tmp:
        write_json(tmp, manifest)
    return path
