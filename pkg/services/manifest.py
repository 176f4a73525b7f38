"""
Run manifests written next to every artifact the CLI produces.
"""
from __future__ import annotations

import hashlib
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

from loguru import logger
from pydantic import BaseModel, Field

PathLike = Union[str, Path]


class RunManifest(BaseModel):
    command: str
    artifact: str
    seed: Optional[int] = None
    config: Dict[str, Any] = Field(default_factory=dict)
    inputs: Dict[str, str] = Field(default_factory=dict)
    created_at: str


def file_digest(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def manifest_path(artifact: PathLike) -> Path:
    artifact = Path(artifact)
    if artifact.is_dir():
        return artifact / "manifest.json"
    return artifact.with_name(artifact.name + ".manifest.json")


def write_manifest(
    command: str,
    artifact: PathLike,
    inputs: Iterable[PathLike] = (),
    seed: Optional[int] = None,
    config: Optional[Dict[str, Any]] = None,
) -> Path:
    """Record the command, config, seed and input digests for an artifact."""
    digests = {}
    for item in inputs:
        item = Path(item)
        if item.is_file():
            digests[str(item)] = file_digest(item)

    manifest = RunManifest(
        command=command,
        artifact=str(artifact),
        seed=seed,
        config=config or {},
        inputs=dict(sorted(digests.items())),
        created_at=datetime.now(timezone.utc).isoformat(),
    )
    path = manifest_path(artifact)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.debug(f"Manifest written to {path}")
    return path
