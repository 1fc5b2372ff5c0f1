"""
Checkpoint Persistence - Building Block: save_checkpoint / load_checkpoint

Purpose:
    Single-file container holding a JSON manifest and the raw weights blob.

Container layout:
    - 8 bytes   magic b"FIMGCKPT"
    - 4 bytes   manifest length (uint32, little-endian)
    - manifest  UTF-8 JSON: format_version, architecture, num_classes,
                input_shape, train_config, entries [{name, shape, kind}],
                blob_length, blob_sha256
    - blob      every entry as little-endian float64, in manifest order

Errors:
    - VersionMismatchError: unsupported format_version
    - ArchitectureMismatchError: entries disagree with the rebuilt architecture
    - CorruptCheckpointError: bad magic/manifest, wrong blob length or digest
"""

import hashlib
import json
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from ..errors import (
    ArchitectureMismatchError,
    CorruptCheckpointError,
    DataError,
    VersionMismatchError,
)
from ..utils.logger import setup_logger
from .network import Network, build_from_architecture

logger = setup_logger(__name__)

MAGIC = b"FIMGCKPT"
FORMAT_VERSION = 1

PathLike = Union[str, Path]


def _blob(net: Network) -> Tuple[bytes, list]:
    entries = []
    chunks = []
    for name, array, kind in net.named_state():
        entries.append({"name": name, "shape": list(array.shape), "kind": kind})
        chunks.append(np.ascontiguousarray(array, dtype="<f8").tobytes())
    return b"".join(chunks), entries


def save_checkpoint(net: Network, path: PathLike,
                    train_config: Optional[Dict[str, Any]] = None) -> str:
    """
    Write ``net`` to ``path``.

    Returns:
        str: sha256 hex digest of the weights blob (the checkpoint hash)
    """
    blob, entries = _blob(net)
    digest = hashlib.sha256(blob).hexdigest()
    manifest = {
        "format_version": FORMAT_VERSION,
        "architecture": net.architecture,
        "num_classes": net.num_classes,
        "input_shape": list(net.input_shape),
        "train_config": train_config or {},
        "entries": entries,
        "blob_length": len(blob),
        "blob_sha256": digest,
    }
    encoded = json.dumps(manifest, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(encoded)))
        f.write(encoded)
        f.write(blob)
    logger.info("Checkpoint saved", extra={"path": str(path), "sha256": digest})
    return digest


def read_manifest(path: PathLike) -> Tuple[Dict[str, Any], bytes]:
    """Parse the container; returns (manifest, blob) without validating entries."""
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError as exc:
        raise DataError(f"checkpoint {path} not found") from exc
    if len(raw) < len(MAGIC) + 4 or raw[:len(MAGIC)] != MAGIC:
        raise CorruptCheckpointError(f"{path}: not a fimguard checkpoint")
    (length,) = struct.unpack("<I", raw[len(MAGIC):len(MAGIC) + 4])
    start = len(MAGIC) + 4
    if start + length > len(raw):
        raise CorruptCheckpointError(f"{path}: manifest truncated")
    try:
        manifest = json.loads(raw[start:start + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptCheckpointError(f"{path}: manifest is not valid JSON") from exc
    if not isinstance(manifest, dict):
        raise CorruptCheckpointError(f"{path}: manifest must be a JSON object")
    return manifest, raw[start + length:]


def load_checkpoint(path: PathLike) -> Network:
    """
    Rebuild the network described by the manifest and fill in the weights.

    The returned network is frozen.
    """
    manifest, blob = read_manifest(path)
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{path}: format version {version} not supported (expected {FORMAT_VERSION})"
        )
    try:
        architecture = dict(manifest["architecture"])
        architecture["num_classes"] = manifest["num_classes"]
        architecture["input_shape"] = manifest["input_shape"]
        entries = manifest["entries"]
        blob_length = int(manifest["blob_length"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptCheckpointError(f"{path}: manifest missing field {exc}") from exc

    try:
        net = build_from_architecture(architecture)
    except (KeyError, TypeError, ValueError) as exc:
        raise ArchitectureMismatchError(f"{path}: cannot rebuild architecture: {exc}") from exc

    expected = [(name, list(array.shape), kind) for name, array, kind in net.named_state()]
    found = [(e.get("name"), list(e.get("shape", [])), e.get("kind")) for e in entries]
    if expected != found:
        raise ArchitectureMismatchError(
            f"{path}: checkpoint entries do not match architecture {architecture.get('name')}"
        )

    needed = sum(int(np.prod(shape)) for _, shape, _ in expected) * 8
    if blob_length != needed or len(blob) != needed:
        raise CorruptCheckpointError(
            f"{path}: weights blob has {len(blob)} bytes, expected {needed}"
        )
    if hashlib.sha256(blob).hexdigest() != manifest.get("blob_sha256"):
        raise CorruptCheckpointError(f"{path}: weights blob digest mismatch")

    arrays: Dict[str, np.ndarray] = {}
    offset = 0
    for name, shape, _ in expected:
        count = int(np.prod(shape))
        arrays[name] = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape)
        offset += count * 8
    net.load_state(arrays)
    net.freeze()
    logger.debug("Checkpoint loaded", extra={"path": str(path)})
    return net


def checkpoint_train_config(path: PathLike) -> Dict[str, Any]:
    manifest, _ = read_manifest(path)
    return dict(manifest.get("train_config", {}))
