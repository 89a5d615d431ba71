"""Binary checkpoint format.

Layout, all integers little-endian::

    b"KGR1"                      magic
    u32 version                  = 1
    u32 n, n bytes               config echo, UTF-8 ``key=value`` lines
    u64 idmap digest
    u64 num_nodes, u64 d, u64 L
    f64[num_nodes*d]             node embeddings, row-major
    f64[d*d] * L                 W_1..W_L, row-major
    f64[2d] * L                  a_1..a_L
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .exceptions import (
    BadMagicError,
    CheckpointError,
    DigestMismatchError,
    ShapeMismatchError,
    TruncatedCheckpointError,
    VersionMismatchError,
)
from .ingest import IdMaps
from .model import ModelConfig, ModelParams
from .pipeline import write_atomic

MAGIC = b"KGR1"
VERSION = 1
_F64 = np.dtype("<f8")


def idmap_digest(idmaps: IdMaps) -> int:
    h = hashlib.blake2b(digest_size=8)
    for role, keys in (
        ("user", idmaps.user_keys()),
        ("item", idmaps.item_keys()),
        ("aux", idmaps.aux_keys()),
        ("relation", idmaps.relation_keys()),
    ):
        for key in sorted(keys):
            h.update(f"{role}\t{key}\n".encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


def config_to_text(config: ModelConfig) -> str:
    return "".join(f"{k}={v}\n" for k, v in config.to_dict().items())


def encode(params: ModelParams, config: ModelConfig, digest: int = 0) -> bytes:
    n, d, L = params.num_nodes, params.embed_dim, params.num_hops
    if (d, L) != (config.embed_dim, config.num_hops):
        raise ShapeMismatchError("parameter shapes disagree with config")
    cfg = config_to_text(config).encode("utf-8")
    parts = [
        MAGIC,
        struct.pack("<II", VERSION, len(cfg)),
        cfg,
        struct.pack("<QQQQ", digest, n, d, L),
    ]
    parts += [np.ascontiguousarray(arr, dtype=_F64).tobytes() for _, arr in params.blocks()]
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedCheckpointError("truncated checkpoint")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out


def decode(data: bytes) -> tuple[ModelParams, ModelConfig, int]:
    from .config import parse_model_text

    r = _Reader(data)
    if len(data) < len(MAGIC) or r.take(len(MAGIC)) != MAGIC:
        raise BadMagicError("not a kgrec checkpoint (bad magic)")
    version, cfg_len = struct.unpack("<II", r.take(8))
    if version != VERSION:
        raise VersionMismatchError(f"checkpoint version {version}, expected {VERSION}")
    config = parse_model_text(r.take(cfg_len).decode("utf-8"))
    digest, n, d, L = struct.unpack("<QQQQ", r.take(32))
    if (d, L) != (config.embed_dim, config.num_hops):
        raise ShapeMismatchError("stored shapes disagree with stored config")

    def arr(*shape):
        count = int(np.prod(shape))
        return np.frombuffer(r.take(8 * count), dtype=_F64).reshape(shape).astype(np.float64)

    emb = arr(n, d)
    weights = [arr(d, d) for _ in range(L)]
    attn = [arr(2 * d) for _ in range(L)]
    if r.pos != len(data):
        raise CheckpointError(f"{len(data) - r.pos} trailing bytes after parameters")
    return ModelParams(emb, weights, attn), config, digest


def save_checkpoint(params: ModelParams, config: ModelConfig, path, idmaps: IdMaps | None = None):
    digest = idmap_digest(idmaps) if idmaps is not None else 0
    write_atomic(Path(path), encode(params, config, digest))


def load_checkpoint(
    path,
    config: ModelConfig | None = None,
    idmaps: IdMaps | None = None,
    num_nodes: int | None = None,
) -> tuple[ModelParams, ModelConfig]:
    """Read a checkpoint, optionally validating it against the current setup."""
    params, stored, digest = decode(Path(path).read_bytes())
    if config is not None and (config.embed_dim, config.num_hops) != (
        stored.embed_dim,
        stored.num_hops,
    ):
        raise ShapeMismatchError(
            f"checkpoint has embed_dim={stored.embed_dim}, num_hops={stored.num_hops}; "
            f"config has embed_dim={config.embed_dim}, num_hops={config.num_hops}"
        )
    if num_nodes is not None and num_nodes != params.num_nodes:
        raise ShapeMismatchError(
            f"checkpoint has {params.num_nodes} nodes, data has {num_nodes}"
        )
    if idmaps is not None and digest != idmap_digest(idmaps):
        raise DigestMismatchError("checkpoint was trained on different id maps")
    return params, stored
