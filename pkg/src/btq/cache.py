"""On-disk cache of computed quantum spaces.

One file per ``(model hash, p, M, r)``. The first line is a JSON header with
the parameters, format version and the sha256 of the binary payload that
follows: little-endian float64 eigenvalues, residuals, ``gap_edge`` and
``window``, then the basis as ``<c16`` in C order.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from pathlib import Path

import numpy as np

from .eigensolve import SpectralSubspace

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
ENV_VAR = "BTQ_CACHE"


class EigenCache:
    def __init__(self, root):
        self.root = Path(root)

    @classmethod
    def from_env(cls, override=None):
        root = override or os.environ.get(ENV_VAR)
        return cls(root) if root else None

    def path(self, model_hash: str, p: int, M: int, r: int) -> Path:
        return self.root / f"{model_hash}_p{p}_M{M}_r{r}.eig"

    def get(self, model_hash: str, p: int, M: int, r: int) -> SpectralSubspace | None:
        path = self.path(model_hash, p, M, r)
        if not path.exists():
            return None
        try:
            raw = path.read_bytes()
            head, payload = raw.split(b"\n", 1)
            header = json.loads(head)
        except (ValueError, OSError) as exc:
            logger.warning("unreadable cache file %s (%s); recomputing", path.name, exc)
            return None
        if header.get("version") != FORMAT_VERSION:
            logger.info("ignoring cache file %s with format version %r", path.name, header.get("version"))
            return None
        if hashlib.sha256(payload).hexdigest() != header.get("sha256"):
            logger.warning("checksum mismatch in cache file %s; recomputing", path.name)
            return None
        expect = {"model": model_hash, "p": p, "M": M, "r": r}
        if any(header.get(k) != v for k, v in expect.items()):
            logger.warning("cache file %s describes a different configuration; recomputing", path.name)
            return None
        d, n = header["d"], header["n"]
        f8 = np.frombuffer(payload, dtype="<f8", count=2 * d + 2)
        basis = np.frombuffer(payload, dtype="<c16", offset=8 * (2 * d + 2), count=n * d)
        return SpectralSubspace(
            eigenvalues=f8[:d].astype(float), residuals=f8[d:2 * d].astype(float),
            gap_edge=float(f8[2 * d]), window=float(f8[2 * d + 1]),
            basis=basis.reshape(n, d).astype(complex), weight=header["weight"],
            meta=dict(header.get("meta", {}), cached=True))

    def put(self, model_hash: str, p: int, M: int, r: int, S: SpectralSubspace) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        payload = b"".join([
            np.ascontiguousarray(S.eigenvalues, dtype="<f8").tobytes(),
            np.ascontiguousarray(S.residuals, dtype="<f8").tobytes(),
            np.array([S.gap_edge, S.window], dtype="<f8").tobytes(),
            np.ascontiguousarray(S.basis, dtype="<c16").tobytes(),
        ])
        meta = {k: v for k, v in S.meta.items() if isinstance(v, (int, float, str))}
        header = {"version": FORMAT_VERSION, "model": model_hash, "p": p, "M": M, "r": r,
                  "d": S.dim, "n": S.n, "weight": S.weight, "meta": meta,
                  "sha256": hashlib.sha256(payload).hexdigest()}
        path = self.path(model_hash, p, M, r)
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(json.dumps(header, sort_keys=True).encode() + b"\n" + payload)
        tmp.replace(path)
