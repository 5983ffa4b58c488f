"""Semantic vectors for reasoning steps: file formats, service client, cache."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import struct
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .chain import ReasoningChain
from .errors import EmbeddingError, EmbeddingFormatError, EmbeddingServiceError

logger = logging.getLogger(__name__)

ENDPOINT_ENV = "REASONTOPO_EMBED_URL"
TOKEN_ENV = "REASONTOPO_EMBED_TOKEN"
CACHE_ENV = "REASONTOPO_CACHE_DIR"

_HEADER = struct.Struct("<II")


class EmbeddingSource(str, Enum):
    FILE = "file"
    SERVICE = "service"
    FIXTURE = "fixture"


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    vectors: np.ndarray
    source: EmbeddingSource = EmbeddingSource.FILE

    def __post_init__(self):
        vec = np.asarray(self.vectors, dtype=np.float32)
        if vec.ndim == 1 and vec.size == 0:
            vec = vec.reshape(0, 0)
        if vec.ndim != 2:
            raise EmbeddingFormatError(f"embedding array must be 2-D, got shape {vec.shape}")
        if not np.all(np.isfinite(vec)):
            row = int(np.flatnonzero(~np.isfinite(vec).all(axis=1))[0])
            raise EmbeddingError(f"non-finite entry in embedding row {row}")
        vec = np.ascontiguousarray(vec)
        vec.setflags(write=False)
        object.__setattr__(self, "vectors", vec)
        object.__setattr__(self, "source", EmbeddingSource(self.source))

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return self.n


def _from_rows(rows, source) -> EmbeddingSet:
    if not isinstance(rows, list):
        raise EmbeddingFormatError("JSON embeddings must be an array of arrays")
    if not rows:
        return EmbeddingSet(np.zeros((0, 0), np.float32), source)
    lengths = {len(r) if isinstance(r, list) else -1 for r in rows}
    if -1 in lengths:
        raise EmbeddingFormatError("every embedding row must be an array")
    if len(lengths) != 1:
        raise EmbeddingFormatError(f"ragged embedding rows: lengths {sorted(lengths)}")
    try:
        arr = np.array(rows, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise EmbeddingFormatError(f"embedding rows must be numeric: {exc}") from None
    bad = ~np.isfinite(arr).all(axis=1)
    if bad.any():
        raise EmbeddingError(f"non-finite entry in embedding row {int(np.flatnonzero(bad)[0])}")
    return EmbeddingSet(arr.astype(np.float32), source)


def _from_binary(blob: bytes, source) -> EmbeddingSet:
    if not blob:
        return EmbeddingSet(np.zeros((0, 0), np.float32), source)
    if len(blob) < _HEADER.size:
        raise EmbeddingFormatError("binary embedding file shorter than its 8-byte header")
    n, d = _HEADER.unpack_from(blob)
    expected = _HEADER.size + 4 * n * d
    if len(blob) != expected:
        raise EmbeddingFormatError(f"binary embedding file has {len(blob)} bytes, header implies {expected}")
    arr = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(n, d)
    return EmbeddingSet(arr.astype(np.float32), source)


def load_embeddings(path, source=EmbeddingSource.FILE) -> EmbeddingSet:
    """Read a JSON (array of arrays) or flat little-endian binary embedding file."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except FileNotFoundError:
        raise EmbeddingError(f"embedding file not found: {path}") from None
    head = blob.lstrip()[:1]
    if path.suffix.lower() == ".json" or head == b"[":
        if not blob.strip():
            return EmbeddingSet(np.zeros((0, 0), np.float32), source)
        try:
            rows = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise EmbeddingFormatError(f"{path}: invalid JSON embeddings ({exc})") from None
        return _from_rows(rows, source)
    return _from_binary(blob, source)


def save_embeddings(emb: EmbeddingSet, path, fmt: str | None = None) -> Path:
    path = Path(path)
    fmt = fmt or ("json" if path.suffix.lower() == ".json" else "binary")
    if fmt == "json":
        rows = [[float(x) for x in row] for row in emb.vectors]
        path.write_text(json.dumps(rows))
    elif fmt == "binary":
        n, d = emb.vectors.shape
        path.write_bytes(_HEADER.pack(n, d) + emb.vectors.astype("<f4").tobytes())
    else:
        raise ValueError(f"unknown embedding format {fmt!r}")
    return path


def embeddings_from_array(array, source=EmbeddingSource.FIXTURE) -> EmbeddingSet:
    return EmbeddingSet(np.asarray(array, dtype=np.float32), source)


# ---------------------------------------------------------------------------
# service client
# ---------------------------------------------------------------------------

class EmbeddingCache:
    """Content-addressed on-disk vectors keyed by (endpoint, text hash).

    Files are never evicted. Writes go through a temp file and an atomic
    rename under a per-key lock.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    @staticmethod
    def key(endpoint: str, text: str) -> str:
        text_hash = hashlib.sha256(text.encode("utf-8")).hexdigest()
        return hashlib.sha256(f"{endpoint}\0{text_hash}".encode("utf-8")).hexdigest()

    def _path(self, key):
        return self.root / key[:2] / f"{key}.f32"

    def get(self, key) -> np.ndarray | None:
        p = self._path(key)
        if not p.exists():
            return None
        return np.frombuffer(p.read_bytes(), dtype="<f4").astype(np.float32)

    def put(self, key, vector: np.ndarray):
        with self._guard:
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            p = self._path(key)
            p.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=p.parent, suffix=".tmp")
            with os.fdopen(fd, "wb") as fh:
                fh.write(np.asarray(vector, dtype="<f4").tobytes())
            os.replace(tmp, p)


def _post(endpoint, texts, token, timeout):
    import requests

    headers = {"Content-Type": "application/json"}
    if token:
        headers["Authorization"] = f"Bearer {token}"
    url = endpoint.rstrip("/")
    if not url.endswith("/embed"):
        url += "/embed"
    resp = requests.post(url, json={"texts": list(texts)}, headers=headers, timeout=timeout)
    if resp.status_code != 200:
        raise EmbeddingServiceError(f"embedding service returned HTTP {resp.status_code}: {resp.text}",
                                    status=resp.status_code, body=resp.text)
    try:
        payload = resp.json()
        vectors = payload["vectors"]
        dim = int(payload["dimension"])
    except (ValueError, KeyError, TypeError) as exc:
        raise EmbeddingServiceError(f"malformed embedding response: {exc}", status=200,
                                    body=resp.text) from None
    if len(vectors) != len(texts):
        raise EmbeddingServiceError(
            f"cardinality mismatch: sent {len(texts)} texts, received {len(vectors)} vectors",
            status=200, body=resp.text)
    arr = np.asarray(vectors, dtype=np.float32)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise EmbeddingServiceError(f"response vectors do not match declared dimension {dim}",
                                    status=200, body=resp.text)
    return arr


def _post_with_retries(endpoint, texts, token, timeout, retries, backoff):
    import requests

    for attempt in range(retries + 1):
        try:
            return _post(endpoint, texts, token, timeout)
        except requests.RequestException as exc:
            if attempt == retries:
                raise EmbeddingServiceError(
                    f"transport failure after {retries + 1} attempts: {exc}") from exc
            logger.warning("embedding request failed (%s), retrying", exc)
            time.sleep(backoff * 2 ** attempt)


def fetch_embeddings(endpoint, texts, *, cache_dir=None, token=None, batch_size=32,
                     retries=3, timeout=30.0, backoff=0.25, workers=4) -> EmbeddingSet:
    """Embed ``texts`` through the HTTP service, writing through the cache.

    Cached texts are never re-requested; misses are sent in batches of at
    most ``batch_size``, concurrently when several batches are needed.
    """
    texts = list(texts)
    if not texts:
        return EmbeddingSet(np.zeros((0, 0), np.float32), EmbeddingSource.SERVICE)
    for i, t in enumerate(texts):
        if not isinstance(t, str) or not t:
            raise EmbeddingError(f"text {i} must be a non-empty string")
    endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
    if not endpoint:
        raise EmbeddingError(f"no embedding endpoint configured (set {ENDPOINT_ENV})")
    token = token if token is not None else os.environ.get(TOKEN_ENV)
    cache_dir = cache_dir or os.environ.get(CACHE_ENV) or Path.home() / ".cache" / "reasontopo"
    cache = EmbeddingCache(cache_dir)

    keys = [EmbeddingCache.key(endpoint, t) for t in texts]
    found: dict[str, np.ndarray] = {}
    for k in keys:
        if k not in found:
            v = cache.get(k)
            if v is not None:
                found[k] = v
    missing = []
    for t, k in zip(texts, keys):
        if k not in found and t not in missing:
            missing.append(t)

    if missing:
        batches = [missing[i:i + batch_size] for i in range(0, len(missing), batch_size)]
        with ThreadPoolExecutor(max_workers=max(1, min(workers, len(batches)))) as pool:
            results = list(pool.map(
                lambda b: _post_with_retries(endpoint, b, token, timeout, retries, backoff), batches))
        for batch, arr in zip(batches, results):
            for t, vec in zip(batch, arr):
                k = EmbeddingCache.key(endpoint, t)
                cache.put(k, vec)
                found[k] = vec

    dims = {found[k].shape[0] for k in keys}
    if len(dims) != 1:
        raise EmbeddingServiceError(f"dimension disagreement across responses: {sorted(dims)}")
    return EmbeddingSet(np.stack([found[k] for k in keys]), EmbeddingSource.SERVICE)


# ---------------------------------------------------------------------------
# attaching vectors to chains
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EmbeddedChain:
    chain: ReasoningChain
    embeddings: EmbeddingSet

    @property
    def vectors(self) -> np.ndarray:
        return self.embeddings.vectors

    @property
    def n(self):
        return self.chain.n


def attach(chain: ReasoningChain, emb: EmbeddingSet) -> EmbeddedChain:
    if emb.n != chain.n:
        raise EmbeddingError(f"chain has {chain.n} steps but the embedding set has {emb.n} rows")
    return EmbeddedChain(chain, emb)


def select_embedded_view(ec: EmbeddedChain, view) -> EmbeddedChain:
    """Apply :func:`~reasontopo.chain.select_view` to the chain and its rows."""
    from .chain import View, select_view

    restricted = select_view(ec.chain, view)
    if View(view) is View.FULL_GRAPH:
        return ec
    rows = sorted(ec.chain.final_path)
    return EmbeddedChain(restricted, EmbeddingSet(ec.vectors[rows], ec.embeddings.source))
