"""Text featurization: signed feature hashing of word n-grams, plus a client
for an external embedding service.

Hashing uses 64-bit BLAKE2b digests of the UTF-8 n-gram (tokens joined by a
single space). The low bits select the bucket; bit 63 selects the sign. Both
are platform- and process-independent, unlike Python's built-in ``hash``.
"""
from __future__ import annotations

import hashlib
import json
import re
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, ProviderError, ProviderShapeError, ShapeError

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class FeaturizerConfig:
    ngram_min: int = 1
    ngram_max: int = 1
    hash_dim: int = 2 ** 16
    lowercase: bool = True
    tf_weighting: str = "binary"  # binary | count | log_count

    def __post_init__(self):
        if not 1 <= self.ngram_min <= self.ngram_max <= 3:
            raise ConfigError("need 1 <= ngram_min <= ngram_max <= 3", "featurizer.ngram_min")
        if self.hash_dim < 2 ** 8 or self.hash_dim & (self.hash_dim - 1):
            raise ConfigError("must be a power of two >= 256", "featurizer.hash_dim")
        if self.tf_weighting not in ("binary", "count", "log_count"):
            raise ConfigError(f"unknown weighting {self.tf_weighting!r}", "featurizer.tf_weighting")

    @property
    def width(self) -> int:
        return self.hash_dim

    def to_dict(self):
        return {"kind": "hash", **asdict(self)}


def tokenize(text: str, lowercase: bool = True) -> list:
    """Split on runs of non-alphanumeric characters."""
    if lowercase:
        text = text.lower()
    return _TOKEN.findall(text)


def ngrams(tokens: Sequence[str], lo: int, hi: int) -> list:
    out = []
    for n in range(lo, hi + 1):
        for i in range(len(tokens) - n + 1):
            out.append(" ".join(tokens[i:i + n]))
    return out


@lru_cache(maxsize=1 << 16)
def hash64(gram: str) -> int:
    return int.from_bytes(hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest(), "little")


def _bucket_sign(gram: str, dim: int):
    h = hash64(gram)
    return h & (dim - 1), (-1.0 if h >> 63 else 1.0)


def featurize(config: FeaturizerConfig, text: str) -> dict:
    """Sparse hashed vector of ``text`` as ``{bucket: value}``.

    Empty or token-free text gives an empty dict (the zero vector).
    """
    counts: dict = {}
    for gram in ngrams(tokenize(text, config.lowercase), config.ngram_min, config.ngram_max):
        counts[gram] = counts.get(gram, 0) + 1
    vec: dict = {}
    for gram, c in counts.items():
        if config.tf_weighting == "binary":
            w = 1.0
        elif config.tf_weighting == "count":
            w = float(c)
        else:
            w = float(np.log1p(c))
        b, sign = _bucket_sign(gram, config.hash_dim)
        vec[b] = vec.get(b, 0.0) + sign * w
    return {b: v for b, v in sorted(vec.items()) if v != 0.0}


def featurize_many(config: FeaturizerConfig, texts: Sequence[str]) -> sp.csr_matrix:
    """Stack :func:`featurize` over ``texts`` into a CSR matrix (n, hash_dim)."""
    indptr = [0]
    indices: list = []
    data: list = []
    memo: dict = {}
    for text in texts:
        vec = memo.get(text)
        if vec is None:
            vec = memo[text] = featurize(config, text)
        indices.extend(vec.keys())
        data.extend(vec.values())
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64),
         np.asarray(indptr, dtype=np.int64)),
        shape=(len(texts), config.hash_dim),
    )


# ---------------------------------------------------------------------------
# remote embeddings

@dataclass(frozen=True)
class EmbeddingProviderConfig:
    endpoint_url: str
    dim: int
    timeout_ms: int = 30_000
    batch_size: int = 64
    concurrent: bool = False

    def __post_init__(self):
        if self.dim <= 0:
            raise ConfigError("must be > 0", "embedding.dim")
        if self.batch_size < 1:
            raise ConfigError("must be >= 1", "embedding.batch_size")

    @property
    def width(self) -> int:
        return self.dim

    def to_dict(self):
        return {"kind": "remote", **asdict(self)}


def _post_batch(config: EmbeddingProviderConfig, texts, batch_index, headers):
    body = json.dumps({"texts": list(texts)}).encode("utf-8")
    req = urllib.request.Request(config.endpoint_url, data=body, method="POST",
                                 headers={"Content-Type": "application/json; charset=utf-8",
                                          **headers})
    try:
        with urllib.request.urlopen(req, timeout=config.timeout_ms / 1000) as resp:
            status = resp.status
            payload = resp.read()
    except urllib.error.HTTPError as exc:
        raise ProviderError(f"HTTP {exc.code} from {config.endpoint_url}", batch_index) from None
    except (urllib.error.URLError, TimeoutError, OSError) as exc:
        raise ProviderError(f"request failed: {exc}", batch_index) from None
    if status != 200:
        raise ProviderError(f"HTTP {status} from {config.endpoint_url}", batch_index)
    try:
        rows = json.loads(payload.decode("utf-8"))["embeddings"]
        mat = np.asarray(rows, dtype=np.float64)
    except (ValueError, KeyError, TypeError) as exc:
        raise ProviderError(f"malformed response: {exc}", batch_index) from None
    if mat.ndim != 2 or mat.shape[0] != len(texts) or mat.shape[1] != config.dim:
        got = mat.shape if mat.ndim == 2 else (len(rows),)
        raise ProviderShapeError(
            f"shape mismatch: expected ({len(texts)}, {config.dim}), got {got}", batch_index)
    return mat


def embed_remote(config: EmbeddingProviderConfig, texts: Sequence[str],
                 headers: dict | None = None) -> np.ndarray:
    """POST ``{"texts": [...]}`` batches and stack the returned embeddings.

    Any failure raises :class:`ProviderError` with the batch index; there is
    no fallback. Row order always matches ``texts``.
    """
    texts = list(texts)
    if not texts:
        return np.zeros((0, config.dim))
    headers = headers or {}
    batches = [texts[i:i + config.batch_size] for i in range(0, len(texts), config.batch_size)]
    if config.concurrent and len(batches) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=min(8, len(batches))) as pool:
            parts = list(pool.map(lambda ib: _post_batch(config, ib[1], ib[0], headers),
                                  enumerate(batches)))
    else:
        parts = [_post_batch(config, b, i, headers) for i, b in enumerate(batches)]
    return np.vstack(parts)


def encode_texts(featurizer, texts: Sequence[str], headers: dict | None = None):
    """Dispatch to hashing or the remote provider depending on config type."""
    if isinstance(featurizer, FeaturizerConfig):
        return featurize_many(featurizer, texts)
    if isinstance(featurizer, EmbeddingProviderConfig):
        return embed_remote(featurizer, texts, headers)
    raise ShapeError(f"unsupported featurizer {type(featurizer).__name__}")


def featurizer_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind", "hash")
    if kind == "hash":
        return FeaturizerConfig(**d)
    if kind == "remote":
        return EmbeddingProviderConfig(**d)
    raise ConfigError(f"unknown featurizer kind {kind!r}", "featurizer.kind")
