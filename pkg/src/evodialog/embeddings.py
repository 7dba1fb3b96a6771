"""Text-embedding boundary and the similarity math used by consolidation.

Ships a deterministic hash-seeded mock embedder (unit-norm pseudo-random
vectors) and an HTTP client for a remote embedding service. Grouping for
consolidation is by connected components of the similarity graph.
"""
from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass

import numpy as np

from .bank import Strategy
from .errors import DimensionMismatchError, TransportError, ZeroNormError


@dataclass(frozen=True)
class EmbeddingVector:
    values: np.ndarray
    model_tag: str

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))


class HashEmbedder:
    """Deterministic mock: unit-norm pseudo-random vector seeded by the text hash."""

    def __init__(self, dim: int = 64, model_tag: str = "hash-mock"):
        self.dim = dim
        self.model_tag = model_tag

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise ValueError("text must be non-empty")
        digest = hashlib.sha256(text.encode("utf-8")).digest()
        seed = int.from_bytes(digest[:8], "big")
        rng = np.random.default_rng(seed)
        vec = rng.standard_normal(self.dim)
        vec /= np.linalg.norm(vec)
        return EmbeddingVector(vec, self.model_tag)


class RemoteEmbedder:
    """JSON-over-HTTP embedding client: {"text": ...} in, {"embedding": [...]} out."""

    def __init__(self, endpoint: str, model_tag: str, dim: int,
                 token_env: str = "EVODIALOG_EMBED_TOKEN", timeout: float = 30.0):
        self.endpoint = endpoint
        self.model_tag = model_tag
        self.dim = dim
        self.token_env = token_env
        self.timeout = timeout

    def embed(self, text: str) -> EmbeddingVector:
        import httpx

        if not text:
            raise ValueError("text must be non-empty")
        headers = {}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            resp = httpx.post(self.endpoint, json={"text": text, "model": self.model_tag},
                              headers=headers, timeout=self.timeout)
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise TransportError(f"embedding request failed: {exc}") from exc
        values = np.asarray(resp.json()["embedding"], dtype=np.float64)
        if values.shape != (self.dim,):
            raise DimensionMismatchError(
                f"expected dimension {self.dim}, got {values.shape}")
        return EmbeddingVector(values, self.model_tag)


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.values.shape != b.values.shape:
        raise DimensionMismatchError(
            f"dimension mismatch: {a.values.shape} vs {b.values.shape}")
    na = np.linalg.norm(a.values)
    nb = np.linalg.norm(b.values)
    if na == 0.0 or nb == 0.0:
        raise ZeroNormError("cosine similarity undefined for zero vectors")
    return float(np.dot(a.values, b.values) / (na * nb))


def similar_groups(strategies: list[Strategy], threshold: float, embedder) -> list[list[Strategy]]:
    """Connected components (size >= 2) of the graph with edges at similarity >= threshold.

    Callers pass strategies sharing one agent type and domain set.
    """
    n = len(strategies)
    if n < 2:
        return []
    vectors = [embedder.embed(s.content) for s in strategies]
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(n):
        for j in range(i + 1, n):
            if cosine_similarity(vectors[i], vectors[j]) >= threshold:
                parent[find(i)] = find(j)

    components: dict[int, list[Strategy]] = {}
    for i, s in enumerate(strategies):
        components.setdefault(find(i), []).append(s)
    return [group for group in components.values() if len(group) >= 2]
