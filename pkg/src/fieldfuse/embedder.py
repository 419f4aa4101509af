"""Prompt embeddings without any pretrained model in the loop.

Two embedder kinds: "table" does exact-string lookup in a file pair
(JSON prompt list + ".feat" embedding matrix, typically produced by an
offline exporter), and "toy" hashes strings into deterministic unit
vectors so the whole pipeline runs and tests with zero model weights.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from .errors import DimMismatch, EmptyLabel, UnknownPrompt, ValidationError
from .featio import load_feat, save_feat
from .scene import PromptSet

PROMPT_TEMPLATE = "a {} in a scene"
PLAIN_LABELS = ("other",)
MIN_TOY_DIM = 8


def engineer_prompt(label: str) -> str:
    """Wrap a bare class label in the benchmark prompt template.

    Only for label-set style queries; free-form exploration queries go to
    the embedder untouched. The label "other" stays as-is.
    """
    if label == "":
        raise EmptyLabel("cannot engineer an empty label")
    if label in PLAIN_LABELS:
        return label
    return PROMPT_TEMPLATE.format(label)


@dataclass(frozen=True)
class EmbedderSpec:
    """kind="toy" needs dim (>= 8) and seed; kind="table" needs the path of
    the JSON half of a table pair (its ".feat" sits next to it)."""

    kind: str
    dim: Optional[int] = None
    seed: int = 0
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind == "toy":
            if self.dim is None or self.dim < MIN_TOY_DIM:
                raise ValidationError(f"toy embedder dim must be >= {MIN_TOY_DIM}")
        elif self.kind == "table":
            if not self.path:
                raise ValidationError("table embedder needs a path")
        else:
            raise ValidationError(f"unknown embedder kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "EmbedderSpec":
        """Parse CLI notation: "toy:<dim>:<seed>" or "table:<path>"."""
        head, _, rest = text.partition(":")
        if head == "toy":
            dim_s, _, seed_s = rest.partition(":")
            try:
                return cls(kind="toy", dim=int(dim_s), seed=int(seed_s) if seed_s else 0)
            except ValueError as e:
                raise ValidationError(f"bad toy embedder spec {text!r}") from e
        if head == "table":
            if not rest:
                raise ValidationError("table embedder spec needs a path")
            return cls(kind="table", path=rest)
        raise ValidationError(f"unknown embedder kind {head!r}")


def toy_embedding(text: str, dim: int, seed: int = 0) -> np.ndarray:
    """Deterministic unit vector for a string: a seeded SHA-256 stream is
    expanded to dim reals and L2-normalized. Stable across platforms."""
    if dim < MIN_TOY_DIM:
        raise ValidationError(f"toy embedder dim must be >= {MIN_TOY_DIM}")
    material = text.encode("utf-8")
    values = np.empty(dim, dtype=np.float64)
    block = 0
    produced = 0
    while produced < dim:
        digest = hashlib.sha256(b"%d:%d:" % (seed, block) + material).digest()
        for i in range(0, 32, 8):
            if produced >= dim:
                break
            u = int.from_bytes(digest[i : i + 8], "little")
            values[produced] = (u >> 11) * (2.0 ** -52) - 1.0  # [-1, 1)
            produced += 1
        block += 1
    norm = np.linalg.norm(values)
    if norm < 1e-12:  # astronomically unlikely; keep the contract total
        values[0] = 1.0
        norm = 1.0
    return (values / norm).astype(np.float32)


class TableEmbedder:
    """Exact-match lookup over a prompt table; misses are hard errors."""

    def __init__(self, prompts: Sequence[str], embeddings: np.ndarray):
        emb = np.asarray(embeddings, dtype=np.float32)
        if emb.ndim != 2 or emb.shape[0] != len(prompts):
            raise DimMismatch(f"table embeddings {emb.shape} do not match {len(prompts)} prompts")
        self._index = {}
        for i, p in enumerate(prompts):
            if p in self._index:
                raise ValidationError(f"duplicate prompt in table: {p!r}")
            self._index[p] = i
        self._embeddings = emb

    @classmethod
    def load(cls, json_path: Union[str, os.PathLike]) -> "TableEmbedder":
        with open(json_path) as f:
            doc = json.load(f)
        feat_path = os.path.splitext(str(json_path))[0] + ".feat"
        return cls(doc["prompts"], load_feat(feat_path))

    @property
    def dim(self) -> int:
        return self._embeddings.shape[1]

    def lookup(self, texts: Sequence[str]) -> np.ndarray:
        missing = [t for t in texts if t not in self._index]
        if missing:
            raise UnknownPrompt(missing)
        return self._embeddings[[self._index[t] for t in texts]]


def save_table(json_path: Union[str, os.PathLike], prompts: Sequence[str], embeddings: np.ndarray) -> None:
    """Write a table pair: prompts JSON plus sibling ".feat" matrix."""
    with open(json_path, "w") as f:
        json.dump({"prompts": list(prompts)}, f, indent=1)
    save_feat(os.path.splitext(str(json_path))[0] + ".feat", np.asarray(embeddings, dtype=np.float32))


def embed(spec: EmbedderSpec, texts: Sequence[str]) -> PromptSet:
    """Embed texts into a PromptSet under the given embedder."""
    texts = list(texts)
    if not texts:
        raise ValidationError("no texts to embed")
    if spec.kind == "toy":
        rows = np.stack([toy_embedding(t, spec.dim, spec.seed) for t in texts])
    else:
        table = TableEmbedder.load(spec.path)
        if spec.dim is not None and table.dim != spec.dim:
            raise DimMismatch(f"table dim {table.dim} != declared dim {spec.dim}")
        rows = table.lookup(texts)
    return PromptSet(prompts=tuple(texts), embeddings=rows)
