"""Batch document encoding into the pipeline's binary vector format.

Two backends share one interface: the SPECTER2 transformer (CLS pooling,
768-dim) for real runs, and a deterministic feature-hashing stand-in
(``--model hashed``) for offline and contract testing. Both emit unit rows,
never drop a document, and record truncations instead of hiding them.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from hs_embed.vecfile import write_vectors

DEFAULT_MODEL = "allenai/specter2_base"
HASHED_BACKEND = "hashed"
ENCODER_DIM = 768
DEFAULT_MAX_LENGTH = 512


class EncodeError(ValueError):
    """Invalid encode request or input documents."""


class EncoderLoadError(RuntimeError):
    """The requested encoder backend could not be constructed."""


@dataclass(frozen=True)
class EncodeRequest:
    input_path: Path
    output_path: Path
    batch_size: int = 32
    model: str = DEFAULT_MODEL
    max_length: int = DEFAULT_MAX_LENGTH
    device: str = "cpu"

    def __post_init__(self):
        if self.batch_size < 1:
            raise EncodeError(f"batch size must be >= 1, got {self.batch_size}")
        if self.max_length < 8:
            raise EncodeError(f"max length must be >= 8, got {self.max_length}")
        if not self.model.strip():
            raise EncodeError("model must be non-empty")


@dataclass(frozen=True)
class EncodeResult:
    count: int
    dim: int
    seconds: float
    truncated: tuple[str, ...]
    model: str
    device: str
    output_path: Path
    meta_path: Path


def read_documents(path: Path | str) -> list[tuple[str, str]]:
    """Load id+text records from line-delimited JSON; ids unique, texts non-empty."""
    docs: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EncodeError(f"{path}:{lineno}: not valid JSON ({exc})")
            if not isinstance(rec, dict) or "id" not in rec or "text" not in rec:
                raise EncodeError(f"{path}:{lineno}: expected an object with id and text")
            doc_id, text = rec["id"], rec["text"]
            if not isinstance(doc_id, str) or not doc_id.strip():
                raise EncodeError(f"{path}:{lineno}: id must be a non-empty string")
            if not isinstance(text, str) or not text.strip():
                raise EncodeError(f"{path}:{lineno}: text for {doc_id!r} is empty")
            if doc_id in seen:
                raise EncodeError(f"{path}:{lineno}: duplicate id {doc_id!r}")
            seen.add(doc_id)
            docs.append((doc_id, text))
    if not docs:
        raise EncodeError(f"{path}: no documents")
    return docs


class HashedEncoder:
    """Deterministic offline stand-in: sha256 feature hashing over tokens.

    Not a semantic model — it exists so the full encode contract (batching,
    truncation accounting, unit rows, file format, bitwise stability) can be
    exercised without model weights.
    """

    def __init__(self, max_length: int):
        self.dim = ENCODER_DIM
        self.max_length = max_length

    def token_count(self, text: str) -> int:
        return len(text.split())

    def encode_batch(self, texts: Sequence[str]) -> np.ndarray:
        rows = np.zeros((len(texts), self.dim), dtype=np.float64)
        for r, text in enumerate(texts):
            tokens = text.split()[: self.max_length]
            for token in tokens:
                digest = hashlib.sha256(token.encode("utf-8")).digest()
                bucket = int.from_bytes(digest[:4], "little") % self.dim
                sign = 1.0 if digest[4] & 1 else -1.0
                rows[r, bucket] += sign
            norm = np.linalg.norm(rows[r])
            if norm < 1e-12:
                raise EncodeError("document hashed to the zero vector")
            rows[r] /= norm
        return rows.astype(np.float32)


class Specter2Encoder:
    """Transformer document encoder: CLS token of the final hidden layer."""

    def __init__(self, model_name: str, max_length: int, device: str):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise EncoderLoadError(f"transformer backend unavailable: {exc}")
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_name)
            self.model = AutoModel.from_pretrained(model_name).to(device).eval()
        except Exception as exc:  # model hub errors span many exception types
            raise EncoderLoadError(f"cannot load encoder {model_name!r}: {exc}")
        self._torch = torch
        self.dim = int(self.model.config.hidden_size)
        self.max_length = max_length
        self.device = device

    def token_count(self, text: str) -> int:
        return len(self.tokenizer(text, truncation=False)["input_ids"])

    def encode_batch(self, texts: Sequence[str]) -> np.ndarray:
        enc = self.tokenizer(
            list(texts),
            padding=True,
            truncation=True,
            max_length=self.max_length,
            return_tensors="pt",
        ).to(self.device)
        with self._torch.inference_mode():
            out = self.model(**enc)
        cls = out.last_hidden_state[:, 0, :].cpu().numpy().astype(np.float64)
        norms = np.linalg.norm(cls, axis=1, keepdims=True)
        if np.any(norms < 1e-12):
            raise EncodeError("encoder produced a zero vector")
        return (cls / norms).astype(np.float32)


def load_encoder(model: str, max_length: int, device: str):
    if model == HASHED_BACKEND:
        return HashedEncoder(max_length)
    return Specter2Encoder(model, max_length, device)


def encode_documents(req: EncodeRequest) -> EncodeResult:
    """Encode every input record, in order, into one vector file.

    Over-length texts are truncated and reported, never dropped: silently
    losing rows would desynchronize the id block from its consumers.
    """
    docs = read_documents(req.input_path)
    encoder = load_encoder(req.model, req.max_length, req.device)

    started = time.monotonic()
    truncated: list[str] = []
    batches: list[np.ndarray] = []
    for offset in range(0, len(docs), req.batch_size):
        batch = docs[offset : offset + req.batch_size]
        for doc_id, text in batch:
            if encoder.token_count(text) > req.max_length:
                truncated.append(doc_id)
        batches.append(encoder.encode_batch([text for _, text in batch]))
    rows = np.vstack(batches)
    seconds = time.monotonic() - started

    ids = [doc_id for doc_id, _ in docs]
    write_vectors(req.output_path, ids, rows)
    meta_path = Path(f"{req.output_path}.meta.json")
    meta = {
        "batch_size": req.batch_size,
        "count": len(ids),
        "device": req.device,
        "dim": int(rows.shape[1]),
        "input": str(req.input_path),
        "max_length": req.max_length,
        "model": req.model,
        "output": str(req.output_path),
        "seconds": seconds,
        "truncated": truncated,
    }
    with open(meta_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EncodeResult(
        count=len(ids),
        dim=int(rows.shape[1]),
        seconds=seconds,
        truncated=tuple(truncated),
        model=req.model,
        device=req.device,
        output_path=Path(req.output_path),
        meta_path=meta_path,
    )
