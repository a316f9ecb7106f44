"""Acceptance gate for the encoder sidecar.

The offline criterion runs on the deterministic backend; the semantic
diagnostic needs real model weights and is opt-in via HS_EMBED_LIVE_MODEL=1.
"""
import json
import os

import numpy as np
import pytest

from hindsight.embed_io import load_vectors
from hs_embed.cli import main

PAIRED_TEXTS = [
    ("Contrastive pretraining for dense passage retrieval. We train a dual "
     "encoder on noisy web pairs and evaluate zero-shot transfer to question "
     "answering benchmarks, finding large gains from hard negative mining."),
    ("Efficient attention approximations for long documents. We benchmark "
     "sparse and low-rank attention variants on summarization and retrieval "
     "tasks, trading quality against memory at increasing sequence lengths."),
    ("Calibration of neural rankers under distribution shift. We measure "
     "score drift across domains and propose a temperature correction fitted "
     "on a small held-out slice, improving downstream threshold stability."),
    ("Data augmentation for low-resource scientific classification. Synthetic "
     "abstracts generated from citation graphs improve macro F1 on rare "
     "classes without degrading the head categories."),
    ("Curriculum schedules for instruction tuning. Ordering training examples "
     "by estimated difficulty accelerates convergence and improves held-out "
     "task generalization over uniform sampling."),
    ("Uncertainty estimation in citation count forecasting. Quantile "
     "regression over bibliometric features yields sharper intervals than "
     "ensemble variance on a five-year horizon."),
]


def encode(tmp_path, name, texts, batch_size=4):
    tmp_path.mkdir(parents=True, exist_ok=True)
    input_path = tmp_path / f"{name}.jsonl"
    with open(input_path, "w", encoding="utf-8") as fh:
        for i, text in enumerate(texts):
            fh.write(json.dumps({"id": f"{name}-{i}", "text": text}) + "\n")
    output = tmp_path / f"{name}.hsve"
    code = main(["--model", "hashed", "encode",
                 "--input", str(input_path),
                 "--output", str(output),
                 "--batch-size", str(batch_size)])
    assert code == 0
    return output


def test_secondary_criterion_encoder_contract(tmp_path):
    texts = [f"synthetic document body {i} with topic words retrieval ranking"
             for i in range(23)]
    output = encode(tmp_path, "docs", texts)

    matrix = load_vectors(output)                    # loads with zero format errors
    assert matrix.dim == 768                         # contract dimension
    assert len(matrix.ids) == 23                     # row count = input count
    assert matrix.ids == tuple(f"docs-{i}" for i in range(23))  # input order kept
    norms = np.linalg.norm(matrix.vectors.astype(np.float64), axis=1)
    assert np.all(norms > 1e-6)                      # no zero rows
    for row in matrix.vectors:
        assert abs(float(row @ row) - 1.0) <= 1e-5   # self-similarity after load

    rerun = encode(tmp_path / "rerun", "docs", texts)
    assert rerun.read_bytes() == output.read_bytes()  # bitwise-stable re-encode


def test_re_encoding_is_bitwise_stable_across_batch_sizes(tmp_path):
    texts = [f"stability check document {i}" for i in range(9)]
    one = encode(tmp_path / "r1", "same", texts, batch_size=1)
    nine = encode(tmp_path / "r2", "same", texts, batch_size=9)
    assert one.read_bytes() == nine.read_bytes()


@pytest.mark.skipif(os.environ.get("HS_EMBED_LIVE_MODEL") != "1",
                    reason="needs downloadable encoder weights; set HS_EMBED_LIVE_MODEL=1")
def test_secondary_criterion_concentrated_similarity_diagnostic(tmp_path):
    input_path = tmp_path / "pairs.jsonl"
    with open(input_path, "w", encoding="utf-8") as fh:
        for i, text in enumerate(PAIRED_TEXTS):
            fh.write(json.dumps({"id": f"t{i}", "text": text}) + "\n")
    output = tmp_path / "pairs.hsve"
    code = main(["encode", "--input", str(input_path),
                 "--output", str(output), "--batch-size", "4"])
    assert code == 0
    matrix = load_vectors(output)
    assert matrix.dim == 768
    sims = matrix.vectors.astype(np.float64) @ matrix.vectors.astype(np.float64).T
    off_diag = sims[np.triu_indices(len(PAIRED_TEXTS), k=1)]
    width = np.percentile(off_diag, 95) - np.percentile(off_diag, 5)
    assert width < 0.15, f"5th-95th percentile width {width}"
