import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fieldfuse.embedder import (
    EmbedderSpec,
    TableEmbedder,
    embed,
    engineer_prompt,
    save_table,
    toy_embedding,
)
from fieldfuse.errors import DimMismatch, EmptyLabel, UnknownPrompt, ValidationError


def test_engineer_prompt_template():
    assert engineer_prompt("chair") == "a chair in a scene"
    assert engineer_prompt("yellow egg-shaped vase") == "a yellow egg-shaped vase in a scene"


def test_engineer_prompt_other_passes_through():
    assert engineer_prompt("other") == "other"


def test_engineer_prompt_empty_label():
    with pytest.raises(EmptyLabel):
        engineer_prompt("")


def test_engineer_prompt_applied_once_leaves_single_suffix():
    out = engineer_prompt("sofa")
    assert out.count("in a scene") == 1


def test_toy_embedding_deterministic():
    a = toy_embedding("chair", 64, 0)
    b = toy_embedding("chair", 64, 0)
    assert np.array_equal(a, b)


def test_toy_embedding_distinct_strings():
    a = toy_embedding("chair", 64, 0)
    b = toy_embedding("table", 64, 0)
    assert not np.array_equal(a, b)


def test_toy_embedding_seed_changes_vector():
    assert not np.array_equal(toy_embedding("chair", 64, 0), toy_embedding("chair", 64, 1))


@given(st.text(min_size=0, max_size=40), st.integers(8, 96), st.integers(0, 2**31 - 1))
@settings(max_examples=60, deadline=None)
def test_toy_embedding_unit_norm_property(text, dim, seed):
    v = toy_embedding(text, dim, seed)
    assert v.shape == (dim,)
    assert abs(float(np.linalg.norm(v.astype(np.float64))) - 1.0) < 1e-6
    assert np.array_equal(v, toy_embedding(text, dim, seed))


def test_toy_embedding_known_values_frozen():
    # platform-stability canary: first components of a fixed embedding
    v = toy_embedding("chair", 8, 0)
    assert v.tolist() == pytest.approx(
        [-0.53147155, 0.40241629, 0.36719218, 0.13440835,
         0.20526901, -0.52570397, -0.03047073, 0.28857386],
        abs=1e-7,
    )


def test_toy_dim_floor():
    with pytest.raises(ValidationError):
        toy_embedding("x", 4, 0)
    with pytest.raises(ValidationError):
        EmbedderSpec(kind="toy", dim=4)


def test_embed_toy_prompt_set():
    ps = embed(EmbedderSpec(kind="toy", dim=16, seed=2), ["a", "b", "c"])
    assert ps.prompts == ("a", "b", "c")
    assert ps.embeddings.shape == (3, 16)


def test_table_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    emb = rng.normal(size=(3, 12)).astype(np.float32)
    save_table(tmp_path / "t.json", ["chair", "table", "other"], emb)
    spec = EmbedderSpec(kind="table", path=str(tmp_path / "t.json"))
    ps = embed(spec, ["table", "chair"])
    assert np.array_equal(ps.embeddings[0], emb[1])
    assert np.array_equal(ps.embeddings[1], emb[0])


def test_table_unknown_prompt_lists_missing(tmp_path):
    emb = np.ones((2, 8), dtype=np.float32)
    save_table(tmp_path / "t.json", ["a", "b"], emb)
    spec = EmbedderSpec(kind="table", path=str(tmp_path / "t.json"))
    with pytest.raises(UnknownPrompt) as e:
        embed(spec, ["a", "zzz", "qqq"])
    assert e.value.missing == ["zzz", "qqq"]


def test_table_dim_mismatch(tmp_path):
    emb = np.ones((2, 8), dtype=np.float32)
    save_table(tmp_path / "t.json", ["a", "b"], emb)
    spec = EmbedderSpec(kind="table", path=str(tmp_path / "t.json"), dim=16)
    with pytest.raises(DimMismatch):
        embed(spec, ["a"])


def test_table_rejects_misaligned_rows():
    with pytest.raises(DimMismatch):
        TableEmbedder(["a", "b"], np.ones((3, 4), dtype=np.float32))


def test_spec_parse():
    s = EmbedderSpec.parse("toy:64:3")
    assert (s.kind, s.dim, s.seed) == ("toy", 64, 3)
    s = EmbedderSpec.parse("toy:32")
    assert (s.kind, s.dim, s.seed) == ("toy", 32, 0)
    s = EmbedderSpec.parse("table:/some/path.json")
    assert (s.kind, s.path) == ("table", "/some/path.json")
    with pytest.raises(ValidationError):
        EmbedderSpec.parse("magic:1")
    with pytest.raises(ValidationError):
        EmbedderSpec.parse("toy:notanint")
