import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

import fieldfuse as ff
from fieldfuse.embedder import EmbedderSpec, save_table, toy_embedding
from fieldfuse.query import dequantize_scores, heatmap
from fieldfuse.server import LABEL_SENTINEL_U16, SceneIndex, create_app

DIM = 16
M = 40


@pytest.fixture()
def client():
    rng = np.random.default_rng(21)
    cloud = ff.PointCloud(positions=rng.uniform(-1, 1, (M, 3)))
    features = rng.normal(size=(M, DIM)).astype(np.float32)
    features[5] = toy_embedding("chair", DIM, 0)  # a point matching "chair" exactly
    scene = SceneIndex(
        scene_id="demo",
        cloud=cloud,
        features=features,
        embedder=EmbedderSpec(kind="toy", dim=DIM, seed=0),
    )
    return TestClient(create_app([scene])), features


def test_list_scenes(client):
    http, _ = client
    r = http.get("/v1/scenes")
    assert r.status_code == 200
    assert r.json() == [{"id": "demo", "num_points": M, "feature_dim": DIM}]


def test_cloud_endpoint_strided(client):
    http, _ = client
    r = http.get("/v1/scenes/demo/cloud", params={"stride": 4})
    body = r.json()
    pos = np.frombuffer(base64.b64decode(body["positions_b64"]), dtype="<f4")
    assert body["count"] == len(range(0, M, 4))
    assert pos.shape[0] == body["count"] * 3
    assert body["num_points"] == M
    assert body["stride"] == 4


def test_query_returns_expected_score_count(client):
    http, _ = client
    for stride in (1, 2, 5):
        r = http.post(f"/v1/scenes/demo/query?stride={stride}", json={"text": "chair"})
        assert r.status_code == 200
        body = r.json()
        scores = np.frombuffer(base64.b64decode(body["scores_u8"]), dtype=np.uint8)
        assert scores.shape[0] == len(range(0, M, stride))
        assert (body["min"], body["max"], body["stride"]) == (-1, 1, stride)


def test_query_exact_feature_scores_255(client):
    http, features = client
    r = http.post("/v1/scenes/demo/query", json={"embedding": features[5].astype(float).tolist()})
    scores = np.frombuffer(base64.b64decode(r.json()["scores_u8"]), dtype=np.uint8)
    assert scores[5] == 255


def test_query_matches_float_path_within_quantization(client):
    http, features = client
    q = toy_embedding("table", DIM, 0)
    r = http.post("/v1/scenes/demo/query", json={"text": "table"})
    scores = np.frombuffer(base64.b64decode(r.json()["scores_u8"]), dtype=np.uint8)
    float_scores = heatmap(features, q)
    assert np.abs(dequantize_scores(scores) - float_scores).max() <= 1 / 255 + 1e-12


def test_identical_queries_byte_identical(client):
    http, _ = client
    a = http.post("/v1/scenes/demo/query", json={"text": "soft"})
    b = http.post("/v1/scenes/demo/query", json={"text": "soft"})
    assert a.content == b.content
    assert a.status_code == b.status_code == 200


def test_segment_legend_matches_request_order(client):
    http, features = client
    labels = ["table", "chair", "lamp"]
    r = http.post("/v1/scenes/demo/segment", json={"labels": labels})
    body = r.json()
    assert body["legend"] == labels
    wire = np.frombuffer(base64.b64decode(body["labels_u16"]), dtype="<u2")
    assert wire.shape[0] == M
    assert wire[5] == 1  # the planted "chair" point


def test_segment_engineer_prompts_changes_embeddings(client):
    http, _ = client
    raw = http.post("/v1/scenes/demo/segment", json={"labels": ["chair", "table"]})
    eng = http.post(
        "/v1/scenes/demo/segment",
        json={"labels": ["chair", "table"], "engineer_prompts": True},
    )
    assert raw.status_code == eng.status_code == 200
    assert raw.json()["legend"] == eng.json()["legend"] == ["chair", "table"]
    assert raw.content != eng.content


def test_segment_sentinel_for_zero_features():
    cloud = ff.PointCloud(positions=np.zeros((2, 3)) + [[0, 0, 0], [1, 1, 1]])
    features = np.zeros((2, DIM), dtype=np.float32)
    features[1, 0] = 1.0
    scene = SceneIndex(
        scene_id="s",
        cloud=cloud,
        features=features,
        embedder=EmbedderSpec(kind="toy", dim=DIM, seed=0),
    )
    http = TestClient(create_app([scene]))
    r = http.post("/v1/scenes/s/segment", json={"labels": ["x"]})
    wire = np.frombuffer(base64.b64decode(r.json()["labels_u16"]), dtype="<u2")
    assert wire[0] == LABEL_SENTINEL_U16
    assert wire[1] == 0


def test_unknown_scene_404(client):
    http, _ = client
    assert http.get("/v1/scenes/nope/cloud").status_code == 404
    assert http.post("/v1/scenes/nope/query", json={"text": "x"}).status_code == 404


def test_malformed_bodies_400(client):
    http, _ = client
    r = http.post(
        "/v1/scenes/demo/query",
        content=b"{not json",
        headers={"content-type": "application/json"},
    )
    assert r.status_code == 400
    assert http.post("/v1/scenes/demo/query", json={}).status_code == 400
    assert (
        http.post("/v1/scenes/demo/query", json={"text": "a", "embedding": [1.0] * DIM}).status_code
        == 400
    )
    assert http.post("/v1/scenes/demo/query", json={"embedding": "zzz"}).status_code == 400
    assert (
        http.post("/v1/scenes/demo/query", json={"embedding": [1.0] * (DIM + 1)}).status_code == 400
    )
    assert http.post("/v1/scenes/demo/segment", json={"labels": []}).status_code == 400
    assert http.post("/v1/scenes/demo/segment", json={"labels": [1, 2]}).status_code == 400
    assert http.get("/v1/scenes/demo/cloud", params={"stride": 0}).status_code == 400
    assert http.get("/v1/scenes/demo/cloud", params={"stride": "x"}).status_code == 400


def test_zero_embedding_422(client):
    http, _ = client
    r = http.post("/v1/scenes/demo/query", json={"embedding": [0.0] * DIM})
    assert r.status_code == 422


def test_table_embedder_unknown_prompt_400(tmp_path):
    rng = np.random.default_rng(2)
    save_table(tmp_path / "t.json", ["chair"], rng.normal(size=(1, DIM)).astype(np.float32))
    scene = SceneIndex(
        scene_id="tbl",
        cloud=ff.PointCloud(positions=np.zeros((1, 3))),
        features=rng.normal(size=(1, DIM)).astype(np.float32),
        embedder=EmbedderSpec(kind="table", path=str(tmp_path / "t.json")),
    )
    http = TestClient(create_app([scene]))
    assert http.post("/v1/scenes/tbl/query", json={"text": "chair"}).status_code == 200
    r = http.post("/v1/scenes/tbl/query", json={"text": "sofa"})
    assert r.status_code == 400
    assert "sofa" in r.json()["detail"]
