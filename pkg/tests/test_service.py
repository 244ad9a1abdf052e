import json
import threading

import pytest
from fastapi.testclient import TestClient

from sarclass.errors import DataError, ModelFileError
from sarclass.pipeline import classify_message
from sarclass.service import create_app, load_app

SAR_MSG = "Refactor createOrUpdate method in MongoChannelStore to extract methods"


@pytest.fixture(scope="module")
def client(binary_model):
    return TestClient(create_app(binary_model))


@pytest.fixture(scope="module")
def both(binary_model, multiclass_model):
    return TestClient(create_app(binary_model, multiclass_model))


def test_health(client, both):
    r = client.get("/health")
    assert r.status_code == 200 and r.json() == {"status": "ok", "models": ["binary"]}
    assert both.get("/health").json()["models"] == ["binary", "multiclass"]


def test_classify_example(client, binary_model):
    r = client.post("/v1/classify", json={"message": SAR_MSG, "task": "binary"})
    body = r.json()
    assert r.status_code == 200 and body["label"] == "SAR"
    assert abs(sum(body["scores"].values()) - 1) < 1e-9
    assert body["label"] == max(body["scores"], key=body["scores"].get)
    assert "Refactor*" in body["matched_patterns"]
    assert body["model_id"] == binary_model.checksum
    assert body == classify_message(binary_model, SAR_MSG)


def test_multiclass_route(both):
    r = both.post("/v1/classify", json={"message": "reduce coupling between modules",
                                        "task": "multiclass"})
    assert r.status_code == 200 and r.json()["label"] == "INTERNAL_QA"


@pytest.mark.parametrize("kwargs,status", [
    ({"json": {"message": ""}}, 400),
    ({"json": {"message": "   "}}, 400),
    ({"json": {}}, 400),
    ({"json": {"message": "x", "task": "ternary"}}, 400),
    ({"content": b"{bad json", "headers": {"content-type": "application/json"}}, 400),
    ({"json": {"message": "x" * (64 * 1024 + 1)}}, 413),
    ({"json": {"message": "fix", "task": "multiclass"}}, 409),
    ({"content": b"message=x", "headers": {"content-type": "text/plain"}}, 415),
])
def test_errors(client, kwargs, status):
    r = client.post("/v1/classify", **kwargs)
    assert r.status_code == status and "detail" in r.json()


def test_message_at_limit_accepted(client):
    assert client.post("/v1/classify", json={"message": "a" * (64 * 1024)}).status_code == 200


def test_repeat_and_concurrent_requests_identical(client):
    req = {"message": "Rename misleading variable names", "task": "binary"}
    first = client.post("/v1/classify", json=req).content
    results = []

    def worker():
        results.append(client.post("/v1/classify", json=req).content)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert set(results) == {first}


def test_refuses_bad_models(tmp_path, binary_model, multiclass_model):
    bad = tmp_path / "bad.json"
    bad.write_text('{"checksum": "0", "model": {"format_version": "1"}}')
    with pytest.raises(ModelFileError):
        load_app(bad)
    with pytest.raises(DataError):
        create_app(multiclass_model)


def test_openapi_documents_request(client):
    schema = client.get("/openapi.json").json()
    body = schema["paths"]["/v1/classify"]["post"]["requestBody"]
    assert "message" in json.dumps(body)
