import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from reasontopo.embedding import (EmbeddingCache, attach, embeddings_from_array, fetch_embeddings,
                                  load_embeddings, save_embeddings, select_embedded_view)
from reasontopo.errors import EmbeddingError, EmbeddingFormatError, EmbeddingServiceError

from conftest import linear_chain


class Stub:
    """Behaviour knobs shared with the request handler."""

    def __init__(self):
        self.requests = []
        self.status = 200
        self.drop_one = False
        self.dim = 4


def _vector(text, dim):
    seed = sum(text.encode())
    return np.random.default_rng(seed).normal(size=dim).round(6).tolist()


@pytest.fixture
def service():
    stub = Stub()

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def do_POST(self):
            body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            stub.requests.append({"path": self.path, "texts": body["texts"],
                                  "auth": self.headers.get("Authorization")})
            if stub.status != 200:
                payload = b"overloaded"
            else:
                vecs = [_vector(t, stub.dim) for t in body["texts"]]
                if stub.drop_one:
                    vecs = vecs[:-1]
                payload = json.dumps({"dimension": stub.dim, "vectors": vecs}).encode()
            self.send_response(stub.status)
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

    server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    stub.url = f"http://127.0.0.1:{server.server_address[1]}"
    yield stub
    server.shutdown()


def test_json_and_binary_round_trip(tmp_path, rng):
    emb = embeddings_from_array(rng.normal(size=(5, 3)))
    for name in ("e.json", "e.bin"):
        again = load_embeddings(save_embeddings(emb, tmp_path / name))
        np.testing.assert_array_equal(again.vectors, emb.vectors)
        assert again.dimension == 3


def test_empty_file_gives_empty_set(tmp_path):
    (tmp_path / "e.json").write_text("")
    assert load_embeddings(tmp_path / "e.json").n == 0


def test_ragged_rows_rejected(tmp_path):
    (tmp_path / "e.json").write_text("[[1, 2], [3]]")
    with pytest.raises(EmbeddingFormatError, match="ragged"):
        load_embeddings(tmp_path / "e.json")


def test_non_finite_rejected(tmp_path):
    (tmp_path / "e.json").write_text("[[1, 2], [NaN, 0]]")
    with pytest.raises(EmbeddingError, match="row 1"):
        load_embeddings(tmp_path / "e.json")


def test_truncated_binary(tmp_path):
    emb = embeddings_from_array(np.ones((2, 2)))
    p = save_embeddings(emb, tmp_path / "e.bin")
    p.write_bytes(p.read_bytes()[:-1])
    with pytest.raises(EmbeddingFormatError):
        load_embeddings(p)


def test_vectors_are_read_only(rng):
    emb = embeddings_from_array(rng.normal(size=(2, 2)))
    with pytest.raises(ValueError):
        emb.vectors[0, 0] = 1.0


def test_attach_checks_cardinality():
    with pytest.raises(EmbeddingError, match="3 steps"):
        attach(linear_chain(3), embeddings_from_array(np.ones((2, 4))))


def test_view_selects_rows(rng):
    chain = linear_chain(5, final_path=[1, 3])
    vecs = rng.normal(size=(5, 2))
    ec = select_embedded_view(attach(chain, embeddings_from_array(vecs)), "final_path")
    np.testing.assert_allclose(ec.vectors, vecs[[1, 3]], rtol=1e-6)


def test_fetch_batches_and_caches(service, tmp_path):
    texts = [f"step {i}" for i in range(5)]
    emb = fetch_embeddings(service.url, texts, cache_dir=tmp_path, token="s3cret", batch_size=2)
    assert emb.n == 5 and emb.dimension == 4
    assert sorted(len(r["texts"]) for r in service.requests) == [1, 2, 2]
    assert all(r["path"] == "/embed" and r["auth"] == "Bearer s3cret" for r in service.requests)
    np.testing.assert_allclose(emb.vectors[2], _vector("step 2", 4), rtol=1e-6)

    service.requests.clear()
    again = fetch_embeddings(service.url, texts + ["new"], cache_dir=tmp_path, token="s3cret")
    assert [r["texts"] for r in service.requests] == [["new"]]
    np.testing.assert_array_equal(again.vectors[:5], emb.vectors)


def test_fetch_empty_makes_no_request(service, tmp_path):
    assert fetch_embeddings(service.url, [], cache_dir=tmp_path).n == 0
    assert service.requests == []


def test_fetch_http_error(service, tmp_path):
    service.status = 503
    with pytest.raises(EmbeddingServiceError) as info:
        fetch_embeddings(service.url, ["a"], cache_dir=tmp_path)
    assert info.value.status == 503
    assert "overloaded" in info.value.body


def test_fetch_cardinality_mismatch(service, tmp_path):
    service.drop_one = True
    with pytest.raises(EmbeddingServiceError, match="cardinality"):
        fetch_embeddings(service.url, ["a", "b"], cache_dir=tmp_path)


def test_fetch_dimension_disagreement(service, tmp_path):
    fetch_embeddings(service.url, ["a"], cache_dir=tmp_path)
    service.dim = 6
    with pytest.raises(EmbeddingServiceError, match="dimension"):
        fetch_embeddings(service.url, ["a", "b"], cache_dir=tmp_path)


def test_unreachable_endpoint(tmp_path):
    with pytest.raises(EmbeddingServiceError, match="transport"):
        fetch_embeddings("http://127.0.0.1:9", ["a"], cache_dir=tmp_path, retries=1, backoff=0.0,
                         timeout=0.5)


def test_cache_keys_separate_endpoints(tmp_path):
    assert EmbeddingCache.key("http://a", "x") != EmbeddingCache.key("http://b", "x")
    cache = EmbeddingCache(tmp_path)
    k = EmbeddingCache.key("http://a", "x")
    cache.put(k, np.arange(3, dtype=np.float32))
    np.testing.assert_array_equal(cache.get(k), [0, 1, 2])
    assert not list(tmp_path.rglob("*.tmp"))
