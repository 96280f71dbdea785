import hashlib
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from tabperm.datasets import load_fixture
from tabperm.table import make_table


@pytest.fixture(scope="session")
def rugby():
    return load_fixture("rugby")


@pytest.fixture(scope="session")
def grid6():
    return load_fixture("grid6")


@pytest.fixture
def t3x3():
    return make_table([["a", "b", "c"], ["d", "e", "f"], ["g", "h", "i"]],
                      ["H0", "H1", "H2"], ["R0", "R1", "R2"])


class FakeEmbedServer:
    """Local JSON embedding endpoint; vectors are hashes of the input text."""

    def __init__(self, dim=8):
        self.dim = dim
        self.requests = []
        self.fail_next = 0
        self.always_fail = False
        self.drift_text = None
        self.lock = threading.Lock()
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                with server.lock:
                    server.requests.append({"body": body, "headers": dict(self.headers)})
                    fail = server.always_fail or server.fail_next > 0
                    if server.fail_next > 0:
                        server.fail_next -= 1
                if fail:
                    self.send_response(500)
                    self.end_headers()
                    return
                data = [{"index": k, "embedding": server.vector(t)} for k, t in enumerate(body["input"])]
                out = json.dumps({"data": data}).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(out)))
                self.end_headers()
                self.wfile.write(out)

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}/v1/embeddings"
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self.thread.start()

    def vector(self, text):
        dim = self.dim + 1 if text == self.drift_text else self.dim
        digest = hashlib.sha256(text.encode()).digest()
        return [(digest[k % 32] - 127.5) / 128 + k * 1e-3 for k in range(dim)]

    @property
    def texts(self):
        return [t for r in self.requests for t in r["body"]["input"]]

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def embed_server():
    srv = FakeEmbedServer()
    yield srv
    srv.close()


# acceptance outcomes, filled by tests/test_acceptance.py and printed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {num:2d}  {title}  ({detail})")
