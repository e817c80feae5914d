"""In-process chat-completions endpoint for exercising the eval client."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


class MockChatServer:
    """Serves POST /chat/completions, answering via ``reply_fn(prompt)``.

    ``fail_first`` makes the first N requests fail with ``fail_status`` to
    exercise retry behavior.  Started servers must be closed via ``stop()``
    (or use it as a context manager).
    """

    def __init__(self, reply_fn, *, fail_first: int = 0, fail_status: int = 429):
        self.reply_fn = reply_fn
        self.requests_seen = 0
        self.auth_headers: list[str | None] = []
        self._failures_left = fail_first
        self._fail_status = fail_status
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                body = self.rfile.read(int(self.headers.get("Content-Length", 0)))
                with outer._lock:
                    outer.requests_seen += 1
                    outer.auth_headers.append(self.headers.get("Authorization"))
                    must_fail = outer._failures_left > 0
                    if must_fail:
                        outer._failures_left -= 1
                if must_fail:
                    self.send_response(outer._fail_status)
                    self.end_headers()
                    return
                payload = json.loads(body)
                prompt = payload["messages"][-1]["content"]
                reply = outer.reply_fn(prompt)
                response = {
                    "choices": [{"message": {"role": "assistant", "content": reply}}],
                    "usage": {"prompt_tokens": len(prompt.split()), "completion_tokens": len(reply.split())},
                }
                data = json.dumps(response).encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self._server.server_port}"

    def start(self) -> "MockChatServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> "MockChatServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
