import socket
import threading
import time

import httpx
import pytest
import uvicorn

from skymark.server import create_app


class LiveServer:
    """A uvicorn server running the app in a background thread."""

    def __init__(self, **app_kwargs):
        self.app = create_app(**app_kwargs)
        with socket.socket() as s:
            s.bind(("127.0.0.1", 0))
            self.port = s.getsockname()[1]
        self.base_url = f"http://127.0.0.1:{self.port}"
        config = uvicorn.Config(self.app, host="127.0.0.1", port=self.port,
                                log_level="error")
        self.server = uvicorn.Server(config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    def start(self) -> "LiveServer":
        self.thread.start()
        deadline = time.monotonic() + 10.0
        while not self.server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("server did not start")
            time.sleep(0.01)
        return self

    def stop(self) -> None:
        self.server.should_exit = True
        self.thread.join(timeout=10.0)

    def client(self, **kwargs) -> httpx.Client:
        kwargs.setdefault("timeout", 10.0)
        return httpx.Client(base_url=self.base_url, **kwargs)


@pytest.fixture
def live_server():
    servers = []

    def _start(**app_kwargs) -> LiveServer:
        srv = LiveServer(**app_kwargs).start()
        servers.append(srv)
        return srv

    yield _start
    for srv in servers:
        srv.stop()
