from __future__ import annotations

import socket

import pytest

from idvault.config import ServiceConfig
from idvault.gateway import ServiceStack


@pytest.fixture
def data_dir(tmp_path):
    return str(tmp_path / "data")


@pytest.fixture
def stack(data_dir):
    service = ServiceStack(ServiceConfig(data_dir=data_dir, jwt_secret="test-secret"))
    yield service
    service.close()


@pytest.fixture
def free_port():
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    return port
