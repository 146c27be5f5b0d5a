import os

import pytest


@pytest.fixture(autouse=True)
def worker_threads(monkeypatch):
    """Sequential evaluation unless the caller sets FRACSEM_THREADS"""
    monkeypatch.setenv("FRACSEM_THREADS", os.environ.get("FRACSEM_THREADS", "1"))
