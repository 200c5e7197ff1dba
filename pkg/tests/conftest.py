"""Shared fixtures"""

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def db_path(tmp_path, monkeypatch):
    """Point the report store at a fresh file"""
    path = tmp_path / "store" / "convbound.db"
    monkeypatch.setenv("CONVBOUND_DATABASE_PATH", str(path))
    return path


@pytest.fixture(autouse=True)
def default_oracle_cap(monkeypatch):
    monkeypatch.delenv("CONVBOUND_ORACLE_CAP", raising=False)
