import json
import logging

import numpy as np
import pytest

from btq.cache import ENV_VAR, EigenCache
from btq.semiclassics import QuantumSpaceSolver


@pytest.fixture
def subspace(solver, torus1):
    return solver.solve(torus1, 4)[1]


def test_round_trip_is_bit_identical(tmp_path, subspace, torus1):
    c = EigenCache(tmp_path)
    c.put(torus1.hash(), 4, 16, 1, subspace)
    S = c.get(torus1.hash(), 4, 16, 1)
    assert S.basis.tobytes() == subspace.basis.tobytes()
    assert S.eigenvalues.tobytes() == subspace.eigenvalues.tobytes()
    assert S.residuals.tobytes() == subspace.residuals.tobytes()
    assert (S.gap_edge, S.window, S.weight) == (subspace.gap_edge, subspace.window, subspace.weight)
    assert S.meta["cached"]


def test_header_layout(tmp_path, subspace, torus1):
    c = EigenCache(tmp_path)
    c.put(torus1.hash(), 4, 16, 1, subspace)
    raw = c.path(torus1.hash(), 4, 16, 1).read_bytes()
    head, payload = raw.split(b"\n", 1)
    header = json.loads(head)
    assert header["version"] == 1 and header["d"] == 4 and header["n"] == 256
    assert len(payload) == 8 * (2 * 4 + 2) + 16 * 256 * 4
    assert np.array_equal(np.frombuffer(payload, "<f8", count=4), subspace.eigenvalues)


def test_miss(tmp_path, torus1):
    assert EigenCache(tmp_path).get(torus1.hash(), 4, 16, 1) is None


def test_corruption_detected(tmp_path, subspace, torus1, caplog):
    c = EigenCache(tmp_path)
    c.put(torus1.hash(), 4, 16, 1, subspace)
    path = c.path(torus1.hash(), 4, 16, 1)
    raw = bytearray(path.read_bytes())
    raw[-5] ^= 0xFF
    path.write_bytes(bytes(raw))
    with caplog.at_level(logging.WARNING):
        assert c.get(torus1.hash(), 4, 16, 1) is None
    assert "checksum" in caplog.text


def test_stale_version_ignored(tmp_path, subspace, torus1):
    c = EigenCache(tmp_path)
    c.put(torus1.hash(), 4, 16, 1, subspace)
    path = c.path(torus1.hash(), 4, 16, 1)
    head, payload = path.read_bytes().split(b"\n", 1)
    header = json.loads(head)
    header["version"] = 0
    path.write_bytes(json.dumps(header).encode() + b"\n" + payload)
    assert c.get(torus1.hash(), 4, 16, 1) is None
    assert path.exists()  # never evicted


def test_garbage_file(tmp_path, torus1):
    c = EigenCache(tmp_path)
    c.path(torus1.hash(), 4, 16, 1).write_bytes(b"not a cache")
    assert c.get(torus1.hash(), 4, 16, 1) is None


def test_env_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_VAR, str(tmp_path / "env"))
    assert EigenCache.from_env().root == tmp_path / "env"
    assert EigenCache.from_env(str(tmp_path / "flag")).root == tmp_path / "flag"
    monkeypatch.delenv(ENV_VAR)
    assert EigenCache.from_env() is None


def test_solver_uses_cache(tmp_path, torus1):
    c = EigenCache(tmp_path)
    _, S1 = QuantumSpaceSolver(cache=c).solve(torus1, 4)
    _, S2 = QuantumSpaceSolver(cache=c).solve(torus1, 4)
    assert S2.meta.get("cached")
    assert S1.basis.tobytes() == S2.basis.tobytes()
