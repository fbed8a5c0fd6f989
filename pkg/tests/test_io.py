import numpy as np
import pytest

from sgpe.hermite import SpectralField, tri_size
from sgpe.gaussian import OUState
from sgpe.io import (
    ConfigError,
    config_get,
    parse_config,
    read_snapshot,
    write_csv,
    write_json,
    write_snapshot,
)


def _random_state(rng, deg=5, t=1.25):
    c = rng.standard_normal(tri_size(deg)) + 1j * rng.standard_normal(tri_size(deg))
    return OUState(SpectralField(deg, c), t)


def test_snapshot_roundtrip(tmp_path, rng):
    state = _random_state(rng)
    p = tmp_path / "snap.bin"
    write_snapshot(p, state)
    got, u = read_snapshot(p)
    assert u is None
    assert got.t == state.t
    assert np.array_equal(got.field.coeffs, state.field.coeffs)


def test_snapshot_with_remainder(tmp_path, rng):
    state = _random_state(rng)
    u = SpectralField(5, rng.standard_normal(tri_size(5)) * (1 + 0j))
    p = tmp_path / "snap.bin"
    write_snapshot(p, state, u)
    got, gu = read_snapshot(p)
    assert np.array_equal(gu.coeffs, u.coeffs)
    assert np.array_equal(got.field.coeffs, state.field.coeffs)


def test_snapshot_degree_mismatch(tmp_path, rng):
    state = _random_state(rng)
    with pytest.raises(ValueError):
        write_snapshot(tmp_path / "x.bin", state, SpectralField.zero(3))


def test_snapshot_bad_magic(tmp_path):
    p = tmp_path / "junk.bin"
    p.write_bytes(b"NOTASNAP" + b"\0" * 32)
    with pytest.raises(ValueError):
        read_snapshot(p)


def test_csv_full_precision(tmp_path):
    p = tmp_path / "t.csv"
    x = 0.1 + 0.2  # not representable prettily
    write_csv(p, ["a", "b"], [(x, 7)])
    body = p.read_text().splitlines()
    assert body[0] == "a,b"
    val = float(body[1].split(",")[0])
    assert val == x  # 17 significant digits round-trip exactly


def test_config_parse(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nN = 8\ngamma1 = 1.5  # inline\nmode = lq-decay\n")
    cfg = parse_config(p)
    assert cfg == {"N": "8", "gamma1": "1.5", "mode": "lq-decay"}
    assert config_get(cfg, "N", int) == 8
    assert config_get(cfg, "gamma1", float) == 1.5
    assert config_get(cfg, "missing", int, 3) == 3


def test_config_errors(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("no_equals_here\n")
    with pytest.raises(ConfigError):
        parse_config(p)
    p.write_text("a = 1\na = 2\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(p)
    p.write_text("a = x\n")
    cfg = parse_config(p)
    with pytest.raises(ConfigError):
        config_get(cfg, "a", int)
    with pytest.raises(ConfigError, match="required"):
        config_get(cfg, "b", int, required=True)


def test_config_bool(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("x = true\ny = 0\nz = maybe\n")
    cfg = parse_config(p)
    assert config_get(cfg, "x", bool) is True
    assert config_get(cfg, "y", bool) is False
    with pytest.raises(ConfigError):
        config_get(cfg, "z", bool)


def test_json_numpy_types(tmp_path):
    p = tmp_path / "r.json"
    write_json(p, {"a": np.float64(1.5), "b": np.arange(3), "c": np.int64(2)})
    import json

    got = json.loads(p.read_text())
    assert got == {"a": 1.5, "b": [0, 1, 2], "c": 2}
