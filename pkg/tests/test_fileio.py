import json
import warnings

import numpy as np
import pytest

from pfcsav.fileio import (
    CheckpointError,
    SnapshotFormatError,
    check_snapshots_against_manifest,
    encode_snapshot,
    read_checkpoint,
    read_csv,
    read_pgm,
    read_snapshot,
    write_checkpoint,
    write_csv,
    write_pgm,
    write_snapshot,
)
from pfcsav.initial import CrystalliteIC, Patch, build_initial, patch_mask
from pfcsav.schemes import State
from pfcsav.spectral import make_grid


class TestSnapshot:
    def test_round_trip_bit_identical(self, tmp_path, rng):
        g = make_grid(3.5, 128.0, 16)
        phi = rng.standard_normal(g.shape)
        write_snapshot(tmp_path / "a.pfcf", g, phi, 0.1 + 0.2, 7)
        snap = read_snapshot(tmp_path / "a.pfcf")
        assert np.array_equal(snap.phi, phi) and snap.grid == g
        assert snap.t == 0.1 + 0.2 and snap.step == 7

    def test_layout(self, rng):
        g = make_grid(2.0, 3.0, 4)
        phi = rng.standard_normal(g.shape)
        blob = encode_snapshot(g, phi, 1.5, 3)
        assert blob.startswith(b"PFCF1\n4 2.0 3.0 1.5 3\n")
        assert np.array_equal(np.frombuffer(blob[-128:], "<f8").reshape(4, 4), phi)

    def test_truncated(self, tmp_path, rng):
        g = make_grid(1.0, 1.0, 8)
        path = tmp_path / "t.pfcf"
        write_snapshot(path, g, rng.standard_normal(g.shape), 0.0, 0)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(SnapshotFormatError, match="expected 512 bytes, got 502"):
            read_snapshot(path)

    def test_bad_magic(self, tmp_path):
        (tmp_path / "x").write_bytes(b"NOPE\n4 1 1 0 0\n")
        with pytest.raises(SnapshotFormatError):
            read_snapshot(tmp_path / "x")

    def test_time_mismatch_warns(self, tmp_path):
        g = make_grid(1.0, 1.0, 4)
        write_snapshot(tmp_path / "s.pfcf", g, np.zeros(g.shape), 2.0, 2)
        manifest = {"snapshots": [{"file": "s.pfcf", "t": 3.0}]}
        with pytest.warns(UserWarning, match="does not match"):
            check_snapshots_against_manifest(manifest, tmp_path)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            read_snapshot(tmp_path / "s.pfcf", expected_t=2.0)


class TestPgm:
    def test_constant(self, tmp_path):
        write_pgm(tmp_path / "c.pgm", np.full((6, 4), 0.3))
        pixels, meta = read_pgm(tmp_path / "c.pgm")
        assert np.all(pixels == 128) and pixels.shape == (4, 6)
        assert meta["phi_min"] == meta["phi_max"] == 0.3

    def test_two_values(self, tmp_path, rng):
        phi = np.where(rng.random((8, 8)) > 0.5, 2.0, -1.0)
        write_pgm(tmp_path / "b.pgm", phi)
        pixels, meta = read_pgm(tmp_path / "b.pgm")
        assert set(np.unique(pixels)) == {0, 255}
        assert np.array_equal(pixels.T == 255, phi == 2.0)
        assert (meta["phi_min"], meta["phi_max"]) == (-1.0, 2.0)

    def test_header(self, tmp_path):
        write_pgm(tmp_path / "h.pgm", np.arange(6.0).reshape(3, 2))
        raw = (tmp_path / "h.pgm").read_bytes()
        assert raw.startswith(b"P5\n# phi_min=0.0 phi_max=5.0\n3 2\n255\n")

    def test_scaling(self, tmp_path):
        write_pgm(tmp_path / "s.pgm", np.array([[0.0, 1.0], [0.5, 0.25]]))
        pixels, _ = read_pgm(tmp_path / "s.pgm")
        assert pixels.T.tolist() == [[0, 255], [128, 64]]

    def test_non_finite(self, tmp_path):
        with pytest.raises(ValueError):
            write_pgm(tmp_path / "n.pgm", np.array([[np.nan, 1.0]]))

    def test_crystallite_render(self, tmp_path):
        g = make_grid(200, 200, 128)
        patch = Patch(100.0, 100.0, 40.0, 0.0)
        phi = build_initial(CrystalliteIC(patches=(patch,)), g)
        write_pgm(tmp_path / "x.pgm", phi)
        pixels, _ = read_pgm(tmp_path / "x.pgm")
        m = patch_mask(g, patch)
        assert len(np.unique(pixels.T[m])) >= 2
        assert len(np.unique(pixels.T[~m])) == 1


class TestCheckpoint:
    def states(self, rng, N=8):
        g = make_grid(4.0, 4.0, N)
        prev = State(g, rng.standard_normal(g.shape), 1.0 / 3, 4, 0.1)
        cur = State(g, rng.standard_normal(g.shape), 2.0 / 7, 5, 0.1)
        return g, prev, cur

    def test_round_trip_exact(self, tmp_path, rng):
        g, prev, cur = self.states(rng)
        write_checkpoint(tmp_path / "c", cur, "second", {"time": {"dt": "0.1"}}, previous=prev)
        ck = read_checkpoint(tmp_path / "c", grid=g, scheme="second")
        assert np.array_equal(ck.state.phi, cur.phi) and ck.state.R == cur.R and ck.state.step_index == 5
        assert np.array_equal(ck.previous.phi, prev.phi) and ck.previous.R == prev.R
        assert ck.state.dt == 0.1 and ck.config == {"time": {"dt": "0.1"}}
        assert not (tmp_path / "c.tmp").exists()

    def test_grid_mismatch(self, tmp_path, rng):
        _, prev, cur = self.states(rng)
        write_checkpoint(tmp_path / "c", cur, "second", {}, previous=prev)
        with pytest.raises(CheckpointError, match="grid"):
            read_checkpoint(tmp_path / "c", grid=make_grid(4.0, 4.0, 16))

    def test_first_order_into_second(self, tmp_path, rng):
        _, _, cur = self.states(rng)
        write_checkpoint(tmp_path / "c", cur, "first", {})
        with pytest.raises(CheckpointError, match="previous level"):
            read_checkpoint(tmp_path / "c", scheme="second")
        assert read_checkpoint(tmp_path / "c", scheme="first").previous is None

    def test_second_order_write_requires_previous(self, tmp_path, rng):
        _, _, cur = self.states(rng)
        with pytest.raises(CheckpointError):
            write_checkpoint(tmp_path / "c", cur, "second", {})

    def test_version_mismatch(self, tmp_path, rng):
        _, prev, cur = self.states(rng)
        path = tmp_path / "c"
        write_checkpoint(path, cur, "second", {}, previous=prev)
        raw = path.read_bytes()
        head, rest = raw.split(b"\n", 2)[1], raw.split(b"\n", 2)[2]
        header = json.loads(head)
        header["version"] = 99
        path.write_bytes(b"PFCC1\n" + json.dumps(header).encode() + b"\n" + rest)
        with pytest.raises(CheckpointError, match="version"):
            read_checkpoint(path)

    def test_truncated(self, tmp_path, rng):
        _, prev, cur = self.states(rng)
        path = tmp_path / "c"
        write_checkpoint(path, cur, "second", {}, previous=prev)
        path.write_bytes(path.read_bytes()[:-1])
        with pytest.raises(CheckpointError):
            read_checkpoint(path)


def test_csv_full_precision(tmp_path):
    values = [(1, 0.1 + 0.2, 1 / 3), (2, 1e-300, -2.5)]
    write_csv(tmp_path / "s.csv", ("step", "a", "b"), values)
    write_csv(tmp_path / "s.csv", ("step", "a", "b"), [(3, 7.0, 8.0)], append=True)
    header, rows = read_csv(tmp_path / "s.csv")
    assert header == ["step", "a", "b"]
    assert [float(r[1]) for r in rows] == [0.1 + 0.2, 1e-300, 7.0]
    assert rows[0][0] == "1"
