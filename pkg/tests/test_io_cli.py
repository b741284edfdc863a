import json
import math
import struct

import numpy as np
import pytest
from conftest import random_real_field
from hypothesis import given, settings
from hypothesis import strategies as st

from fracns import io as fio
from fracns import spectral as sp
from fracns.cli import run_command
from fracns.kernels import heat_kernel_table


class TestSnapshots:
    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 10_000), d=st.sampled_from([1, 2, 3]), gamma=st.floats(1.01, 2.0),
           time=st.floats(0.0, 1e3))
    def test_round_trip_bit_exact(self, tmp_path_factory, seed, d, gamma, time):
        grid = sp.make_grid(d, 8)
        u = random_real_field(grid, seed, project=d > 1)
        path = tmp_path_factory.mktemp("snap") / "u.fns"
        fio.write_field_snapshot(u, gamma, time, path)
        v, g2, t2 = fio.read_field_snapshot(path)
        assert v.coeffs.tobytes() == u.coeffs.tobytes()
        assert (g2, t2) == (gamma, time)
        assert (v.mean_zero, v.div_free) == (u.mean_zero, u.div_free)
        assert path.stat().st_size == 29 + d * 8**d * 16

    def test_header_layout(self, tmp_path):
        grid = sp.make_grid(2, 8)
        u = random_real_field(grid, 1, project=True)
        fio.write_field_snapshot(u, 1.5, 0.25, tmp_path / "u.fns")
        raw = (tmp_path / "u.fns").read_bytes()
        assert raw[:4] == b"FNS1"
        assert struct.unpack_from("<IIddB", raw, 4) == (2, 8, 1.5, 0.25, 3)
        # first payload entry is wavenumber (-4, -4) of component 0
        first = np.frombuffer(raw, dtype="<c16", count=1, offset=29)[0]
        assert first == u.coeffs[0, 4, 4]

    def test_truncated(self, tmp_path):
        grid = sp.make_grid(2, 8)
        fio.write_field_snapshot(random_real_field(grid), 1.5, 0.0, tmp_path / "u.fns")
        raw = (tmp_path / "u.fns").read_bytes()
        (tmp_path / "short.fns").write_bytes(raw[:-10])
        with pytest.raises(fio.SnapshotError) as info:
            fio.read_field_snapshot(tmp_path / "short.fns")
        msg = str(info.value)
        assert f"{len(raw)} bytes" in msg and f"{len(raw) - 10} bytes" in msg

    def test_bad_magic(self, tmp_path):
        (tmp_path / "x.fns").write_bytes(b"FNS2" + bytes(40))
        with pytest.raises(fio.SnapshotError, match="not a FNS1 snapshot"):
            fio.read_field_snapshot(tmp_path / "x.fns")

    def test_div_free_flag_checked(self, tmp_path):
        grid = sp.make_grid(2, 8)
        u = random_real_field(grid, 2)
        fio.write_field_snapshot(u.with_coeffs(u.coeffs, div_free=True), 1.5, 0.0, tmp_path / "u.fns")
        with pytest.raises(fio.SnapshotError, match="divergence"):
            fio.read_field_snapshot(tmp_path / "u.fns")

    def test_mean_flag_checked(self, tmp_path):
        grid = sp.make_grid(2, 8)
        u = random_real_field(grid, 2, mean_zero=False)
        fio.write_field_snapshot(u.with_coeffs(u.coeffs, mean_zero=True), 1.5, 0.0, tmp_path / "u.fns")
        with pytest.raises(fio.SnapshotError, match="mean"):
            fio.read_field_snapshot(tmp_path / "u.fns")


class TestCsv:
    def test_header_units_and_precision(self, tmp_path):
        fio.write_csv(tmp_path / "a.csv", ["t", "x"], [{"t": 0.1, "x": 1 / 3}], {"t": "time"})
        lines = (tmp_path / "a.csv").read_text().splitlines()
        assert lines[0] == "t [time],x [1]"
        assert lines[1] == "0.10000000000000001,0.33333333333333331"
        assert float(lines[1].split(",")[1]) == 1 / 3

    def test_kernel_table_csv(self, tmp_path):
        tab = heat_kernel_table(2.0, 1.0, 2, 4.0, 9)
        fio.kernel_table_csv(tab, tmp_path / "k.csv")
        lines = (tmp_path / "k.csv").read_text().splitlines()
        assert lines[0] == "x1 [length],x2 [length],value [length^-2]"
        assert len(lines) == 1 + 81

    def test_digest_is_canonical(self):
        a = fio.canonical_digest({"b": 1, "a": [1.0, math.inf]})
        b = fio.canonical_digest({"a": [1.0, math.inf], "b": 1})
        assert a == b and len(a) == 64

    def test_atomic_write_leaves_no_temp(self, tmp_path):
        fio.atomic_write_bytes(tmp_path / "f.bin", b"abc")
        fio.atomic_write_bytes(tmp_path / "f.bin", b"xyz")
        assert [p.name for p in tmp_path.iterdir()] == ["f.bin"]
        assert (tmp_path / "f.bin").read_bytes() == b"xyz"


def sim_config(tmp_path, **overrides):
    cfg = {"gamma": 1.5, "n": 16, "t_end": 0.02, "slab_dt": 0.01, "method": "picard_slab",
           "store_snapshots": True, "q_list": [6.0, "inf"],
           "initial": {"kind": "gevrey_random", "amplitude": 0.2, "seed": 1}}
    cfg.update(overrides)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return path


class TestCli:
    def test_simulate(self, tmp_path):
        out = tmp_path / "out"
        assert run_command(["simulate", "--config", str(sim_config(tmp_path)), "--out", str(out)]) == 0
        names = sorted(p.name for p in out.iterdir())
        assert {"trajectory.csv", "contraction.csv", "final.fns", "manifest.json",
                "snapshot_00000.fns", "snapshot_00002.fns"} <= set(names)
        manifest = json.loads((out / "manifest.json").read_text())
        assert sorted(manifest["outputs"]) == sorted(str(out / n) for n in names if n != "manifest.json")
        assert manifest["config_digest"] == fio.canonical_digest(manifest["config"])
        header = (out / "trajectory.csv").read_text().splitlines()[0]
        assert header.startswith("t [time],energy [1]") and "norm_Linf [1]" in header

    def test_reruns_byte_identical(self, tmp_path):
        cfg = sim_config(tmp_path)
        for name in ("a", "b"):
            assert run_command(["simulate", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
        for f in ("trajectory.csv", "contraction.csv", "final.fns"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_snapshot_restart(self, tmp_path):
        run_command(["simulate", "--config", str(sim_config(tmp_path)), "--out", str(tmp_path / "a")])
        cfg = sim_config(tmp_path, initial={"kind": "file", "path": str(tmp_path / "a" / "final.fns")},
                         store_snapshots=False)
        assert run_command(["simulate", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0

    def test_recurrences(self, tmp_path):
        assert run_command(["recurrences", "--nmax", "40", "--out", str(tmp_path)]) == 0
        text = (tmp_path / "sequences.csv").read_text()
        # G(30) = 2^30 Catalan(30), printed exactly
        assert f"G,30,{2**30 * math.comb(60, 30) // 31}," in text

    def test_kernel_table(self, tmp_path):
        argv = ["kernel-table", "--kind", "oseen", "--d", "2", "--samples", "9", "--out", str(tmp_path)]
        assert run_command(argv) == 0
        assert (tmp_path / "kernel.csv").exists()

    def test_verify_kernels_exit_codes(self, tmp_path):
        argv = ["verify-kernels", "--gamma", "1.5", "--d", "2", "--kmax", "3", "--samples", "33",
                "--fft-size", "256", "--out", str(tmp_path)]
        assert run_command(argv) == 0
        assert run_command(argv + ["--threshold-factor", "0.5"]) == 2

    def test_bench_via_json_config(self, tmp_path):
        cfg = tmp_path / "bench.json"
        cfg.write_text(json.dumps({"trials": 200, "n": 32, "kmax": 40, "nmax": 10}))
        assert run_command(["bench-inequalities", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        assert json.loads((tmp_path / "manifest.json").read_text())["config"]["trials"] == 200

    def test_derivative_report_from_snapshot(self, tmp_path):
        run_command(["simulate", "--config", str(sim_config(tmp_path)), "--out", str(tmp_path / "a")])
        argv = ["derivative-report", "--snapshot", str(tmp_path / "a" / "final.fns"), "--kmax", "6",
                "--out", str(tmp_path / "r")]
        assert run_command(argv) == 0
        rows = (tmp_path / "r" / "derivative_report.csv").read_text().splitlines()
        assert len(rows) == 1 + 3 * 7

    @pytest.mark.parametrize("argv", [
        ["frobnicate"],
        ["recurrences", "--bogus", "1"],
        ["recurrences", "--nmax", "x"],
        ["simulate"],
    ])
    def test_usage_errors(self, tmp_path, capsys, argv):
        assert run_command(argv + ["--out", str(tmp_path)]) == 1
        assert capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = sim_config(tmp_path, gama=1.5)
        assert run_command(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 1
        assert "gama" in capsys.readouterr().err

    def test_picard_divergence_exit(self, tmp_path):
        cfg = sim_config(tmp_path, initial={"kind": "gevrey_random", "amplitude": 50.0},
                         picard_max_iter=5, slab_dt=0.05, t_end=0.05)
        assert run_command(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
        assert (tmp_path / "o" / "manifest.json").exists()
