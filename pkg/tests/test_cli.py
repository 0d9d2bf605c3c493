import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from deepquench.cli import main, run
from deepquench.config import ConfigError, RunConfig, validate_config
from deepquench.errors import ValidationError
from deepquench.export import SUMMARY_COLUMNS, export_plot_data, read_control, write_control
from deepquench.fields import ControlPair
from deepquench.grid import StripGrid, trace

ROOT = Path(__file__).resolve().parent.parent
SMALL = dict(grid__nx=8, grid__ny=2, time__nt=4)


def small_cfg(**kw):
    return RunConfig().with_values(**{**SMALL, **kw})


def rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_shipped_config_is_the_default_and_valid():
    cfg = RunConfig.load(ROOT / "configs" / "default.cfg")
    assert cfg.values == RunConfig().values
    problem = validate_config(cfg)
    assert problem.model.grid.nx == 64 and len(problem.schedule) == 5


def test_dump_parse_round_trip():
    cfg = small_cfg(cost__beta=(2.0, 0.0, 1.0, 0.5, 0.5), initial__y0="sin:0.3:2", fail_fast=True)
    again = RunConfig.parse(cfg.dump())
    assert again.values == cfg.values


def test_parse_collects_line_numbers():
    with pytest.raises(ConfigError) as info:
        RunConfig.parse("grid.nx = 8\nnonsense\ngrid.ny = two\nfoo.bar = 1\n")
    msg = str(info.value)
    assert "line 2" in msg and "line 3" in msg and "line 4" in msg


def test_terminal_trace_mismatch_names_node(tmp_path):
    g = StripGrid(8, 2)
    z = trace(1.2 * np.cos(np.broadcast_to(g.x, g.shape)), g)
    z[0, 3] += 0.5
    np.savetxt(tmp_path / "zg.csv", z, delimiter=",")
    cfg = RunConfig(small_cfg(cost__z_Gamma_T="file:zg.csv").values, tmp_path)
    with pytest.raises(ValidationError) as info:
        validate_config(cfg)
    codes = dict(info.value.violations)
    assert "A5_violation" in codes and "(0, 3)" in codes["A5_violation"]


def test_all_zero_weights_rejected():
    with pytest.raises(ValidationError) as info:
        validate_config(small_cfg(cost__beta=(0.0,) * 5))
    assert ("A1_violation", "weights all vanish") in info.value.violations


@pytest.mark.parametrize(
    "kw, code",
    [
        (dict(initial__y0="1.5"), "A3_violation"),
        (dict(bounds__lower="2"), "A1_violation"),
        (dict(bounds__R=0.5), "A4_violation"),
        (dict(quench__p=0.5, quench__q=1.0), "A2_violation"),
        (dict(mode="sideways"), "config_violation"),
        (dict(grid__nx=2), "config_violation"),
        (dict(initial__y0="wave:3"), "config_violation"),
    ],
)
def test_violation_codes(kw, code):
    with pytest.raises(ValidationError) as info:
        validate_config(small_cfg(**kw))
    assert code in [c for c, _ in info.value.violations]


def test_state_mode_with_trivial_data(tmp_path):
    cfg = small_cfg(mode="state", initial__y0="0", potentials__g2p=(0.0,), potentials__f2p=(0.0,))
    assert run(cfg, out=tmp_path) == 0
    data = rows(tmp_path / "state.csv")
    assert len(data) == 5 * 4 * 8
    assert all(float(r["value"]) == 0.0 for r in data)


def test_obstacle_mode_writes_multipliers(tmp_path):
    assert run(small_cfg(mode="obstacle", control__u="2"), out=tmp_path) == 0
    xi = rows(tmp_path / "multipliers.csv")
    assert len(xi) == 4 * 4 * 8 and xi[0]["m"] == "1"


def test_optimize_mode(tmp_path):
    assert run(small_cfg(mode="optimize", quench__alpha=0.1), out=tmp_path) == 0
    adj = rows(tmp_path / "adjoint.csv")
    assert {r["lambda"] for r in adj if r["k"] == "4"} == {""}
    assert rows(tmp_path / "iterations.csv")[0]["iter"] == "0"


def test_quench_mode_summary_rows(tmp_path):
    sched = (1.0, 0.1, 0.01)
    assert run(small_cfg(quench__schedule=sched), out=tmp_path) == 0
    summary = rows(tmp_path / "path_summary.csv")
    assert len(summary) == len(sched) + 1
    assert tuple(summary[0]) == SUMMARY_COLUMNS
    assert summary[-1]["label"] == "obstacle" and all(r["status"] == "ok" for r in summary)
    for name in ("dist_to_anchor", "cost", "proj_residual", "potential_norm"):
        lines = (tmp_path / "plot" / f"{name}.dat").read_text().splitlines()
        assert len(lines) == len(sched)
        assert all(math.isfinite(float(v)) for line in lines for v in line.split())


def test_fixed_anchor_quench_writes_anchor(tmp_path):
    cfg = small_cfg(quench__schedule=(1.0, 0.1), quench__anchor="fixed")
    assert run(cfg, out=tmp_path) == 0
    assert (tmp_path / "anchor.csv").exists() and (tmp_path / "path_summary_plain.csv").exists()
    reuse = RunConfig(cfg.with_values(quench__anchor_file="anchor.csv").values, tmp_path)
    out2 = tmp_path / "again"
    assert run(reuse, out=out2) == 0
    assert (out2 / "path_summary.csv").read_bytes() == (tmp_path / "path_summary.csv").read_bytes()


def test_control_round_trip(tmp_path):
    cfg = small_cfg()
    problem = validate_config(cfg)
    g, tg = problem.model.grid, problem.model.time
    rng = np.random.default_rng(4)
    u = ControlPair(rng.normal(size=(tg.nt,) + g.shape), rng.normal(size=(tg.nt,) + g.surface_shape))
    write_control(tmp_path, u, g, tg)
    assert read_control(tmp_path / "control.csv", tmp_path / "control_surface.csv", g, tg).equals(u)


def test_plot_export_is_byte_identical(tmp_path):
    from deepquench.quench import QuenchSchedule, run_continuation

    problem = validate_config(small_cfg())
    sched = QuenchSchedule((1.0, 0.1))
    path = run_continuation(sched, problem.initial, problem.cost, problem.bounds, problem.model)
    a, b = export_plot_data(path, tmp_path / "a"), export_plot_data(path, tmp_path / "b")
    names = sorted(p.name for p in a.iterdir())
    assert "snapshot_tT.dat" in names
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_main_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("grid.nx = eight\n")
    assert main(["state", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "line 1" in capsys.readouterr().err

    invalid = tmp_path / "invalid.cfg"
    invalid.write_text("grid.nx = 8\ngrid.ny = 2\ntime.nt = 4\ncost.beta = 0, 0, 0, 0, 0\n")
    assert main(["validate", "--config", str(invalid), "--out", str(tmp_path / "v")]) == 1
    record = json.loads((tmp_path / "v" / "failure.json").read_text())
    assert record["status"] == "failed" and record["violations"][0]["code"] == "A1_violation"

    good = tmp_path / "good.cfg"
    good.write_text("grid.nx = 8\ngrid.ny = 2\ntime.nt = 4\n")
    assert main(["validate", "--config", str(good), "--out", str(tmp_path / "g")]) == 0
