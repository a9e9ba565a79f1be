import json
import re

import numpy as np
import pytest

from mscalednn import runner
from mscalednn.cli import main
from mscalednn.config import bundled_configs, load_config, parse_config_text, parse_number, resolve_scales
from mscalednn.errors import ConfigError, NonFiniteLossError
from mscalednn.losses import mse_vs_true
from mscalednn.network import load_checkpoint
from mscalednn.optimizer import LrSchedule, lr_at
from mscalednn.problems import sine_poisson
from mscalednn.report import CSV_HEADER, Row, RunRecord, emit_csv, emit_svg_plot, format_csv, parse_csv, read_csv
from mscalednn.rng import Streams

FIT_CFG = """
[experiment]
name = tinyfit
task = fit
loss = mse
epochs = 4
seed = 3
chunk_size = 16

[network]
widths = 1-12-12-1
activation = srelu
scales = 4
init = D2

[optimizer]
lr0 = 1e-3
lr_decay = 1e-3

[data]
target = hf1d
train_size = 40
test_size = 20
batch_size = 16

[variant.ms1]
network.scales = 1

[variant.ms4]
network.scales = 4
"""

PDE_CFG = """
[experiment]
name = tinypde
task = pde
loss = {loss}
epochs = 5
seed = 2
chunk_size = 8

[network]
widths = d-10-10-1
activation = srelu3
scales = 3
init = D1

[optimizer]
lr0 = 1e-3
lr_decay = 5e-7

[data]
d = 2
n = 20
n_tilde = 3
beta = 100

[eval]
mse_mode = {mode}
eval_size = 30
"""


def _cfg(text, **fmt):
    return parse_config_text(text.format(**fmt) if fmt else text, source="test.cfg")


# -- config ------------------------------------------------------------------------------


def test_fig3_config():
    cfg = load_config("fig3.cfg")
    runs = cfg.expand()
    assert cfg.widths == (3, 2500, 1) and cfg.task == "fit"
    assert cfg.init == "D1" and cfg.lr0 == 5e-5 and cfg.lr_decay == 2e-7
    assert cfg.train_size == cfg.test_size == cfg.batch_size == 10_000
    assert {r.activation for r in runs} >= {"srelu"}
    assert {resolve_scales(r.scales, 2500) for r in runs if not isinstance(r.scales, tuple)} == {1, 100}


def test_bundled_family_coverage():
    names = set(bundled_configs())
    for fig in range(3, 13):
        assert f"fig{fig}.cfg" in names and f"fig{fig}_desk.cfg" in names
    for name in names:
        for run in load_config(name).expand():
            assert run.widths[0] == run.input_dim


def test_fit_task_rejects_ritz():
    with pytest.raises(ConfigError, match="incompatible"):
        _cfg(FIT_CFG.replace("loss = mse", "loss = ritz"))


def test_seed_is_required():
    with pytest.raises(ConfigError, match="experiment.seed"):
        _cfg(FIT_CFG.replace("seed = 3\n", ""))


@pytest.mark.parametrize(
    "old, new, message",
    [
        ("chunk_size = 16", "chunk = 16", "experiment.chunk"),
        ("[optimizer]", "[optimiser]", "unknown section"),
        ("epochs = 4", "epochs = four", "experiment.epochs"),
        ("widths = 1-12-12-1", "widths = 2-12-12-1", "input dimension"),
        ("widths = 1-12-12-1", "widths = 1-12-12-2", "end with 1"),
        ("scales = 4", "scales = 40", "network.scales"),
        ("batch_size = 16", "batch_size = 41", "batch_size"),
        ("network.scales = 1", "scales = 1", "section.key"),
        ("activation = srelu", "activation = gelu", "network.activation"),
    ],
)
def test_config_errors_name_the_key(old, new, message):
    with pytest.raises(ConfigError, match=re.escape(message)):
        _cfg(FIT_CFG.replace(old, new, 1))


def test_parse_number_and_domain():
    assert parse_number("-pi/2") == -np.pi / 2
    assert parse_number("2pi") == 2 * np.pi
    assert parse_number("5e-5") == 5e-5
    cfg = _cfg(FIT_CFG.replace("train_size", "domain = -pi/2, pi\ntrain_size"))
    assert cfg.domain == (-np.pi / 2, np.pi)


def test_spread_and_const_scales():
    assert resolve_scales(("spread", 100), 64).tolist() == [j * 100 // 64 + 1 for j in range(64)]
    assert resolve_scales(("const", 100.0), 4).tolist() == [100.0] * 4


def test_variants_and_overrides():
    cfg = _cfg(FIT_CFG)
    runs = cfg.with_overrides(epochs=2, seed=9).expand()
    assert [r.label for r in runs] == ["ms1", "ms4"]
    assert all(r.epochs == 2 and r.seed == 9 for r in runs)
    assert cfg.digest() != cfg.with_overrides(seed=9).digest()


def test_pde_width_placeholder_follows_d():
    cfg = _cfg(PDE_CFG + "\n[variant.d5]\ndata.d = 5\n", loss="ritz", mode="fixed")
    (run,) = cfg.expand()
    assert run.widths == (5, 10, 10, 1)
    assert _cfg(PDE_CFG, loss="lse", mode="step").eval_size == 30


def test_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        load_config("/nonexistent/thing.cfg")


# -- CSV and SVG ---------------------------------------------------------------------------


def test_single_row_csv(tmp_path):
    rec = RunRecord("ms1", [Row(1, 5e-5, train_loss=0.123456789123)])
    path = tmp_path / "r.csv"
    emit_csv(rec, path)
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[1] == "1,5e-05,0.123456789,,,"
    assert len(lines) == 2


def test_csv_round_trip():
    rows = [Row(e, 1e-3 / e, train_loss=1.0 / e, test_loss=2.0 / e if e % 2 else None) for e in range(1, 6)]
    rows.append(Row(6, 1e-4, train_loss=-3.5, mse_true=0.25, wall_ms=12.5))
    rec = RunRecord("x", rows)
    back = parse_csv(format_csv(rec), label="x")
    assert back == parse_csv(format_csv(back), label="x")
    assert format_csv(back) == format_csv(rec)
    exact = RunRecord("y", [Row(1, 0.5, 0.25, None, 0.125, None)])
    assert parse_csv(format_csv(exact), label="y") == exact


def test_csv_header_check():
    with pytest.raises(ValueError):
        parse_csv("epoch,loss\n1,2\n")


def test_svg_structure(tmp_path):
    recs = [
        RunRecord("ms1", [Row(e, 1e-3, train_loss=1.0 / e, test_loss=2.0 / e) for e in range(1, 20)]),
        RunRecord("ms100", [Row(e, 1e-3, train_loss=0.1 / e) for e in range(1, 20)]),
    ]
    path = tmp_path / "p.svg"
    emit_svg_plot(recs, path, title="demo")
    svg = path.read_text()
    labels = re.findall(r'<polyline data-label="([^"]+)"', svg)
    assert labels == ["ms1 train", "ms1 test", "ms100 train"]
    dashed = re.findall(r'<polyline data-label="([^"]+)"[^>]*stroke-dasharray', svg)
    assert dashed == ["ms1 test"]
    legend = re.findall(r'<text class="legend"[^>]*>([^<]+)<', svg)
    assert legend == labels
    assert "1e-3" in svg and "1e0" in svg


def test_svg_pde_records_plot_truth_error(tmp_path):
    recs = [RunRecord(lbl, [Row(e, 1e-3, train_loss=-5.0, mse_true=1.0 / e) for e in range(1, 5)]) for lbl in ("ms1", "ms100")]
    path = tmp_path / "p.svg"
    emit_svg_plot(recs, path)
    assert re.findall(r'<polyline data-label="([^"]+)"', path.read_text()) == ["ms1", "ms100"]


def test_svg_needs_data(tmp_path):
    with pytest.raises(ValueError):
        emit_svg_plot([RunRecord("a")], tmp_path / "p.svg")


# -- runner -------------------------------------------------------------------------------


def test_zero_epoch_run(tmp_path):
    (run,) = _cfg(FIT_CFG).with_overrides(epochs=0).expand()[:1]
    rec = runner.run_experiment(run, tmp_path)
    assert rec.rows == []
    assert (tmp_path / "ms1.csv").read_text() == ",".join(CSV_HEADER) + "\n"
    meta = json.loads((tmp_path / "ms1.meta.json").read_text())
    assert meta["generator"] == "pcg64-splitmix-v1"
    assert meta["config_hash"] == run.digest()
    assert meta["artifact_version"]


def test_fit_run_rows(tmp_path):
    run = _cfg(FIT_CFG).expand()[1]
    rec = runner.run_experiment(run, tmp_path)
    assert [r.epoch for r in rec.rows] == [1, 2, 3, 4]
    sched = LrSchedule(run.lr0, run.lr_decay)
    steps_per_epoch = 3
    for r in rec.rows:
        assert r.lr == lr_at(sched, r.epoch * steps_per_epoch - 1)
        assert r.train_loss > 0 and r.test_loss > 0 and r.mse_true is None and r.wall_ms is None
    assert load_checkpoint(tmp_path / "ms4.ckpt").widths == (1, 12, 12, 1)


def test_eval_every_keeps_final_epoch(tmp_path):
    (run,) = _cfg(FIT_CFG).with_overrides(epochs=5, eval_every=2).expand()[:1]
    assert [r.epoch for r in runner.run_experiment(run, tmp_path, write=False).rows] == [2, 4, 5]


@pytest.mark.parametrize("loss", ["ritz", "lse"])
def test_pde_fixed_mode_metric(tmp_path, loss):
    (run,) = _cfg(PDE_CFG, loss=loss, mode="fixed").expand()
    rec = runner.run_experiment(run, tmp_path)
    net = load_checkpoint(tmp_path / f"{run.label}.ckpt")
    pts = runner.fixed_eval_set(run, Streams(run.seed))
    assert len(pts) == 30 + 2 * 2 * round(3 * 30 / 20)
    expected = mse_vs_true(net, pts, sine_poisson(2).solution)
    assert rec.rows[-1].mse_true == expected
    assert read_csv(tmp_path / f"{run.label}.csv").rows[-1].mse_true == float(format(expected, ".9g"))


def test_pde_step_mode_runs(tmp_path):
    (run,) = _cfg(PDE_CFG, loss="ritz", mode="step").expand()
    rec = runner.run_experiment(run, tmp_path, write=False)
    assert len(rec.rows) == 5 and all(r.mse_true > 0 for r in rec.rows)


def _csv_bytes(cfg, out):
    runner.run_config(cfg, out)
    return {p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))}


def test_determinism_across_runs_and_threads(tmp_path):
    fit = _cfg(FIT_CFG)
    pde = _cfg(PDE_CFG, loss="lse", mode="fixed")
    for i, cfg in enumerate((fit, pde)):
        a = _csv_bytes(cfg, tmp_path / f"a{i}")
        b = _csv_bytes(cfg, tmp_path / f"b{i}")
        c = _csv_bytes(cfg.with_overrides(threads=3), tmp_path / f"c{i}")
        assert a and a == b == c
        assert (tmp_path / f"a{i}" / "plot.svg").is_file()


def test_non_finite_loss_aborts(tmp_path, monkeypatch):
    real = runner.evaluate_objective
    calls = {"n": 0}

    def flaky(*args, **kw):
        res = real(*args, **kw)
        calls["n"] += 1
        if calls["n"] == 3:
            res.value = float("nan")
        return res

    monkeypatch.setattr(runner, "evaluate_objective", flaky)
    (run,) = _cfg(PDE_CFG, loss="ritz", mode="step").expand()
    with pytest.raises(NonFiniteLossError) as info:
        runner.run_experiment(run, tmp_path)
    assert info.value.epoch == 3 and info.value.param_norm > 0
    assert [r.epoch for r in read_csv(tmp_path / f"{run.label}.csv").rows] == [1, 2]


# -- CLI ------------------------------------------------------------------------------------


def test_cli_run_and_plot(tmp_path, capsys):
    cfg_path = tmp_path / "tiny.cfg"
    cfg_path.write_text(FIT_CFG)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg_path), "--epochs", "2", "--seed", "5", "--out", str(out)]) == 0
    assert "ms1:" in capsys.readouterr().out
    assert read_csv(out / "ms4.csv").rows[-1].epoch == 2
    assert json.loads((out / "ms1.meta.json").read_text())["config"]["seed"] == 5
    svg = tmp_path / "both.svg"
    assert main(["plot", "--out", str(svg), str(out / "ms1.csv"), str(out / "ms4.csv")]) == 0
    assert re.findall(r'data-label="([^"]+)"', svg.read_text()) == ["ms1 train", "ms1 test", "ms4 train", "ms4 test"]


def test_cli_errors(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert "error:" in capsys.readouterr().err
    bad = tmp_path / "bad.cfg"
    bad.write_text(FIT_CFG.replace("seed = 3\n", ""))
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["plot", "--out", str(tmp_path / "x.svg"), str(tmp_path / "none.csv")]) == 2
    with pytest.raises(SystemExit) as info:
        main(["launch"])
    assert info.value.code != 0


def test_cli_configs_and_check(capsys):
    assert main(["configs"]) == 0
    assert "fig9_desk.cfg" in capsys.readouterr().out
    assert main(["check"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)
