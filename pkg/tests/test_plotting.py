from bds_sim.engine import simulate_bds
from bds_sim.multiscale import TwoTimescaleConfig, simulate_two_timescale
from bds_sim.plotting import emit_plot, emit_timeline
from bds_sim.rng import Streams

import pytest


def test_constant_series(tmp_path):
    out = emit_plot([([0, 1, 2], [1, 1, 1])], ["flat"], tmp_path / "flat.svg")
    text = out.read_text()
    assert text.startswith("<?xml") and "<svg" in text


def test_plot_rejects_empty_and_mismatched(tmp_path):
    with pytest.raises(ValueError):
        emit_plot([], [], tmp_path / "x.svg")
    with pytest.raises(ValueError):
        emit_plot([([1], [1])], [], tmp_path / "x.svg")


def test_log_x_and_timeline(tmp_path, toy, toy_env):
    emit_plot([([1, 0.1, 0.01], [0.1, 0.03, 0.002])], ["tv"], tmp_path / "tv.svg", logx=True)
    path = simulate_two_timescale(TwoTimescaleConfig(toy, 0.05, 2.0), toy_env, (1, 1), Streams(0))
    out = emit_timeline(path, tmp_path / "timeline.svg", "eps=0.05")
    assert out.stat().st_size > 0
