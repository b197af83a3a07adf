import csv
import io
import math

import numpy as np
import pytest

from scidma.analysis.capacity import (GapRow, ThresholdRow, capacity_gap, rows_to_csv, shannon_limit, sum_rate,
                                      sweep_users)
from scidma.analysis.exit_chart import (ExitCurve, cnd_curve, exit_curves, mud_fixed_point, trajectory,
                                        vnd_curve, write_exit_csv)
from scidma.analysis.density_evolution import noise_variance
from scidma.analysis.gaussian import j_mean, phi
from scidma.code_construction import couple, make_regular_protograph, named_code_parts


def test_shannon_limit():
    assert shannon_limit(1.0) == pytest.approx(0.0, abs=1e-12)
    assert shannon_limit(2.0) == pytest.approx(10 * math.log10(3))
    assert capacity_gap(1.0, 1.55) == pytest.approx(1.55)
    assert sum_rate(0.5, 8, 4) == 1.0
    with pytest.raises(ValueError):
        shannon_limit(0.0)


def test_cnd_curve_endpoints():
    assert cnd_curve(6, np.array([0.0]))[0] == pytest.approx(0.0, abs=1e-9)
    assert cnd_curve(6, np.array([1.0]))[0] == pytest.approx(1.0, abs=1e-9)
    grid = np.linspace(0, 1, 21)
    assert np.all(np.diff(cnd_curve(6, grid)) >= -1e-12)


def test_vnd_curve_endpoints():
    assert vnd_curve(3, 4, 8, 2.3, np.array([1.0]))[0] == pytest.approx(1.0, abs=1e-9)
    grid = np.linspace(0, 1, 21)
    assert np.all(np.diff(vnd_curve(3, 4, 8, 2.3, grid)) >= -1e-12)


def test_mud_fixed_point_satisfies_equation():
    s2 = noise_variance(2.0)
    mu_c = np.array([0.0, 0.5, 3.0])
    d = mud_fixed_point(mu_c, 3, 4, 8, s2)
    assert np.allclose(d, 4.0 / (8 * s2 + 7 * phi(3 * d + 3 * mu_c)), rtol=1e-10)


def test_trajectories_block_stalls_coupled_converges():
    block = trajectory(make_regular_protograph(3, 6), 8, 4, 2.3, 300)
    coupled = trajectory(couple(named_code_parts("c1"), 20), 8, 4, 2.3, 300)
    assert block.i_e[-1] < 0.99
    assert coupled.i_e[-1] > 0.999
    assert np.all(np.diff(block.i_e) >= -1e-12)


def test_exit_curves_csv():
    curves = exit_curves(3, 6, 8, 4, 2.3, n_points=11, coupled=couple(named_code_parts("c1"), 10), n_iter=20)
    assert [c.label for c in curves][:2] == ["MUD+REP+VND", "CND"]
    text = write_exit_csv(curves)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["curve", "I_A", "I_E"]
    assert len(rows) - 1 == sum(c.i_a.size for c in curves)
    assert isinstance(curves[0], ExitCurve)


def test_sweep_reports_unbounded_rate():
    rows = sweep_users(named_code_parts("c1"), [1], [64], L=10)
    assert rows[0].threshold_db is None and rows[0].gap_db is None
    assert rows[0].r_sum == pytest.approx(32.0)


def test_rows_to_csv(tmp_path):
    rows = [ThresholdRow(4, 3, 6, 3, 2.5412, 1.4761), ThresholdRow(2, 9, 12, 3, None, 0.6)]
    text = rows_to_csv(rows, tmp_path / "t.csv", header_comment="N = 8")
    assert text.splitlines()[0] == "# N = 8"
    assert text.splitlines()[1] == "d_r,d_v,d_c,W,uncoupled_db,coupled_db"
    assert text.splitlines()[3] == "2,9,12,3,,0.6000"
    assert (tmp_path / "t.csv").read_text() == text
    gap = rows_to_csv([GapRow(10, 8, 0.4, -2.0, 1.0)])
    assert gap.splitlines() == ["d_r,N,R_sum,threshold_db,gap_db", "10,8,0.4000,-2.0000,1.0000"]
