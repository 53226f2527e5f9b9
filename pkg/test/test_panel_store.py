"""
测试面板CSV读写
"""

import numpy as np
import pytest

from atsm.core.panel_store import load_panel, panel_frame, save_panel
from atsm.core.statespace import simulate_panel
from atsm.models.errors import PanelFormatError

HEADER = "date,short_rate,inflation,y4,y40\n"


def _write(tmp_path, text, name="panel.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_round_trip_preserves_values(tmp_path, table1_prop):
    panel = simulate_panel(table1_prop, 60, seed=10)
    path = tmp_path / "panel.csv"
    save_panel(panel, path)
    loaded = load_panel(path)

    assert loaded.quarters == panel.quarters
    assert loaded.maturities == panel.maturities
    np.testing.assert_array_max_ulp(loaded.short_rate, panel.short_rate, maxulp=2)
    np.testing.assert_array_max_ulp(loaded.inflation, panel.inflation, maxulp=2)
    for n in panel.maturities:
        assert np.array_equal(np.isnan(loaded.yields[n]), np.isnan(panel.yields[n]))
        mask = np.isfinite(panel.yields[n])
        np.testing.assert_array_max_ulp(loaded.yields[n][mask], panel.yields[n][mask], maxulp=2)


def test_units_on_disk(tmp_path):
    path = _write(tmp_path, HEADER + "2000Q1,4.0,2.5,4.4,\n2000Q2,3.6,2.1,4.0,5.2\n")
    panel = load_panel(path)
    np.testing.assert_allclose(panel.short_rate, [0.01, 0.009])
    np.testing.assert_array_equal(panel.inflation, [2.5, 2.1])
    assert np.isnan(panel.yields[40][0])
    assert panel.yields[40][1] == pytest.approx(0.013)
    frame = panel_frame(panel)
    assert list(frame.columns) == ["date", "short_rate", "inflation", "y4", "y40"]
    assert frame["short_rate"].iloc[0] == pytest.approx(4.0)


def test_unknown_column(tmp_path):
    path = _write(tmp_path, "date,short_rate,inflation,gdp\n2000Q1,4.0,2.5,1.0\n")
    with pytest.raises(PanelFormatError):
        load_panel(path)


def test_undeclared_maturity(tmp_path):
    path = _write(tmp_path, HEADER + "2000Q1,4.0,2.5,4.4,5.0\n")
    with pytest.raises(PanelFormatError):
        load_panel(path, maturities=[4, 8])


def test_malformed_cell_names_row(tmp_path):
    text = HEADER + "2000Q1,4.0,2.5,4.4,\n2000Q2,4.1,2.6,4.5,\n2000Q3,4.2,abc,4.6,\n"
    with pytest.raises(PanelFormatError) as exc:
        load_panel(_write(tmp_path, text))
    assert exc.value.row == 4


def test_dates_must_increase(tmp_path):
    text = HEADER + "2000Q2,4.0,2.5,4.4,\n2000Q1,4.1,2.6,4.5,\n"
    with pytest.raises(PanelFormatError) as exc:
        load_panel(_write(tmp_path, text))
    assert exc.value.row == 3


def test_bad_date(tmp_path):
    with pytest.raises(PanelFormatError) as exc:
        load_panel(_write(tmp_path, HEADER + "spring,4.0,2.5,4.4,\n"))
    assert exc.value.row == 2


def test_empty_yield_columns_give_stage1_panel(tmp_path):
    text = HEADER + "2000Q1,4.0,2.5,,\n2000Q2,4.1,2.6,,\n"
    panel = load_panel(_write(tmp_path, text))
    assert panel.maturities == []
    assert panel.n_quarters == 2


def test_missing_file(tmp_path):
    with pytest.raises(PanelFormatError):
        load_panel(tmp_path / "missing.csv")


def test_quarter_without_observations_names_row(tmp_path):
    text = HEADER + "2000Q1,4.0,2.5,4.4,\n2000Q2,,,,\n2000Q3,4.2,2.7,4.6,\n"
    with pytest.raises(PanelFormatError) as exc:
        load_panel(_write(tmp_path, text))
    assert exc.value.row == 3


def test_quarter_with_only_a_yield_is_accepted(tmp_path):
    text = HEADER + "2000Q1,4.0,2.5,4.4,\n2000Q2,,,,5.0\n"
    panel = load_panel(_write(tmp_path, text), maturities=[4, 40])
    assert np.isnan(panel.short_rate[1])
    assert panel.observation_count(40) == 1
