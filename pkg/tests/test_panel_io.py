import json

import numpy as np
import pytest

from ifepanel import (
    PanelData,
    PanelDataError,
    PanelSchema,
    build_panel,
    get_family,
    load_panel,
    save_panel,
    with_outcomes,
)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def probit_schema(tmp_path, **extra):
    payload = {"family": "probit", **extra}
    return PanelSchema.from_json(write(tmp_path, "schema.json", json.dumps(payload)))


def test_load_two_individuals(tmp_path):
    csv = write(tmp_path, "p.csv", "id,t,y,z\n7,1,1,0.5\n7,2,0,1.5\n9,1,0,-1.0\n9,2,1,2.0\n")
    panel = load_panel(csv, probit_schema(tmp_path))
    assert (panel.n, panel.T, panel.p) == (2, 2, 1)
    assert panel.ids == (7, 9)
    assert panel.column_names == ("z",)
    np.testing.assert_array_equal(panel.y, [[1, 0], [0, 1]])


def test_rows_in_any_order(tmp_path):
    shuffled = write(tmp_path, "s.csv", "id,t,y,z\n9,2,1,2.0\n7,1,1,0.5\n9,1,0,-1.0\n7,2,0,1.5\n")
    ordered = write(tmp_path, "o.csv", "id,t,y,z\n7,1,1,0.5\n7,2,0,1.5\n9,1,0,-1.0\n9,2,1,2.0\n")
    schema = probit_schema(tmp_path)
    a = load_panel(shuffled, schema)
    b = load_panel(ordered, schema)
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.X, b.X)


def test_unbalanced_names_offender(tmp_path):
    csv = write(tmp_path, "u.csv", "id,t,y,z\n7,1,1,0.5\n7,2,0,1.5\n9,1,0,-1.0\n")
    with pytest.raises(PanelDataError, match="unbalanced: id 9"):
        load_panel(csv, probit_schema(tmp_path))


def test_duplicate_cell_rejected(tmp_path):
    csv = write(tmp_path, "d.csv", "id,t,y,z\n7,1,1,0.5\n7,1,0,1.5\n")
    with pytest.raises(PanelDataError, match="duplicate"):
        load_panel(csv, probit_schema(tmp_path))


def test_non_numeric_cell_names_row(tmp_path):
    csv = write(tmp_path, "n.csv", "id,t,y,z\n7,1,1,0.5\n7,2,oops,1.5\n")
    with pytest.raises(PanelDataError, match="row 3"):
        load_panel(csv, probit_schema(tmp_path))


def test_outcome_domain_rejected(tmp_path):
    csv = write(tmp_path, "y2.csv", "id,t,y,z\n7,1,2,0.5\n7,2,0,1.5\n")
    with pytest.raises(PanelDataError, match="row 2"):
        load_panel(csv, probit_schema(tmp_path))


def test_round_trip_is_bit_identical(tmp_path):
    rng = np.random.default_rng(3)
    y = rng.integers(0, 2, size=(4, 3)).astype(float)
    X = rng.standard_normal((4, 3, 2))
    panel = PanelData(y, X, ("a", "b"))
    first = tmp_path / "one.csv"
    save_panel(panel, first)
    again = load_panel(first, probit_schema(tmp_path))
    np.testing.assert_array_equal(again.y, panel.y)
    np.testing.assert_array_equal(again.X, panel.X)
    second = tmp_path / "two.csv"
    save_panel(again, second)
    assert first.read_bytes() == second.read_bytes()


def test_lag_column_checked(tmp_path):
    # lag regressor equals y shifted by one period; t=1 holds the initial value
    csv = write(
        tmp_path, "lag.csv",
        "id,t,y,ylag\n1,1,1,0\n1,2,0,1\n1,3,1,0\n2,1,0,1\n2,2,1,0\n2,3,1,1\n",
    )
    schema = probit_schema(tmp_path, lag_column="ylag")
    panel = load_panel(csv, schema)
    assert panel.lag_column == 0
    np.testing.assert_array_equal(panel.X[:, 1:, 0], panel.y[:, :-1])

    bad = write(
        tmp_path, "badlag.csv",
        "id,t,y,ylag\n1,1,1,0\n1,2,0,0\n1,3,1,0\n2,1,0,1\n2,2,1,0\n2,3,1,1\n",
    )
    with pytest.raises(PanelDataError, match="lag column"):
        load_panel(bad, schema)


def test_schema_validation(tmp_path):
    with pytest.raises(PanelDataError, match="missing 'family'"):
        PanelSchema.from_json(write(tmp_path, "s1.json", "{}"))
    with pytest.raises(PanelDataError, match="unknown keys"):
        PanelSchema.from_json(write(tmp_path, "s2.json", '{"family": "probit", "zzz": 1}'))
    schema = PanelSchema.from_json(
        write(tmp_path, "s3.json", '{"family": "poisson", "alpha_bound": 10}')
    )
    assert schema.family == get_family("poisson")
    assert schema.alpha_bound == 10.0


def test_panel_invariants():
    y = np.zeros((2, 3))
    with pytest.raises(PanelDataError):
        PanelData(y, np.zeros((2, 2, 1)))
    with pytest.raises(PanelDataError):
        PanelData(y, np.zeros((2, 3, 1)), ("a", "b"))
    with pytest.raises(PanelDataError, match="lag column"):
        PanelData(np.array([[1.0, 0.0]]), np.array([[[0.0], [0.0]]]), ("lag",), lag_column=0)
    panel = PanelData(y, np.zeros((2, 3, 1)), ("a",))
    with pytest.raises(ValueError):
        panel.y[0, 0] = 1.0  # arrays are frozen


def test_build_panel_rebuilds_lag():
    y = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
    X = np.zeros((2, 3, 2))
    panel = build_panel(y, X, ("lag", "z"), lag_column=0, dynamic_init=[1.0, 0.0])
    np.testing.assert_array_equal(panel.X[:, 0, 0], [1.0, 0.0])
    np.testing.assert_array_equal(panel.X[:, 1:, 0], y[:, :-1])

    y2 = 1.0 - y
    swapped = with_outcomes(panel, y2, dynamic_init=[1.0, 0.0])
    np.testing.assert_array_equal(swapped.X[:, 1:, 0], y2[:, :-1])
    with pytest.raises(PanelDataError, match="dynamic_init"):
        with_outcomes(panel, y2)


def test_subsetting():
    rng = np.random.default_rng(0)
    panel = PanelData(rng.integers(0, 2, (5, 6)).astype(float), rng.standard_normal((5, 6, 1)), ("z",))
    sub = panel.subset_individuals([0, 2])
    assert sub.n == 2 and sub.ids == (1, 3)
    block = panel.period_slice(2, 5)
    assert block.T == 3
    np.testing.assert_array_equal(block.y, panel.y[:, 2:5])
    minus = panel.drop_period(1)
    assert minus.T == 5
    np.testing.assert_array_equal(minus.y[:, 1], panel.y[:, 2])
