import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rulxai.data import (
    FEATURE_NAMES,
    Dataset,
    DataError,
    ParseError,
    Scaler,
    apply_scaler,
    check_consecutive_cycles,
    constant_features,
    fit_scaler,
    label_rul,
    parse_cmapss,
    sensor_index,
    simulate_degradation,
    split_rows,
    split_units,
    to_cmapss_text,
    to_csv_text,
)


def _line(unit, cycle, values):
    return " ".join([str(unit), str(cycle)] + [repr(v) for v in values])


def _naive_parse(text):
    # independent splitter: one list of floats per non-blank line
    return [[float(t) for t in ln.split(" ") if t] for ln in text.splitlines() if ln.strip()]


def test_feature_names_layout():
    assert len(FEATURE_NAMES) == 24
    assert FEATURE_NAMES[:3] == ("op-setting-1", "op-setting-2", "op-setting-3")
    assert FEATURE_NAMES[sensor_index(14)] == "sensor-14"


def test_parse_matches_naive_splitter(small_fleet):
    text = to_cmapss_text(small_fleet)
    rows = _naive_parse(text)
    ds = parse_cmapss(text)
    assert len(ds) == len(rows)
    for i in (0, 17, len(rows) - 1):
        assert ds.unit_ids[i] == rows[i][0]
        assert ds.cycles[i] == rows[i][1]
        assert ds.features[i].tolist() == rows[i][2:]


def test_parse_ignores_blank_lines_and_trailing_space():
    vals = [0.5] * 24
    text = "\n" + _line(1, 1, vals) + "   \n\n" + _line(1, 2, vals) + "\n"
    ds = parse_cmapss(io.StringIO(text))
    assert len(ds) == 2 and ds.cycles.tolist() == [1, 2]


def test_parse_wrong_field_count_reports_line():
    good = _line(1, 1, [0.0] * 24)
    bad = _line(1, 2, [0.0] * 23)
    with pytest.raises(ParseError) as info:
        parse_cmapss(good + "\n" + bad + "\n")
    assert info.value.line_no == 2
    assert str(info.value).startswith("line 2:")
    assert "25" in str(info.value)


def test_parse_non_numeric_and_empty():
    with pytest.raises(ParseError):
        parse_cmapss("1 1 " + " ".join(["x"] * 24))
    with pytest.raises(DataError, match="empty"):
        parse_cmapss("\n\n")


def test_round_trip_is_exact(small_fleet):
    back = parse_cmapss(to_cmapss_text(small_fleet))
    assert np.array_equal(back.features, small_fleet.features)
    assert np.array_equal(back.unit_ids, small_fleet.unit_ids)


def test_csv_header_and_rows(small_fleet):
    lines = to_csv_text(small_fleet).splitlines()
    assert lines[0].split(",") == ["unit", "cycle", *FEATURE_NAMES, "rul"]
    assert len(lines) == len(small_fleet) + 1


def test_label_rul_examples():
    ds = Dataset([1, 1, 1, 2, 2], [1, 2, 3, 1, 2], np.zeros((5, 24)))
    assert label_rul(ds).rul.tolist() == [2, 1, 0, 1, 0]
    assert label_rul(ds, cap=1).rul.tolist() == [1, 1, 0, 1, 0]


def test_label_rul_interleaved_units():
    ds = Dataset([2, 1, 2, 1], [1, 1, 2, 2], np.zeros((4, 24)))
    assert label_rul(ds).rul.tolist() == [1, 1, 0, 0]


def test_check_consecutive_cycles():
    check_consecutive_cycles(Dataset([1, 1], [1, 2], np.zeros((2, 24))))
    with pytest.raises(DataError):
        check_consecutive_cycles(Dataset([1, 1], [1, 3], np.zeros((2, 24))))


def test_dataset_is_read_only(small_fleet):
    with pytest.raises(ValueError):
        small_fleet.features[0, 0] = 1.0


@pytest.mark.parametrize("n,expected", [(20631, 4126), (10, 2), (11, 2), (5, 1)])
def test_split_rows_uses_floor(n, expected):
    ds = Dataset(np.ones(n, dtype=int), np.arange(1, n + 1), np.zeros((n, 24)))
    tr, te = split_rows(ds, 0.2, seed=0)
    assert len(te) == expected == math.floor(0.2 * n)
    assert len(tr) + len(te) == n


def test_split_rows_deterministic_and_disjoint(small_fleet):
    a_tr, a_te = split_rows(small_fleet, 0.2, seed=7)
    b_tr, b_te = split_rows(small_fleet, 0.2, seed=7)
    assert a_te.equals(b_te) and a_tr.equals(b_tr)
    key = lambda d: set(zip(d.unit_ids.tolist(), d.cycles.tolist()))
    assert not key(a_tr) & key(a_te)
    assert len(key(a_tr) | key(a_te)) == len(small_fleet)
    _, c_te = split_rows(small_fleet, 0.2, seed=8)
    assert not c_te.equals(a_te)


def test_split_units_keeps_engines_whole(small_fleet):
    tr, te = split_units(small_fleet, 0.25, seed=1)
    assert not set(tr.units()) & set(te.units())
    assert len(te.units()) == 3


def test_scaler_example():
    X = np.array([[1.0, 5.0], [3.0, 5.0]])
    s = fit_scaler(X)
    assert s.mean.tolist() == [2.0, 5.0]
    assert s.std.tolist() == [1.0, 0.0]  # population std
    assert s.zero_variance_mask.tolist() == [False, True]
    assert s.transform(X).tolist() == [[-1.0, 0.0], [1.0, 0.0]]
    assert Scaler.from_dict(s.to_dict()).transform(X).tolist() == s.transform(X).tolist()


def test_scaler_needs_two_rows():
    with pytest.raises(ValueError):
        fit_scaler(np.ones((1, 3)))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.integers(1, 5), st.integers(0, 2**31))
def test_scaler_standardises(n, d, seed):
    X = np.random.default_rng(seed).normal(3.0, 2.0, size=(n, d))
    X[:, 0] = 4.25  # one constant column
    s = fit_scaler(X)
    Z = s.transform(X)
    assert np.all(Z[:, 0] == 0.0)
    live = ~s.zero_variance_mask
    assert np.allclose(Z[:, live].mean(axis=0), 0.0, atol=1e-9)
    assert np.allclose(Z[:, live].std(axis=0), 1.0, atol=1e-9)
    assert np.allclose(s.inverse_transform(Z)[:, live], X[:, live])


def test_constant_features():
    X = np.column_stack([np.ones(5), np.arange(5.0)])
    assert constant_features(X).tolist() == [True, False]


def test_simulate_is_deterministic():
    a = simulate_degradation(5, seed=11)
    b = simulate_degradation(5, seed=11)
    assert a.equals(b)
    assert not a.equals(simulate_degradation(5, seed=12))


def test_simulate_line_count_is_sum_of_lifetimes():
    ds = simulate_degradation(100, seed=0)
    rows = _naive_parse(to_cmapss_text(ds))
    lifetimes = {}
    for r in rows:
        lifetimes[int(r[0])] = max(lifetimes.get(int(r[0]), 0), int(r[1]))
    assert len(lifetimes) == 100
    assert len(rows) == sum(lifetimes.values())
    check_consecutive_cycles(ds)


def test_simulate_noiseless_drift_is_monotone():
    ds = simulate_degradation(3, seed=2, noise_scale=0.0, drift_sensors=(4, 11))
    for u in ds.units():
        block = ds.unit_block(u).features
        for s in (4, 11):
            col = block[:, sensor_index(s)]
            d = np.diff(col)
            assert np.all(d > 0) or np.all(d < 0)
        assert np.ptp(block[:, sensor_index(1)]) == 0.0


def test_simulate_lifetimes_and_constant_sensors():
    ds = simulate_degradation(30, seed=4)
    lifetimes = [len(ds.unit_block(u)) for u in ds.units()]
    assert min(lifetimes) >= 120 and max(lifetimes) <= 360
    s = fit_scaler(ds)
    assert s.zero_variance_mask[sensor_index(1)]
    assert not s.zero_variance_mask[sensor_index(4)]


def test_label_rul_idempotent_and_decreasing(small_fleet):
    again = label_rul(small_fleet)
    assert np.array_equal(again.rul, label_rul(again).rul)
    for u in small_fleet.units():
        assert np.all(np.diff(small_fleet.unit_block(u).rul) < 0)


def test_apply_scaler_examples():
    X = np.array([[0.0, 2.0], [4.0, 2.0]])
    s = fit_scaler(X)
    assert s.transform(np.array([[2.0, 2.0]])).tolist() == [[0.0, 0.0]]
    assert s.transform(np.array([[4.0, 7.0]])).tolist() == [[1.0, 0.0]]
    with pytest.raises(ValueError):
        s.transform(np.zeros((1, 3)))


def test_apply_scaler_keeps_labels(small_fleet):
    scaled = apply_scaler(fit_scaler(small_fleet), small_fleet)
    assert np.array_equal(scaled.rul, small_fleet.rul)
    assert np.allclose(scaled.features.mean(axis=0), 0.0, atol=1e-9)


def test_simulate_reparses_identically():
    ds = simulate_degradation(4, seed=9)
    back = label_rul(parse_cmapss(to_cmapss_text(ds)))
    assert np.array_equal(back.rul, ds.rul)
    assert np.array_equal(back.features, ds.features)
