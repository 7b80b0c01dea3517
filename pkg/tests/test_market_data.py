import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppnfolio.errors import AlignmentError, ContractError, DataError, ParseError
from ppnfolio.market_data import (CLOSE, TimeGrid, fill_missing, ingest_panel, price_relative,
                                  read_asset_csv, window_at, write_asset_csv)
from ppnfolio.synthetic import panel_from_closes

GRID10 = TimeGrid(start=0, period_seconds=60, periods=10)


def write_rows(path, rows, header="timestamp,open,high,low,close"):
    path.write_text(header + "\n" + "\n".join(",".join(str(v) for v in r) for r in rows) + "\n")
    return path


def flat_rows(stamps, closes):
    return [(t, c, c, c, c) for t, c in zip(stamps, closes)]


def test_two_aligned_assets(tmp_path):
    stamps = GRID10.timestamps()
    a = write_rows(tmp_path / "a.csv", flat_rows(stamps, np.linspace(1, 2, 10)))
    b = write_rows(tmp_path / "b.csv", flat_rows(stamps, np.linspace(3, 4, 10)))
    panel = ingest_panel([a, b], grid=GRID10)
    assert (panel.m, panel.n) == (2, 10)
    assert panel.asset_ids == ("a", "b")
    assert panel.is_complete
    assert [p[1] for p in panel.provenance] == [10, 10]


def test_unsorted_rows_are_sorted(tmp_path):
    stamps = GRID10.timestamps()
    rows = flat_rows(stamps, np.arange(1.0, 11.0))[::-1]
    series = read_asset_csv(write_rows(tmp_path / "x.csv", rows))
    assert np.all(np.diff(series.timestamps) > 0)
    assert series.ohlc[0, CLOSE] == 1.0


def test_late_starting_asset_is_marked_then_filled(tmp_path):
    stamps = GRID10.timestamps()
    full = write_rows(tmp_path / "full.csv", flat_rows(stamps, np.ones(10)))
    late = write_rows(tmp_path / "late.csv", [(t, 5.0 + i, 6.0 + i, 4.0, 5.0 + i) for i, t in enumerate(stamps[4:])])
    panel = ingest_panel([full, late], grid=GRID10)
    assert not panel.observed[1, :4].any() and panel.observed[1, 4:].all()
    assert np.isnan(panel.ohlc[1, :4]).all()
    filled = fill_missing(panel)
    np.testing.assert_array_equal(filled.ohlc[1, :4], np.full((4, 4), 5.0))
    np.testing.assert_array_equal(filled.relatives()[1:5, 2], np.ones(4))


def test_interior_gap_is_flat(tmp_path):
    stamps = GRID10.timestamps()
    rows = flat_rows(stamps, [1, 1, 2, 0, 0, 0, 3, 3, 3, 3])
    del rows[3:6]
    path = write_rows(tmp_path / "gap.csv", rows)
    filled = fill_missing(ingest_panel([path], grid=GRID10))
    np.testing.assert_array_equal(filled.ohlc[0, 3:6], np.full((3, 4), 2.0))
    x = filled.relatives()[:, 1]
    np.testing.assert_array_equal(x[3:6], np.ones(3))
    assert x[6] == 1.5


def test_no_gaps_means_unchanged(bundled):
    again = fill_missing(bundled)
    np.testing.assert_array_equal(again.ohlc, bundled.ohlc)


def test_fill_is_idempotent(tmp_path):
    stamps = GRID10.timestamps()
    rows = flat_rows(stamps, np.arange(1.0, 11.0))
    path = write_rows(tmp_path / "g.csv", rows[2:5] + rows[7:])
    once = fill_missing(ingest_panel([path], grid=GRID10))
    twice = fill_missing(once)
    np.testing.assert_array_equal(once.ohlc, twice.ohlc)


def test_asset_without_observations_is_a_data_error(tmp_path):
    stamps = GRID10.timestamps()
    a = write_rows(tmp_path / "a.csv", flat_rows(stamps, np.ones(10)))
    b = write_rows(tmp_path / "b.csv", flat_rows(stamps, np.ones(10)))
    panel = ingest_panel([a, b], grid=GRID10)
    observed = panel.observed.copy()
    observed[1] = False
    from ppnfolio.market_data import PricePanel
    broken = PricePanel(panel.asset_ids, panel.timestamps.copy(), np.array(panel.ohlc), observed, 60)
    with pytest.raises(DataError):
        fill_missing(broken)


@pytest.mark.parametrize("row,needle", [
    ("60,1,1,1", "expected 5 fields"),
    ("60,1,abc,1,1", "could not convert"),
    ("60,1,1,1,-2", "positive"),
    ("60,2,1.5,1,2", "high/low"),
])
def test_malformed_rows_name_file_and_line(tmp_path, row, needle):
    path = tmp_path / "bad.csv"
    path.write_text("timestamp,open,high,low,close\n0,1,1,1,1\n" + row + "\n")
    with pytest.raises(ParseError) as info:
        read_asset_csv(path)
    assert info.value.line == 3
    assert "bad.csv:3" in str(info.value) and needle in str(info.value)


def test_duplicate_timestamp_rejected(tmp_path):
    path = write_rows(tmp_path / "dup.csv", [(0, 1, 1, 1, 1), (0, 2, 2, 2, 2)])
    with pytest.raises(ParseError):
        read_asset_csv(path)


def test_empty_overlap_is_alignment_error(tmp_path):
    path = write_rows(tmp_path / "far.csv", flat_rows([10_000_000, 10_000_060], [1, 1]))
    with pytest.raises(AlignmentError):
        ingest_panel([path], grid=GRID10)


def test_window_of_constant_prices_is_ones():
    panel = panel_from_closes(np.full((2, 12), 7.0), wick=0.0)
    np.testing.assert_array_equal(window_at(panel, 10, 5).values, np.ones((2, 5, 4)))


def test_window_hand_division():
    panel = panel_from_closes(np.array([[1.0, 2.0, 4.0, 8.0]]))
    w = window_at(panel, 3, 2).values
    np.testing.assert_allclose(w[0, :, CLOSE], [0.5, 1.0], rtol=0, atol=0)


def test_window_shape_for_eleven_assets():
    panel = panel_from_closes(np.exp(np.random.default_rng(0).normal(0, 0.01, (11, 40)).cumsum(axis=1)))
    assert window_at(panel, 35, 30).values.shape == (11, 30, 4)


def test_window_before_k_is_rejected(bundled):
    with pytest.raises(ContractError):
        window_at(bundled, 10, 30)


@given(t=st.integers(30, 1999))
@settings(max_examples=50, deadline=None)
def test_window_last_close_is_one(bundled, t):
    w = window_at(bundled, t, 30).values
    assert np.all(w[:, -1, CLOSE] == 1.0)
    assert np.all(w > 0)


def test_price_relative_examples():
    panel = panel_from_closes(np.array([[10.0, 9.0], [4.0, 5.0]]))
    np.testing.assert_allclose(price_relative(panel, 1), [1.0, 0.9, 1.25], rtol=1e-15)
    flat = panel_from_closes(np.ones((3, 3)))
    np.testing.assert_array_equal(price_relative(flat, 2), np.ones(4))
    double = panel_from_closes(np.array([[1.0, 2.0], [1.0, 1.0]]))
    assert price_relative(double, 1)[1] == 2.0


def test_relatives_reconstruct_closes(bundled):
    x = bundled.relatives()
    closes = bundled.closes
    np.testing.assert_allclose(closes[:-1] * x[1:, 1:], closes[1:], rtol=1e-12)
    assert np.all(x[:, 0] == 1.0)


def test_ingest_round_trip_is_deterministic(tmp_path, bundled):
    paths = []
    for i, name in enumerate(bundled.asset_ids):
        p = tmp_path / f"{name}.csv"
        write_asset_csv(p, bundled.timestamps, bundled.ohlc[i])
        paths.append(p)
    one = fill_missing(ingest_panel(paths))
    two = fill_missing(ingest_panel(paths))
    np.testing.assert_array_equal(one.ohlc, bundled.ohlc)
    assert one.fingerprint() == two.fingerprint() == bundled.fingerprint()
    np.testing.assert_array_equal(window_at(one, 500, 30).values, window_at(two, 500, 30).values)


def test_panel_is_read_only(bundled):
    with pytest.raises(ValueError):
        bundled.ohlc[0, 0, 0] = 1.0
