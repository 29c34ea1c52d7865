import numpy as np
import pytest

from portfolio_drl.market_data import (
    AssetSeries,
    DataError,
    Panel,
    align_and_fill,
    gen_synthetic,
    load_ohlcv,
    normalize_window,
    parse_features,
    price_relatives,
    select_portfolio,
    window_stack,
    write_ohlcv,
)

HEADER = "date,open,high,low,close,volume\n"


def _series(asset_id, start, closes, volume=100.0):
    dates = np.datetime64(start, "D") + np.arange(len(closes))
    c = np.asarray(closes, dtype=float)
    values = np.column_stack([c, c * 1.01, c * 0.99, c, np.full(len(c), volume)])
    return AssetSeries(asset_id, dates, values)


def _panel_from_closes(closes, highs=None):
    closes = np.atleast_2d(np.asarray(closes, dtype=float))
    highs = closes if highs is None else np.atleast_2d(np.asarray(highs, dtype=float))
    vol = np.ones_like(closes)
    values = np.stack([closes, highs, closes, closes, vol], axis=-1)
    cal = np.datetime64("2020-01-01") + np.arange(closes.shape[1])
    return Panel(tuple(f"A{i}" for i in range(len(closes))), cal, values)


# load_ohlcv ---------------------------------------------------------------------

def test_load_three_rows(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text(HEADER + "2020-01-01,1,2,0.5,1.5,10\n2020-01-02,1.5,2,1,1.8,0\n2020-01-03,1.8,2,1.7,1.9,5\n")
    s = load_ohlcv(p)
    assert len(s) == 3 and s.asset_id == "x"
    assert s.values[1].tolist() == [1.5, 2.0, 1.0, 1.8, 0.0]


def test_duplicate_date_is_named(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text(HEADER + "2020-01-01,1,1,1,1,1\n2020-01-01,1,1,1,1,1\n")
    with pytest.raises(DataError, match="2020-01-01"):
        load_ohlcv(p)


def test_unsorted_input_comes_back_sorted(tmp_path):
    rows = ["2020-01-03,3,3,3,3,1", "2020-01-01,1,1,1,1,1", "2020-01-02,2,2,2,2,1"]
    p = tmp_path / "x.csv"
    p.write_text(HEADER + "\n".join(rows) + "\n")
    s = load_ohlcv(p)
    expected = sorted(rows)  # ISO dates sort lexicographically
    assert [str(d) for d in s.dates] == [r.split(",")[0] for r in expected]
    assert s.values[:, 3].tolist() == [1.0, 2.0, 3.0]


def test_malformed_row_reports_line(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text(HEADER + "2020-01-01,1,1,1,1,1\n2020-01-02,1,abc,1,1,1\n")
    with pytest.raises(DataError, match=":3:"):
        load_ohlcv(p)


def test_nonpositive_price_rejected(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text(HEADER + "2020-01-01,1,1,0,1,1\n")
    with pytest.raises(DataError, match="non-positive"):
        load_ohlcv(p)


def test_write_then_load_round_trip(tmp_path):
    panel = gen_synthetic([0.001], [0.02], 20, rng=1)
    s = panel.to_series()[0]
    write_ohlcv(tmp_path / "a.csv", s)
    back = load_ohlcv(tmp_path / "a.csv")
    assert np.array_equal(back.dates, s.dates)
    assert back.values.tobytes() == s.values.tobytes()


# align_and_fill ---------------------------------------------------------------

def test_missing_day_forward_filled_with_zero_volume():
    a = _series("a", "2020-01-01", [9.0, 10.0, 11.0, 12.0])
    b = AssetSeries("b", np.array(["2020-01-01", "2020-01-02", "2020-01-04"], dtype="datetime64[D]"),
                    np.array([[9, 9, 9, 9, 5], [10, 11, 9, 10, 5], [12, 12, 12, 12, 5]], dtype=float))
    panel = align_and_fill([a, b])
    assert panel.n_days == 4
    assert panel.values[1, 2].tolist() == [10.0, 10.0, 10.0, 10.0, 0.0]
    # the filled day has a flat relative
    assert price_relatives(panel, 2)[2] == 1.0


def test_fully_overlapping_calendars():
    a = _series("a", "2020-01-01", [1, 2, 3])
    b = _series("b", "2020-01-01", [3, 2, 1])
    panel = align_and_fill([a, b])
    assert np.array_equal(panel.calendar, a.dates)


def test_staggered_starts_trim_to_latest_first_date():
    series = [_series("a", "2020-01-01", np.arange(1, 11)),
              _series("b", "2020-01-04", np.arange(1, 11)),
              _series("c", "2020-01-02", np.arange(1, 11))]
    panel = align_and_fill(series)
    common = set(series[0].dates)
    for s in series[1:]:
        common &= set(s.dates)
    assert panel.calendar[0] == max(s.dates[0] for s in series)
    assert set(panel.calendar) == common


def test_disjoint_series_fail():
    with pytest.raises(DataError, match="no common"):
        align_and_fill([_series("a", "2020-01-01", [1, 2]), _series("b", "2021-01-01", [1, 2])])


def test_aligned_panel_has_no_gaps_and_filled_rows_are_flat():
    rng = np.random.default_rng(0)
    base = np.datetime64("2020-01-01")
    series = []
    for k in range(4):
        keep = np.sort(rng.choice(60, size=45, replace=False))
        closes = 10 + rng.random(45)
        v = np.column_stack([closes, closes + 0.1, closes - 0.1, closes, rng.integers(1, 9, 45)])
        series.append(AssetSeries(f"s{k}", base + keep, v.astype(float)))
    panel = align_and_fill(series)
    assert np.all(np.isfinite(panel.values))
    for i, s in enumerate(series):
        own = np.isin(panel.calendar, s.dates)
        filled = np.flatnonzero(~own)
        assert np.all(panel.values[i, filled, 4] == 0)
        assert np.all(panel.close[i, filled] == panel.close[i, filled - 1])


# select_portfolio -----------------------------------------------------------

def test_single_candidate_is_selected():
    pool = gen_synthetic([0.0] * 5, [0.01] * 5, 1500, rng=0).to_series()
    panel = select_portfolio(pool, m=5, min_days=1200, rng=np.random.default_rng(1))
    assert panel.asset_ids == tuple(s.asset_id for s in pool)
    assert panel.n_days == 1500


def test_short_overlaps_fail():
    pool = [_series(f"s{k}", np.datetime64("2000-01-01") + 1000 * k, np.ones(1100)) for k in range(6)]
    with pytest.raises(DataError, match="no 2-asset subset"):
        select_portfolio(pool, m=2, min_days=1200, rng=0, max_draws=200)


def test_selection_reproducible():
    pool = []
    for k in range(10):
        start = np.datetime64("2000-01-03") + int(k * 150)
        pool += [AssetSeries(f"s{k}", s.dates + (start - s.dates[0]), s.values)
                 for s in gen_synthetic([0.0], [0.01], 1500, rng=k).to_series()]
    a = select_portfolio(pool, m=3, min_days=1000, rng=np.random.default_rng(7))
    b = select_portfolio(pool, m=3, min_days=1000, rng=np.random.default_rng(7))
    assert a.equals(b)
    assert a.n_days >= 1000


# normalize_window / price_relatives ---------------------------------------------

def test_flat_window_is_ones():
    s = normalize_window(_panel_from_closes([[10, 10, 10]]), 2, 3)
    assert s.shape == (1, 1, 3)
    assert s[0, 0].tolist() == [1.0, 1.0, 1.0]


def test_window_divides_by_last_close():
    s = normalize_window(_panel_from_closes([[8, 9, 10]]), 2, 3)
    np.testing.assert_allclose(s[0, 0], [0.8, 0.9, 1.0], rtol=0, atol=1e-15)


def test_high_divided_by_last_close():
    s = normalize_window(_panel_from_closes([[8, 9, 10]], highs=[[9, 11, 10.5]]), 2, 3, ("close", "high"))
    assert s[0, 1, 1] == pytest.approx(1.1, abs=1e-15)


def test_window_before_history_fails():
    with pytest.raises(DataError):
        normalize_window(_panel_from_closes([[8, 9, 10]]), 1, 3)


def test_last_close_lag_exactly_one():
    panel = gen_synthetic([0.001, -0.002, 0.0], [0.02, 0.03, 0.01], 80, rng=3)
    states = window_stack(panel, range(9, 80), 10, ("close", "high", "low", "open", "volume"))
    assert np.all(states[:, :, 0, -1] == 1.0)
    assert np.all(np.isfinite(states)) and np.all(states[:, :, :4] > 0)
    assert np.all(states[:, :, 4] <= 1.0)


def test_volume_window_all_zero_stays_zero():
    p = _panel_from_closes([[1, 1, 1]])
    values = p.values.copy()
    values[..., 4] = 0
    s = normalize_window(p.with_values(values), 2, 3, ("close", "volume"))
    assert s[0, 1].tolist() == [0.0, 0.0, 0.0]


def test_relatives():
    flat = _panel_from_closes([[5, 5], [7, 7]])
    assert price_relatives(flat, 1).tolist() == [1.0, 1.0, 1.0]
    up = _panel_from_closes([[100, 110]])
    np.testing.assert_allclose(price_relatives(up, 1), [1.0, 1.1], rtol=1e-15)
    with pytest.raises(DataError):
        price_relatives(up, 0)


def test_cash_relative_is_exactly_one():
    panel = gen_synthetic([0.01, -0.01], [0.05, 0.05], 50, rng=2)
    for t in range(1, 50):
        assert price_relatives(panel, t)[0] == 1.0


def test_parse_features():
    assert parse_features("close+high+volume") == ("close", "high", "volume")
    with pytest.raises(DataError):
        parse_features("high")
    with pytest.raises(DataError):
        parse_features("close+vwap")


# gen_synthetic ------------------------------------------------------------------

def test_zero_drift_zero_vol_is_constant():
    panel = gen_synthetic([0.0, 0.0], [0.0, 0.0], 30, rng=0, s0=50.0)
    assert np.all(panel.values[..., :4] == 50.0)
    assert np.all(panel.values[..., 4] > 0)


def test_synthetic_reproducible():
    assert gen_synthetic([0.001] * 3, [0.02] * 3, 100, rng=11).equals(gen_synthetic([0.001] * 3, [0.02] * 3, 100, rng=11))


def test_synthetic_ohlc_consistency():
    panel = gen_synthetic([0.001] * 3, [0.02] * 3, 200, rng=4)
    o, h, lo, c = (panel.field(f) for f in ("open", "high", "low", "close"))
    assert np.all(h >= np.maximum(o, c)) and np.all(lo <= np.minimum(o, c))
    assert np.array_equal(o[:, 1:], c[:, :-1])


def test_gbm_terminal_mean_matches_analytic():
    drift, vol, days, s0 = 0.001, 0.01, 1000, 100.0
    terminal = np.array([gen_synthetic([drift], [vol], days + 1, rng=seed, s0=s0).close[0, -1]
                         for seed in range(200)])
    # E[S_T] = s0 e^{mu T}; Var[S_T] = s0^2 e^{2 mu T}(e^{sigma^2 T} - 1)
    mean = s0 * np.exp(drift * days)
    se = s0 * np.exp(drift * days) * np.sqrt(np.expm1(vol ** 2 * days)) / np.sqrt(200)
    assert abs(terminal.mean() - mean) < 3 * se


def test_synthetic_rejects_one_day():
    with pytest.raises(DataError):
        gen_synthetic([0.0], [0.01], 1)
