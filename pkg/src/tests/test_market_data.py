import numpy as np
import pytest

from src.errors import DomainError, InsufficientData, PriceFileError
from src.market_data import (PriceSeries, ReturnSeries, align, arithmetic_mean, compute_returns, geometric_mean,
                             load_prices, synthetic_universe, write_prices)


def test_load_fixture(dis_trv_series):
    assert [s.ticker for s in dis_trv_series] == ["DIS", "TRV"]
    dis, trv = dis_trv_series
    assert len(dis) == len(trv) == 9
    assert dis.latest == pytest.approx(111.39)
    assert trv.latest == pytest.approx(240.03)


def test_returns_are_simple_returns():
    r = compute_returns(PriceSeries("X", ("2024-01-02", "2024-01-03", "2024-01-04"), [100., 110., 99.]))
    np.testing.assert_allclose(r.returns, [0.1, -0.1])


def test_geometric_mean_of_round_trip_is_zero(dis_trv_series):
    for s in dis_trv_series:
        assert abs(geometric_mean(compute_returns(s))) < 1e-12


def test_geometric_below_arithmetic_for_volatile_series():
    r = ReturnSeries("X", [0.05, -0.04, 0.03, -0.02])
    assert geometric_mean(r, frequency=1) < arithmetic_mean(r, frequency=1)
    assert arithmetic_mean(r, frequency=4) == pytest.approx(0.02)


def test_geometric_mean_annualizes_by_compounding():
    r = ReturnSeries("X", [0.012, -0.031, 0.004, 0.027, -0.008, 0.015, -0.022])
    daily = geometric_mean(r, frequency=1)
    assert geometric_mean(r, frequency=252) == pytest.approx((1 + daily)**252 - 1, rel=1e-10)


def test_returns_rebuild_the_prices():
    prices = synthetic_universe(n_tickers=5, n_days=60, seed=2)[3]
    r = compute_returns(prices)
    rebuilt = prices.closes[0] * np.concatenate([[1.], np.cumprod(1 + r.returns)])
    np.testing.assert_allclose(rebuilt, prices.closes, rtol=1e-12)


def test_geometric_mean_rejects_total_loss():
    with pytest.raises(DomainError):
        geometric_mean(ReturnSeries("X", [0.1, -1.0]))


def test_align_keeps_common_dates():
    a = PriceSeries("A", ("2024-01-02", "2024-01-03", "2024-01-04"), [1., 2., 3.])
    b = PriceSeries("B", ("2024-01-03", "2024-01-04", "2024-01-05"), [4., 5., 6.])
    a2, b2 = align([a, b])
    assert a2.dates == b2.dates == ("2024-01-03", "2024-01-04")
    np.testing.assert_allclose(a2.closes, [2., 3.])


def test_align_needs_two_common_dates():
    a = PriceSeries("A", ("2024-01-02", "2024-01-03"), [1., 2.])
    b = PriceSeries("B", ("2024-01-03", "2024-01-04"), [4., 5.])
    with pytest.raises(InsufficientData):
        align([a, b])


@pytest.mark.parametrize("rows, line", [
    (["2024-01-02,A,10", "2024-01-03,A,-1"], 3),
    (["2024-01-02,A,10", "2024/01/03,A,11"], 3),
    (["2024-01-02,A,ten", "2024-01-03,A,11"], 2),
    (["2024-01-02,A,10", "2024-01-02,A,11", "2024-01-03,A,12"], 3),
])
def test_bad_rows_report_their_line(tmp_path, rows, line):
    path = tmp_path / "prices.csv"
    path.write_text("date,ticker,close\n" + "\n".join(rows) + "\n")
    with pytest.raises(PriceFileError) as e:
        load_prices(str(path))
    assert e.value.line == line
    assert str(e.value).startswith(f"line {line}:")


def test_bad_header(tmp_path):
    path = tmp_path / "prices.csv"
    path.write_text("day,symbol,price\n2024-01-02,A,1\n")
    with pytest.raises(PriceFileError):
        load_prices(str(path))


def test_single_price_is_insufficient(tmp_path):
    path = tmp_path / "prices.csv"
    path.write_text("date,ticker,close\n2024-01-02,A,1\n")
    with pytest.raises(PriceFileError):
        load_prices(str(path))


def test_synthetic_universe_is_seeded(tmp_path):
    a = synthetic_universe(n_tickers=5, n_days=40, seed=3)
    b = synthetic_universe(n_tickers=5, n_days=40, seed=3)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.closes, y.closes)
    path = str(tmp_path / "u.csv")
    write_prices(a, path)
    loaded = load_prices(path)
    assert [s.ticker for s in loaded] == [s.ticker for s in a]
    np.testing.assert_allclose(loaded[2].closes, a[2].closes)


def test_synthetic_returns_are_skewed():
    # jumps make the pooled standardized returns non-Gaussian
    u = synthetic_universe(n_tickers=8, n_days=500, seed=5)
    R = np.column_stack([compute_returns(s).returns for s in u])
    Z = (R - R.mean(axis=0)) / R.std(axis=0)
    assert np.all(np.abs((Z**3).mean(axis=0)) > 0)
    assert np.mean((Z**4).mean(axis=0)) > 3
