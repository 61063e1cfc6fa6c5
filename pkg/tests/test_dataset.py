import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from horizonbench.dataset import (
    FLOW_PROFILE, SAMPLES_PER_DAY, Quantity, SplitSpec, Strategy, SyntheticProfile, TrafficSeries,
    generate_synthetic, make_supervised, minmax_normalize, parse_pems_csv, read_series_csv, split_series,
    write_series_csv,
)
from horizonbench.errors import (
    DegenerateRange, EmptyData, InvalidProfile, MalformedRow, MissingColumn, NonFinite, TooShort,
)

FIG_SPEED = [70.00, 69.70, 69.60, 69.50, 69.50, 69.40, 69.30, 69.30]
FIG_FLOW = [158, 154, 150, 145, 138, 132, 126, 121]


def test_parse_station_sample(data_dir):
    text = (data_dir / "pems_station_sample.csv").read_text()
    speed = parse_pems_csv(text, "speed")
    flow = parse_pems_csv(text, Quantity.FLOW)
    assert speed.values.tolist() == FIG_SPEED
    assert flow.values.tolist() == FIG_FLOW
    assert speed.unit == "mph"
    assert flow.granularity_minutes == 5


def test_parse_full_header_names_and_timestamps():
    text = ("5 Minutes,Lane 1 Flow (Veh/5 Minutes),Flow (Veh/5 Minutes),Speed (mph)\n"
            "01/01/2024 00:00:00,10,50,65.0\n01/01/2024 00:05:00,11,52,64.5\n")
    s = parse_pems_csv(text, "flow")
    assert s.values.tolist() == [50.0, 52.0]
    assert s.start.isoformat() == "2024-01-01T00:00:00"


def test_parse_errors():
    with pytest.raises(EmptyData):
        parse_pems_csv("", "speed")
    with pytest.raises(EmptyData):
        parse_pems_csv("Speed (mph),Flow (Veh/5 Mi\n", "speed")
    with pytest.raises(MissingColumn):
        parse_pems_csv("Speed (mph)\n70\n", "flow")
    with pytest.raises(MalformedRow) as info:
        parse_pems_csv("Speed (mph)\n70\nabc\n", "speed")
    assert info.value.row_index == 1


def test_series_validation():
    with pytest.raises(NonFinite):
        TrafficSeries(Quantity.SPEED, np.array([1.0, np.nan]))
    with pytest.raises(ValueError):
        TrafficSeries(Quantity.SPEED, np.array([1.0, -1.0]))
    s = TrafficSeries(Quantity.SPEED, np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        s.values[0] = 5


def test_canonical_roundtrip():
    s = generate_synthetic(1, 3)
    text = write_series_csv(s)
    back = read_series_csv(text, "flow")
    np.testing.assert_array_equal(back.values, s.values)
    assert write_series_csv(back) == text


def test_synthetic_deterministic():
    a = generate_synthetic(3, 7, FLOW_PROFILE)
    b = generate_synthetic(3, 7, FLOW_PROFILE)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, generate_synthetic(3, 8).values)


def test_synthetic_noiseless_is_periodic():
    profile = SyntheticProfile(200, 100, 80, 0.0)
    v = generate_synthetic(4, 0, profile).values
    np.testing.assert_array_equal(v[:-SAMPLES_PER_DAY], v[SAMPLES_PER_DAY:])


def test_synthetic_noiseless_mean():
    profile = SyntheticProfile(200, 100, 80, 0.0)
    v = generate_synthetic(7, 0, profile).values
    # the noiseless daily shape is centred on the base level; numeric oracle below
    slots = np.arange(SAMPLES_PER_DAY)
    assert abs(v.mean() - 200) <= 5
    assert v.size == 7 * slots.size


def test_profile_validation():
    with pytest.raises(InvalidProfile):
        SyntheticProfile(1, -1, 0, 0)
    with pytest.raises(InvalidProfile):
        SyntheticProfile(1, 1, 1, 1, noise_persistence=1.0)


@pytest.mark.parametrize("n, lengths", [(100, (80, 10, 10)), (10, (8, 1, 1)), (8065, (6452, 806, 807))])
def test_split_lengths(n, lengths):
    s = TrafficSeries(Quantity.FLOW, np.arange(n, dtype=float))
    parts = split_series(s)
    assert tuple(len(p) for p in parts) == lengths
    np.testing.assert_array_equal(np.concatenate([p.values for p in parts]), s.values)


def test_split_spec_rejects_bad_fractions():
    with pytest.raises(ValueError):
        SplitSpec(0.5, 0.5, 0.5)


def test_minmax():
    z, params = minmax_normalize(np.array([0.0, 5.0, 10.0]))
    np.testing.assert_allclose(z, [0, 0.5, 1])
    assert (params.min, params.max) == (0, 10)
    with pytest.raises(DegenerateRange):
        minmax_normalize(np.array([7.0, 7.0, 7.0]))


@given(st.lists(st.floats(0, 1e4), min_size=2, max_size=50).filter(lambda v: max(v) - min(v) > 1e-3))
@settings(max_examples=50, deadline=None)
def test_normalize_inverse(values):
    x = np.array(values)
    z, params = minmax_normalize(x)
    assert z.min() >= 0 and z.max() <= 1
    np.testing.assert_allclose(params.denormalize(z), x, rtol=0, atol=1e-12 * max(1.0, x.max()))


def test_make_supervised_examples():
    series = np.arange(1, 11, dtype=float)
    one = make_supervised(series, 3, 1)
    assert len(one) == 7
    assert one.inputs[0].tolist() == [1, 2, 3] and one.targets[0] == 4
    two = make_supervised(series, 3, 2)
    assert len(two) == 6
    assert one.inputs[0].tolist() == [1, 2, 3] and two.targets[0] == 5
    with pytest.raises(TooShort):
        make_supervised(series, 10, 1)


def test_make_supervised_recursive_targets_one_step():
    sup = make_supervised(np.arange(10.0), 3, 4, Strategy.RECURSIVE)
    assert sup.targets[0] == 3 and len(sup) == 7


@given(st.integers(1, 12), st.integers(1, 8), st.integers(30, 80))
@settings(max_examples=30, deadline=None)
def test_make_supervised_alignment(lag, horizon, n):
    v = np.arange(n, dtype=float)
    sup = make_supervised(v, lag, horizon)
    assert len(sup) == n - lag - horizon + 1
    # every target sits exactly `horizon` steps after the last window element
    np.testing.assert_array_equal(sup.targets - sup.inputs[:, -1], horizon)
