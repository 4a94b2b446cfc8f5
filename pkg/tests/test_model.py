import json
import math

import pytest

from qcs import (
    INF,
    AllPhotonic,
    FixedP,
    InfeasibleWindow,
    InvalidParameter,
    MomentPair,
    NetworkConfig,
    RequestModel,
    Strategy,
    large_budget,
    small_budget,
    validate,
)
from qcs.model import SCENARIO_KEYS, load_scenario, scenario_from_dict, scenario_to_dict


def test_strategy_mapping():
    assert Strategy.SEQUENTIAL.batch_size(7) == 1
    assert Strategy.SEQUENTIAL.servers(7) == 7
    assert Strategy.PARALLEL.batch_size(7) == 7
    assert Strategy.PARALLEL.servers(7) == 1
    assert Strategy.parse("parallel") is Strategy.PARALLEL
    with pytest.raises(InvalidParameter):
        Strategy.parse("diagonal")


def test_aggregate_rate_counts_pairs():
    assert RequestModel(lambda0=2.0).aggregate_rate(5) == pytest.approx(20.0)


def test_small_budget_fields():
    sc = small_budget(7, 5, Strategy.PARALLEL)
    assert sc.lam == pytest.approx(1e-3)
    assert (sc.m, sc.s, sc.p) == (7, 1, 1.0)
    assert sc.request.w == 10


def test_large_budget_uses_hardware_p():
    sc = large_budget(2, 3, Strategy.SEQUENTIAL)
    assert isinstance(sc.network.p_source, AllPhotonic)
    assert sc.p == pytest.approx(0.6902, abs=1e-4)
    assert sc.L0 == pytest.approx(7.5)


@pytest.mark.parametrize(
    "kwargs",
    [dict(u=1, L=1), dict(u=3, L=-1), dict(u=3, L=1, N=-1), dict(u=3, L=1, k=0),
     dict(u=3, L=1, t_fwd=0), dict(u=3, L=1, t_control=-1)],
)
def test_network_validation(kwargs):
    with pytest.raises(InvalidParameter):
        NetworkConfig(**kwargs)


@pytest.mark.parametrize("p", [0.0, -0.1, 1.5])
def test_fixed_p_range(p):
    with pytest.raises(InvalidParameter):
        FixedP(p)


def test_infeasible_window():
    net = NetworkConfig(u=3, L=1, k=2)
    with pytest.raises(InfeasibleWindow):
        validate(net, RequestModel(n=7, w=5), Strategy.SEQUENTIAL)
    # the same window is fine when two packets go out per batch
    validate(net, RequestModel(n=7, w=5), Strategy.PARALLEL)


def test_moment_pair_c2():
    mp = MomentPair(2.0, 5.0)
    assert mp.variance == pytest.approx(1.0)
    assert mp.c2 == pytest.approx(0.25)
    assert mp.is_exact
    assert not MomentPair(1, 1, se1=0.1).is_exact


def test_replace_routes_fields():
    sc = small_budget(3, 4, Strategy.SEQUENTIAL)
    other = sc.replace(u=6, n=5, strategy="parallel")
    assert other.network.u == 6 and other.request.n == 5 and other.s == 1
    with pytest.raises(InvalidParameter):
        sc.replace(colour="red")


def test_json_round_trip(tmp_path):
    for sc in (small_budget(4, 5, Strategy.PARALLEL), large_budget(2, 3, Strategy.SEQUENTIAL, w=INF)):
        data = scenario_to_dict(sc)
        assert set(data) == set(SCENARIO_KEYS)
        path = tmp_path / "s.json"
        path.write_text(json.dumps(data))
        assert load_scenario(path) == sc


def test_json_rejects_unknown_and_missing():
    data = scenario_to_dict(small_budget(2, 3, Strategy.SEQUENTIAL))
    with pytest.raises(InvalidParameter):
        scenario_from_dict({**data, "extra": 1})
    del data["u"]
    with pytest.raises(InvalidParameter):
        scenario_from_dict(data)


def test_json_optional_control_time():
    data = scenario_to_dict(small_budget(2, 3, Strategy.SEQUENTIAL))
    del data["t_control_us"]
    assert scenario_from_dict(data).network.t_control == 0.0


def test_json_infinite_window_string():
    data = scenario_to_dict(small_budget(2, 3, Strategy.SEQUENTIAL))
    data["w"] = "inf"
    assert math.isinf(scenario_from_dict(data).request.w)
