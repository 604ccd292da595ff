import pytest

from peakshaver.model import ChargingRequest, Instance, Station


def make_instance(requests, *, horizon, caps, global_cap=None, slackness=1.0):
    """Build an instance from (station, demand, deadline, max_rate, value) tuples; ids are 1-based."""
    reqs = tuple(
        ChargingRequest(id=i, station=st, demand=D, deadline=d, max_rate=k, value=v)
        for i, (st, D, d, k, v) in enumerate(requests, start=1)
    )
    caps = tuple(caps)
    return Instance(
        horizon=horizon,
        stations=tuple(Station(c) for c in caps),
        global_cap=sum(caps) if global_cap is None else global_cap,
        slackness=slackness,
        requests=reqs,
    )


@pytest.fixture
def pathology():
    # knapsack trap: EV1 has the better ratio, EV2 the better value
    return make_instance([(1, 1.0, 1, 1.0, 2.0), (1, 10.0, 1, 10.0, 10.0)],
                         horizon=1, caps=[10.0], global_cap=10.0)
