"""Why the exchange phase exists.

Two requests share one slot at a station with 10 kWh of room. The cheap
one has the better price per kWh, so the greedy pass takes it first and
then has no room for the big one. The exchange phase evicts it.
"""
# %%
from peakshaver import ChargingRequest, Instance, Station, run_scs
from peakshaver.scheduler import phase_revenue

inst = Instance(
    horizon=1,
    stations=(Station(10.0),),
    global_cap=10.0,
    slackness=1.0,
    requests=(
        ChargingRequest(id=1, station=1, demand=1.0, deadline=1, max_rate=1.0, value=2.0),
        ChargingRequest(id=2, station=1, demand=10.0, deadline=1, max_rate=10.0, value=10.0),
    ),
)

# %%
schedule, cert, trace = run_scs(inst)
for rec in trace:
    print(rec["phase"], rec["request_id"], rec["decision"], rec["revenue_so_far"])

# %%
print("greedy pass:", phase_revenue(trace, 1))
print("final:", schedule.revenue(inst), "selected:", sorted(schedule.selected))

# %%
# Without the exchange phase we keep the 2-unit request only.
no_swap, _, _ = run_scs(inst, reconsider_phase=False)
print("without exchange:", no_swap.revenue(inst))
