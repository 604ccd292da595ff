"""Checking a run against its dual certificate and the exact optimum."""
# %%
from peakshaver import run_scs
from peakshaver.gen import small_instance
from peakshaver.metrics import verify_bound, verify_dual_feasibility, verify_primal_feasibility
from peakshaver.model import approximation_bound
from peakshaver.oracle import brute_force_opt

inst = small_instance(3)
print(inst.n, "requests,", inst.m, "stations, horizon", inst.horizon)

# %%
schedule, cert, _ = run_scs(inst)
print("primal violations:", verify_primal_feasibility(inst, schedule))
print("dual violations:", verify_dual_feasibility(inst, cert))

# %%
opt, subset = brute_force_opt(inst)
report = verify_bound(inst, schedule, cert, opt=opt)
print(f"revenue {schedule.revenue(inst):.3f}  OPT {opt:.3f}  dual {report.dual_objective:.3f}")
print(f"bound {approximation_bound(inst):.3f}  scaled revenue {report.scaled_revenue:.3f}")
print("OPT <= dual <= bound * revenue:", report.passed)

# %%
# Requests evicted during the exchange phase get their alpha topped up after
# the run so every covering constraint holds.
print("alpha repaired for:", cert.repaired)
