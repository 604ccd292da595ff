"""Peak load of the two engines on the scaled default setup.

The same numbers come out of the command line:

    peakshaver sweep --param evs --values 20,40,60,80 --seeds 50 \
        --horizon 24 --stations 4 --local-cap 40 --global-cap 160 --out evs.csv

``evs_summary.csv`` then holds per-(value, engine) means and standard
deviations of revenue, utilization, acceptance_rate and actual_peak.
Sweeping ``--param slackness`` gives the revenue-versus-slackness curve and
``--param ctotal --oracle`` adds the exact optimum and ``pseudo_opt_peak``
columns for small instances.
"""
# %%
import numpy as np

from peakshaver import run_greedy_rtl, run_scs
from peakshaver.gen import generate_instance, scaled_default
from peakshaver.metrics import compute_metrics

scs, rtl = [], []
for seed in range(50):
    inst = generate_instance(scaled_default(seed=seed))
    scs.append(compute_metrics(inst, run_scs(inst)[0]).actual_peak)
    rtl.append(run_greedy_rtl(inst)[1].actual_peak)
scs, rtl = np.array(scs), np.array(rtl)

# %%
print(f"mean peak  scs {scs.mean():.2f}  greedy-rtl {rtl.mean():.2f}")
print(f"ratio {scs.mean() / rtl.mean():.4f}, scs lower on {np.mean(scs < rtl):.0%} of seeds")

# %%
# Level filling inside each request's window flattens the profile further.
lev = np.array([compute_metrics(inst, run_scs(inst, rerank=True)[0]).actual_peak
                for inst in (generate_instance(scaled_default(seed=s)) for s in range(50))])
print(f"with rerank: ratio {lev.mean() / rtl.mean():.4f}")
