"""A single tuning run on the MFS objective, standard and preemptive.

Run with ``python3 demos/02_tuning_run.py``; takes about a minute.
"""

from mfstune.geometry import DEFAULT_HEAD
from mfstune.mfs import ForwardModel
from mfstune.sampling import region_catalog
from mfstune.tuner import TunerConfig, run

model = ForwardModel(DEFAULT_HEAD, n_colloc=150, k_test=200)
region = region_catalog()[0]
base = TunerConfig(j_max=200, n_avg=10, n_min=3, j_init=50, seed=1, region=region)


for preemptive in (False, True):
    result = run(base.arm("sko", preemptive), model)
    label = "preemptive" if preemptive else "standard"
    print(f"{label:<10} distinct thetas={result.distinct:3d}  best mean Q={result.best_mean:6.2f}")
    print(f"{'':<10} best theta={[round(float(x), 3) for x in result.best_theta.as_array()]}")
    # Preempted entries stop early because their running mean fell below the pooled mean.
    preempted = sum(e.preempted for e in result.ledger.entries)
    print(f"{'':<10} preempted entries={preempted}, evaluations={result.ledger.j_used}")
