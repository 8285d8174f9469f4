# Do greedily selected questionnaires beat random ones?
#
# Historical ratings are simulated from random quadratic value functions,
# a latent factor model is fitted, and the greedy trace-minimizing selection
# is compared against uniformly random pairs: for each questionnaire the
# virtual user answers, the three utilities are elicited, and the distance
# to the true utility is averaged over repetitions. Small run; bump REPS
# (and expect roughly a second per elicitation) for smoother numbers.

import time

from roboadvisor.dataio import bundled_item_set
from roboadvisor.simulation import default_scenarios, run_spq_vs_random

REPS = 8
K_VALUES = (5, 10)

items = bundled_item_set("items20")
scenarios = default_scenarios(items, seed=0)

t0 = time.time()
report = run_spq_vs_random(items, K_VALUES, repetitions=REPS, master_seed=0, scen=scenarios)
print(f"{REPS} repetitions x {len(K_VALUES)} questionnaire sizes in {time.time() - t0:.0f}s\n")

print(f"{'estimator':<13} {'K':>3} {'greedy':>8} {'random':>8}")
for est in ("pessimistic", "optimistic", "neutral"):
    for k in K_VALUES:
        spq = report.mean_distance(est, k, method="spq")
        rnd = report.mean_distance(est, k, method="random")
        marker = "  <-- greedy wins" if spq < rnd else ""
        print(f"{est:<13} {k:>3} {spq:>8.4f} {rnd:>8.4f}{marker}")

report.write_raw_csv("spq_vs_random_raw.csv")
report.write_aggregate_csv("spq_vs_random_agg.csv")
print("\nwrote spq_vs_random_raw.csv and spq_vs_random_agg.csv")
