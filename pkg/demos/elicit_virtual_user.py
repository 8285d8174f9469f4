# Elicit a virtual user's utility from eight pairwise choices.
#
# A simulated user with a known saturating-exponential utility answers a
# random questionnaire over the bundled 20-item set. From nothing but those
# eight binary choices, three nominal utilities are recovered: the worst-case
# (pessimistic), best-case (optimistic), and the Kantorovich midpoint
# (neutral). The script prints how far each lands from the hidden truth.

import numpy as np

from roboadvisor.dataio import bundled_item_set
from roboadvisor.elicitation import elicit_neutral, elicit_optimistic, elicit_pessimistic
from roboadvisor.kantorovich import kantorovich_closed_form
from roboadvisor.lotteries import build_breakpoints, restrict_to_grid
from roboadvisor.questionnaire import select_pairs_random
from roboadvisor.simulation import answer_questionnaire, default_scenarios, default_virtual_user

items = bundled_item_set("items20")
user = default_virtual_user(items.max_outcome())

# 1. eight random question pairs, answered by exact expected-utility comparison
questionnaire = select_pairs_random(items, 8, seed=7)
answers = answer_questionnaire(user, questionnaire)
print("questions and choices:")
for (first, second), z in zip(questionnaire.pairs, answers.choices):
    pick = {1: "first", -1: "second", 0: "no preference"}[z]
    print(f"  {first.id:>4} vs {second.id:<4} -> {pick}")

# 2. the elicitation grid is the union of the questioned payoffs
grid = build_breakpoints(questionnaire, items.max_outcome())
print(f"\nbreakpoints ({grid.n_points}):", [int(p) for p in grid.points])

# 3. benchmark scenarios (uniform portfolio over the item set, Monte Carlo)
scenarios = default_scenarios(items, seed=0)

pes = elicit_pessimistic(answers, grid, scenarios)
opt = elicit_optimistic(answers, grid, scenarios)
neu = elicit_neutral(pes, opt, answers, grid)

truth = restrict_to_grid(user.true_utility, grid)
print("\nutility values at the breakpoints (alpha):")
print("  true       ", np.round(truth.alpha_array(), 3))
for result in (pes, opt, neu):
    print(f"  {result.estimator:<11}", np.round(result.utility.alpha_array(), 3))

print("\nKantorovich distance to the truth (rescaled domain):")
for result in (pes, opt, neu):
    d = kantorovich_closed_form(result.utility, truth).value
    print(f"  {result.estimator:<11} {d:.4f}")
d_po = kantorovich_closed_form(neu.utility, pes.utility).value
d_oo = kantorovich_closed_form(neu.utility, opt.utility).value
print(f"\nneutral sits midway: d(neutral, pessimistic)={d_po:.5f}, "
      f"d(neutral, optimistic)={d_oo:.5f}")
