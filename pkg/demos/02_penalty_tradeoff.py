"""Walkthrough: trading subgroup size against individual-level benefit.

Reward 3 adds a lambda-weighted penalty for selecting units whose estimated
effect is negative. Raising lambda shrinks the subgroup but raises the
fraction of selected units who truly benefit (RPI).
"""

import capital as cp
from capital import policytree as pt
from capital.evaluation import eta_for_scenario
from capital.forest import ForestParams

spec = cp.ScenarioSpec(id=3)  # C(X) = x1 - x2: some selected units lose
train = cp.gen_trial(spec, n=1000, seed=21)
test = cp.gen_trial(spec, n=10_000, seed=22)
eta = eta_for_scenario(spec, delta=0.7)

est = cp.estimate_contrast_rf(train, ForestParams(num_trees=200, seed=21))
table = cp.build_reward_table(est.c_hat, delta=0.7)

print(" lambda  proportion    RPI")
for lam in (0.0, 0.5, 1.0, 2.0):
    gamma = cp.build_rewards(table, "penalized", lam=lam).gamma_select
    tree, _ = pt.search(train.covariates.values, gamma, depth=2)
    m = cp.evaluate_rule(tree, test, eta)
    print(f"   {lam:3.1f}      {m.proportion:5.3f}     {m.rpi:5.3f}")
