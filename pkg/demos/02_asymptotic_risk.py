"""Asymptotic risk of each estimator as the restriction drifts away from the truth.

Relative risk is risk(UR) / risk(estimator), so values above one mean the
estimator beats the unrestricted Liu estimator at that distance.
"""

from pretest_liu.asymptotics import random_scenario, risk_curve
from pretest_liu.estimators import SHRINKAGE_KINDS

scenario = random_scenario(m=6, q=4, d=0.7, delta2=1.0, seed=1)  # nonzero so gamma has a direction
grid = [0, 1, 2, 4, 8, 16, 32]
report = risk_curve(SHRINKAGE_KINDS, scenario, grid)

print("Delta^2 " + "".join(k.rjust(8) for k in SHRINKAGE_KINDS))
for g in grid:
    row = {r["kind"]: r["relative_risk"] for r in report.rows if r["delta2"] == g}
    print(f"{g:7g} " + "".join(f"{row[k]:8.3f}" for k in SHRINKAGE_KINDS))

# RE wins near the null and loses without bound far from it; PT falls back
# to UR for large Delta^2, while PS never does worse than UR.
