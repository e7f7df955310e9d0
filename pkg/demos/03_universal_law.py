"""
Beta as a function of the mean unit area
========================================

Across case studies the calibrated beta follows ``alpha * <S> ** -nu``.
The published constants are alpha = 0.000315 /m and nu = 0.177 with
<S> in km². Below, synthetic case studies scatter around that law; the
fit recovers it and repeated train/test splits measure how well the law
predicts beta for unseen cases.
"""

import numpy as np

from commuting import CaseStudySummary, cross_validate, fit_power_law, predict_beta
from commuting.universal_law import PAPER_FIT

for name, s in [("a municipality region", 19.86), ("canton scale", 171.72),
                ("departement scale", 5747.35)]:
    print(f"{name:>22}: <S> = {s:8.2f} km²  ->  beta = {predict_beta(s, PAPER_FIT):.4e} /m")

rng = np.random.default_rng(0)
areas = np.exp(rng.uniform(np.log(4), np.log(8000), 80))
betas = PAPER_FIT.alpha * areas ** -PAPER_FIT.nu * np.exp(rng.normal(0, 0.08, 80))
cases = [CaseStudySummary(f"case{k:02d}", a, b) for k, (a, b) in enumerate(zip(areas, betas))]

fit = fit_power_law(cases)
print(f"fit: alpha={fit.alpha:.3e}  nu={fit.nu:.3f}  adjusted R²={fit.adj_r2:.3f}")

cv = cross_validate(cases, train_size=53, repeats=2000, seed=1)
print(f"estimates per case: {cv.mean_count:.0f} on average")
errors = [abs(cv.stats(c.case_id)[1] / c.beta_calibrated - 1) for c in cases]
print(f"median relative error of the mean predicted beta: {np.median(errors):.3f}")
