"""Regenerates cgm_three_clusters.json and winsor.json.

The two-way clustered variance is computed here with explicit per-cluster
score sums, independently of the C++ implementation.
"""
import json
import pathlib

import numpy as np

HERE = pathlib.Path(__file__).resolve().parent
rng = np.random.default_rng(20240611)

# 15 observations, 3 firms, 5 dates; intercept plus two regressors.
n = 15
firm = np.repeat([101, 202, 303], 5)
date = np.tile([1, 2, 3, 4, 5], 3)
x1 = rng.normal(0.0, 0.02, n)
x2 = rng.normal(0.0, 0.015, n)
X = np.column_stack([np.ones(n), x1, x2])
y = 0.001 + 0.8 * x1 + 0.5 * x2 + rng.normal(0.0, 0.03, n) + 0.01 * (firm == 202)
d = X.shape[1]

beta = np.linalg.solve(X.T @ X, X.T @ y)
u = y - X @ beta
bread = np.linalg.inv(X.T @ X)


def one_way(labels):
    groups = sorted(set(labels))
    meat = np.zeros((d, d))
    for g in groups:
        idx = [i for i in range(n) if labels[i] == g]
        s = sum(X[i] * u[i] for i in idx)
        meat += np.outer(s, s)
    G = len(groups)
    c = G / (G - 1) * (n - 1) / (n - d)
    return c * bread @ meat @ bread


both = [(int(f), int(t)) for f, t in zip(firm, date)]
v_firm = one_way([int(f) for f in firm])
v_date = one_way([int(t) for t in date])
v_both = one_way(both)
v = v_firm + v_date - v_both

out = {
    "X": X.tolist(),
    "y": y.tolist(),
    "firm": firm.tolist(),
    "date": date.tolist(),
    "beta": beta.tolist(),
    "v_firm": v_firm.tolist(),
    "v_date": v_date.tolist(),
    "v_both": v_both.tolist(),
    "v": v.tolist(),
}
(HERE / "cgm_three_clusters.json").write_text(json.dumps(out, indent=1) + "\n")

w = rng.standard_t(3, 61) * 0.02
lo, hi = np.percentile(w, [1, 99])
(HERE / "winsor.json").write_text(
    json.dumps({"input": w.tolist(), "p1": lo, "p99": hi, "golden": np.clip(w, lo, hi).tolist()}, indent=1) + "\n")
