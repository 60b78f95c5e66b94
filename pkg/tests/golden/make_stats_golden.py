"""Regenerate stats_reference.json from scipy (reference implementation).

Run from the repository root:  python tests/golden/make_stats_golden.py
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from scipy import stats

OUT = Path(__file__).with_name("stats_reference.json")


def main() -> None:
    rng = random.Random(20240611)
    cases = []
    for i in range(100):
        n = rng.randint(2, 40)
        scale = 10 ** rng.uniform(-2, 2)
        loc = rng.uniform(-5, 5)
        values = [round(rng.gauss(loc, scale), 6) for _ in range(n)]
        threshold = round(loc + rng.uniform(-2, 2) * scale, 6)
        t = stats.ttest_1samp(values, threshold, alternative="greater")

        m = rng.randint(3, 40)
        xs = [round(rng.uniform(0, 10), 1 if i % 3 == 0 else 6) for _ in range(m)]  # every third case has ties
        ys = [round(x * rng.uniform(-1, 1) + rng.gauss(0, 3), 1 if i % 3 == 0 else 6) for x in xs]
        rho, p = stats.spearmanr(xs, ys)
        cases.append({
            "values": values,
            "threshold": threshold,
            "t": float(t.statistic),
            "p": float(t.pvalue),
            "df": int(t.df),
            "xs": xs,
            "ys": ys,
            "rho": float(rho),
            "rho_p": float(p),
        })
    OUT.write_text(json.dumps({"generator": "scipy " + __import__("scipy").__version__, "cases": cases}, indent=1) + "\n")


if __name__ == "__main__":
    main()
