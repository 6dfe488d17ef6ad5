# tools/2-curvature-audit.py

import numpy as np
import pandas as pd
from src import config
from src.geometry import flag_curvature
from src.homogeneous import Euclidean, Randers
from src.metrics import build_k0, build_km1, closed_metric, funk_metric
from src.numerics import random_directions

SAMPLES = 50


def audit(name, metric, rng):
    x = metric.sample_points(rng, SAMPLES, fraction=0.8)
    y = random_directions(rng, SAMPLES, metric.dim)
    report = flag_curvature(metric, x, y)
    r1, r2 = report.berwald_residuals
    return {
        "metric": name,
        "expected": metric.curvature,
        "K_formula_max_dev": float(np.max(np.abs(report.K_formula - metric.curvature))),
        "K_profile_max_dev": float(np.max(np.abs(report.K_profile - metric.curvature))),
        "berwald_residual": float(max(np.max(np.abs(r1)), np.max(np.abs(r2)))),
    }


def main():
    rng = np.random.default_rng(config.SEED)
    metrics = {
        "berwald": closed_metric("berwald"),
        "euclid_funk": closed_metric("euclid_funk"),
        "hilbert_ball": closed_metric("hilbert_ball"),
        "riemann_lam_1": closed_metric("riemann", lam=1.0),
        "bryant_0.3": closed_metric("bryant", alpha=0.3),
        "randers_k0_0.5": closed_metric("randers_k0", a1=0.5),
        "euclid_km1_2": closed_metric("euclid_km1", c=2.0),
        "k0_randers_data": build_k0(Euclidean(), Randers([0.3, 0.1])),
        "km1_dominant": build_km1(Euclidean(), 2.0 * Euclidean()),
        "funk_randers": funk_metric(Randers([0.2, 0.0])),
    }
    rows = []
    for name, metric in metrics.items():
        rows.append(audit(name, metric, rng))
        print(f"✅ {name}: max |K - {metric.curvature}| = {rows[-1]['K_formula_max_dev']:.2e}")

    config.SWEEP_DIR.mkdir(parents=True, exist_ok=True)
    out = config.SWEEP_DIR / "curvature_audit.csv"
    pd.DataFrame(rows).to_csv(out, index=False)
    print(f"✅ Audit saved to {out}")


if __name__ == "__main__":
    main()
