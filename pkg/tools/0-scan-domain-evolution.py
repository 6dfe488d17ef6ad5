# tools/0-scan-domain-evolution.py

import numpy as np
import pandas as pd
from src import config
from src.metrics import closed_metric
from src.tensor import hyperbola_residual, midpoint_violations, scan_domain_2d

# Drift values across the split of the strongly convex region
A1_VALUES = [0.9, 0.94, 0.95, 0.9718]
RESOLUTION = 400


def main():
    config.SCAN_DIR.mkdir(parents=True, exist_ok=True)
    rows = []
    for a1 in A1_VALUES:
        metric = closed_metric("randers_k0", a1=a1)
        scan = scan_domain_2d(metric, resolution=RESOLUTION)
        stem = f"randers_k0_a1_{a1:.4f}"
        scan.save(config.SCAN_DIR / f"{stem}.csv", config.SCAN_DIR / f"{stem}.json")

        row = {"a1": a1, "components": scan.components, "topology": scan.topology,
               "convexity_violations": midpoint_violations(scan)}
        if a1 > 2.0 * np.sqrt(2.0) / 3.0 and len(scan.boundary_points):
            row["min_hyperbola_residual"] = float(np.min(hyperbola_residual(a1, scan.boundary_points)))
            row["max_tangency_deviation"] = scan.max_tangency_deviation
        rows.append(row)

        if scan.failed:
            print(f"⚠️ Warning: {scan.failed} frontier bisections failed for a1 = {a1}")
        print(f"✅ a1 = {a1}: {scan.components} component(s), {scan.topology}")

    summary = pd.DataFrame(rows)
    summary.to_csv(config.SCAN_DIR / "randers_k0_summary.csv", index=False)
    print(f"✅ Summary saved to {config.SCAN_DIR / 'randers_k0_summary.csv'}")


if __name__ == "__main__":
    main()
