# start snippet imports
import numpy as np
import pandas as pd

from src import config
from src.metrics import closed_metric, critical_lambda
from src.tensor import hyperbola_residual, midpoint_violations, scan_domain_2d

# end snippet imports


# start snippet inputs
# Drift values on both sides of 2√2/3 ≈ 0.9428
A1_VALUES = [0.9, 0.93, 0.95, 0.9718]
RESOLUTION = 160
C_VALUES = [1.5, 2.0, 3.0, 5.0]
# end snippet inputs


# start snippet randers_k0_scans
rows = []
scans = {}
for a1 in A1_VALUES:
    scan = scan_domain_2d(closed_metric("randers_k0", a1=a1), resolution=RESOLUTION)
    scans[a1] = scan
    rows.append(
        {
            "a1": a1,
            "components": scan.components,
            "topology": scan.topology,
            "degenerate_cells": int(np.sum(scan.labels == 1)),
            "midpoint_violations": midpoint_violations(scan),
        }
    )
topology = pd.DataFrame(rows)
print(topology.to_string(index=False))
# end snippet randers_k0_scans


# start snippet frontier_vs_hyperbola
split_a1 = A1_VALUES[-1]
points = scans[split_a1].boundary_points
central = points[np.abs(points[:, 1]) < 3.0]
residuals = pd.Series(np.abs(hyperbola_residual(split_a1, central)), name="|residual|")
print(residuals.describe())
# end snippet frontier_vs_hyperbola


# start snippet randers_km1_threshold
thresholds = pd.DataFrame({"c": C_VALUES, "critical_a1": [critical_lambda(c) for c in C_VALUES]})
print(thresholds.to_string(index=False))
# end snippet randers_km1_threshold


# start snippet export
config.SCAN_DIR.mkdir(parents=True, exist_ok=True)
topology.to_csv(config.SCAN_DIR / "notebook_topology.csv", index=False)
# end snippet export
