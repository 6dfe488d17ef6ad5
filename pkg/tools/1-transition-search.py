# tools/1-transition-search.py

import numpy as np
from src import config
from src.metrics import closed_metric, critical_lambda
from src.tensor import transition_search

RESOLUTION = 120
KM1_C = 2.0


def report(label, found, expected):
    print(f"✅ {label} split at a1 ≈ {found:.4f} (expected {expected:.4f})")
    if abs(found - expected) > 0.01:
        print(f"⚠️ Warning: {label} transition is further than 0.01 from {expected:.4f}; try a finer resolution.")


def main():
    found = transition_search(lambda a1: closed_metric("randers_k0", a1=a1), 0.9, 0.99, resolution=RESOLUTION)
    report("Randers K = 0", found, 2.0 * np.sqrt(2.0) / 3.0)

    found = transition_search(
        lambda a1: closed_metric("randers_km1", a1=a1, c=KM1_C), 0.9, 0.99, resolution=RESOLUTION
    )
    report(f"Randers K = -1 (c = {KM1_C})", found, critical_lambda(KM1_C))

    for c in (1.5, 2.0, 3.0):
        print(f"✅ c = {c}: Randers K = -1 stays positive definite for a1 < {critical_lambda(c):.6f}")

    print(f"Seed {config.SEED}, threads {config.THREADS}")


if __name__ == "__main__":
    main()
