# tools/4-growth-sweep.py

import pandas as pd
from src import config
from src.analysis import growth_check
from src.homogeneous import Euclidean, Randers

CASES = {
    "berwald": ("k0", Euclidean(), Euclidean()),
    "k0_randers": ("k0", Randers([0.4, 0.0]), Randers([0.4, 0.0])),
    "km1_dominant": ("km1", Euclidean(), 2.0 * Euclidean()),
    "km1_intermediate": ("km1", Euclidean(), 0.5 * Randers([0.5, 0.0])),
}
FRACTIONS = (0.9, 0.99, 0.999)


def main():
    config.SWEEP_DIR.mkdir(parents=True, exist_ok=True)
    frames = []
    for name, (family, psi, phi) in CASES.items():
        frame = growth_check(family, psi, phi, fractions=FRACTIONS)
        frame.insert(0, "case", name)
        frames.append(frame)
        status = "✅" if frame["ratio"].min() > 0 else "⚠️ Warning:"
        print(f"{status} {name}: min ratio {frame['ratio'].min():.4g}")

    out = config.SWEEP_DIR / "growth_sweep.csv"
    pd.concat(frames).to_csv(out, index=False)
    print(f"✅ Sweep saved to {out}")


if __name__ == "__main__":
    main()
