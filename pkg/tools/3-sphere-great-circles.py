# tools/3-sphere-great-circles.py

import numpy as np
from src import config
from src.metrics import closed_metric
from src.sphere import (
    antipodal_deviation,
    equator_extension_check,
    great_circle_length,
    great_circle_samples,
    save_great_circle,
)

ALPHAS = [0.1, 0.3, np.pi / 4]


def main():
    config.SPHERE_DIR.mkdir(parents=True, exist_ok=True)
    w = np.array([1.0, 0.0, 0.0])
    V = np.array([0.0, 0.6, -0.8])

    for alpha in ALPHAS:
        metric = closed_metric("bryant", alpha=alpha)
        check = equator_extension_check(alpha)
        length = great_circle_length(metric, w, V)
        print(f"✅ alpha = {alpha:.4f}: equator deviation {check.max_deviation:.2e}, "
              f"min eigenvalue {check.min_eig:.3e}, great circle length {length:.6f}")
        if check.min_eig < 1e-6:
            print(f"⚠️ Warning: the equator limit degenerates along {np.round(check.degenerate_direction, 6)}")

        frame = great_circle_samples(metric, w, V)
        save_great_circle(frame, config.SPHERE_DIR / f"bryant_{alpha:.4f}_great_circle.csv")
        check.limit_values.to_csv(config.SPHERE_DIR / f"bryant_{alpha:.4f}_equator.csv", index=False)

    print(f"✅ Antipodal deviation at alpha = 0.3: {antipodal_deviation(closed_metric('bryant', alpha=0.3)):.2e}")


if __name__ == "__main__":
    main()
