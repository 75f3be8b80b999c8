"""L2 error of the discrete mean curvature of a fixed sphere under refinement."""

from minsurf.app import checks
from minsurf.app.scenarios import SPHERE_CURVATURE


def main(levels=(8, 12, 16, 24)):
    shape = SPHERE_CURVATURE.shape
    hs, errors = [], []
    for n in levels:
        h, e = checks.curvature_error(SPHERE_CURVATURE.domain.with_divisions((n, n, n)), shape, 1.0 / shape.radius)
        hs.append(h)
        errors.append(e)
        print(f"n = {n:3d}  h = {h:.4f}  error = {e:.4e}")
    print("orders:", ", ".join(f"{o:.2f}" for o in checks.observed_orders(hs, errors)))


if __name__ == "__main__":
    main()
