import numpy as np
import pytest

from allee_release.model import derive_params


@pytest.fixture(scope="session")
def params():
    return derive_params()


def bisect(f, lo, hi, tol=1e-13, max_iter=500):
    """Plain bisection on a sign change; an oracle independent of closed forms."""
    flo = f(lo)
    assert flo * f(hi) < 0.0, "no sign change"
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or hi - lo < tol * max(1.0, abs(mid)):
            return mid
        if (fm < 0.0) == (flo < 0.0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def rk4_scalar(f, y0, t1, n):
    """Classic RK4 for a scalar ODE y' = f(y) on [0, t1] with n steps."""
    h = t1 / n
    y = y0
    for _ in range(n):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)
