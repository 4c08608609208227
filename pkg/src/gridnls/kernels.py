"""Hot numeric kernels over mesh intervals.

Every mesh interval has length ``h`` and joins node ``left[k]`` to node
``right[k]``; the field is linear on it. Each kernel exists twice: a
loop version compiled with numba and a vectorised numpy version. The
module-level names dispatch to one of them according to
``gridnls._backend.USE_NUMBA``; both stay importable for tests and the
benchmark.
"""
import numpy as np

from ._backend import USE_NUMBA, njit

# below this |b - a| / max(|a|, |b|) the difference quotient loses digits
# and the integral is taken from its binomial series instead
SERIES_CUTOFF = 1e-3


def _node_powers(vals, p):
    """|v|^(p+1) per node; every interval formula is assembled from these."""
    return np.abs(vals) ** (p + 1.0)


@njit(cache=True)
def _power_loop(vals, apow, left, right, h, p):
    q = p + 1.0
    c1 = p / 2.0
    c2 = p * (p - 1.0) / 6.0
    c3 = p * (p - 1.0) * (p - 2.0) / 24.0
    c4 = p * (p - 1.0) * (p - 2.0) * (p - 3.0) / 120.0
    c5 = p * (p - 1.0) * (p - 2.0) * (p - 3.0) * (p - 4.0) / 720.0
    total = 0.0
    for k in range(left.shape[0]):
        i = left[k]
        j = right[k]
        a = vals[i]
        b = vals[j]
        if a == b:
            if a != 0.0:
                total += h * apow[i] / abs(a)
            continue
        d = b - a
        if a * b > 0.0 and abs(d) < SERIES_CUTOFF * max(abs(a), abs(b)):
            x = d / a
            s = 1.0 + x * (c1 + x * (c2 + x * (c3 + x * (c4 + x * c5))))
            total += h * apow[i] / abs(a) * s
        else:
            fb = apow[j] if b > 0.0 else -apow[j]
            fa = apow[i] if a > 0.0 else -apow[i]
            total += h * (fb - fa) / (q * d)
    return total


def power_integral_numba(vals, left, right, h, p):
    return _power_loop(vals, _node_powers(vals, p), left, right, h, float(p))


def power_integral_numpy(vals, left, right, h, p):
    apow = _node_powers(vals, p)
    a = vals[left]
    b = vals[right]
    pa = apow[left]
    pb = apow[right]
    d = b - a
    absa = np.abs(a)
    q = p + 1.0
    equal = d == 0.0
    series = (~equal) & (a * b > 0.0) & (np.abs(d) < SERIES_CUTOFF * np.maximum(absa, np.abs(b)))
    closed = ~(equal | series)

    out = np.zeros_like(a, dtype=float)
    nz = equal & (a != 0.0)
    out[nz] = h * pa[nz] / absa[nz]

    dc = d[closed]
    out[closed] = h * (np.sign(b[closed]) * pb[closed] - np.sign(a[closed]) * pa[closed]) / (q * dc)

    x = d[series] / a[series]
    c1 = p / 2.0
    c2 = p * (p - 1.0) / 6.0
    c3 = p * (p - 1.0) * (p - 2.0) / 24.0
    c4 = p * (p - 1.0) * (p - 2.0) * (p - 3.0) / 120.0
    c5 = p * (p - 1.0) * (p - 2.0) * (p - 3.0) * (p - 4.0) / 720.0
    s = 1.0 + x * (c1 + x * (c2 + x * (c3 + x * (c4 + x * c5))))
    out[series] = h * pa[series] / absa[series] * s
    return float(out.sum())


@njit(cache=True)
def derivative_sums_numba(vals, left, right, h):
    sq = 0.0
    ab = 0.0
    for k in range(left.shape[0]):
        d = vals[right[k]] - vals[left[k]]
        sq += d * d
        ab += abs(d)
    return sq / h, ab


def derivative_sums_numpy(vals, left, right, h):
    d = vals[right] - vals[left]
    return float(np.dot(d, d)) / h, float(np.abs(d).sum())


@njit(cache=True)
def mass_integral_numba(vals, left, right, h):
    total = 0.0
    for k in range(left.shape[0]):
        a = vals[left[k]]
        b = vals[right[k]]
        total += a * a + a * b + b * b
    return total * h / 3.0


def mass_integral_numpy(vals, left, right, h):
    a = vals[left]
    b = vals[right]
    return float(np.sum(a * a + a * b + b * b)) * h / 3.0


def _series_coefficients(p):
    # mean of |a (1 + x t)|^p over t in [0, 1] is |a|^p * sum_k c_k x^k
    c1 = p / 2.0
    c2 = p * (p - 1.0) / 6.0
    c3 = p * (p - 1.0) * (p - 2.0) / 24.0
    c4 = p * (p - 1.0) * (p - 2.0) * (p - 3.0) / 120.0
    c5 = p * (p - 1.0) * (p - 2.0) * (p - 3.0) * (p - 4.0) / 720.0
    return c1, c2, c3, c4, c5


@njit(cache=True)
def _energy_gradient_loop(vals, apow, left, right, h, p, grad):
    c1 = p / 2.0
    c2 = p * (p - 1.0) / 6.0
    c3 = p * (p - 1.0) * (p - 2.0) / 24.0
    c4 = p * (p - 1.0) * (p - 2.0) * (p - 3.0) / 120.0
    c5 = p * (p - 1.0) * (p - 2.0) * (p - 3.0) * (p - 4.0) / 720.0
    q = p + 1.0
    for i in range(grad.shape[0]):
        grad[i] = 0.0
    kin = 0.0
    pot = 0.0
    for k in range(left.shape[0]):
        i = left[k]
        j = right[k]
        a = vals[i]
        b = vals[j]
        d = b - a
        kin += d * d
        grad[i] -= d / h
        grad[j] += d / h
        if a == 0.0 and b == 0.0:
            continue
        if a * b > 0.0 and abs(d) < SERIES_CUTOFF * max(abs(a), abs(b)):
            x = d / a
            s = 1.0 + x * (c1 + x * (c2 + x * (c3 + x * (c4 + x * c5))))
            ds = c1 + x * (2.0 * c2 + x * (3.0 * c3 + x * (4.0 * c4 + x * 5.0 * c5)))
            m = apow[i] * s
            gb = apow[i] / a * ds
            ga = apow[i] / a * (p * s - (1.0 + x) * ds)
        else:
            fb = apow[j] * b
            fa = apow[i] * a
            m = (fb - fa) / (q * d)
            gb = (apow[j] - m) / d
            ga = (m - apow[i]) / d
        pot += m
        grad[i] -= h * ga / p
        grad[j] -= h * gb / p
    return 0.5 * kin / h - h * pot / p


def energy_and_gradient_numba(vals, left, right, h, p, grad):
    """Exact energy T - V of the piecewise-linear field; gradient into ``grad``."""
    # pow stays in a numpy ufunc: the compiled scalar pow is several times slower
    apow = np.abs(vals) ** p
    return _energy_gradient_loop(vals, apow, left, right, h, float(p), grad)


def energy_and_gradient_numpy(vals, left, right, h, p, grad):
    n = vals.shape[0]
    apow = np.abs(vals) ** p
    a = vals[left]
    b = vals[right]
    pa = apow[left]
    pb = apow[right]
    d = b - a
    series = (a * b > 0.0) & (np.abs(d) < SERIES_CUTOFF * np.maximum(np.abs(a), np.abs(b)))
    zero = (a == 0.0) & (b == 0.0)
    closed = ~(series | zero)

    mean = np.zeros_like(a)
    ga = np.zeros_like(a)
    gb = np.zeros_like(a)

    dc = d[closed]
    mc = (pb[closed] * b[closed] - pa[closed] * a[closed]) / ((p + 1.0) * dc)
    mean[closed] = mc
    gb[closed] = (pb[closed] - mc) / dc
    ga[closed] = (mc - pa[closed]) / dc

    c1, c2, c3, c4, c5 = _series_coefficients(p)
    as_ = a[series]
    x = d[series] / as_
    s = 1.0 + x * (c1 + x * (c2 + x * (c3 + x * (c4 + x * c5))))
    ds = c1 + x * (2.0 * c2 + x * (3.0 * c3 + x * (4.0 * c4 + x * 5.0 * c5)))
    scale = pa[series] / as_
    mean[series] = pa[series] * s
    gb[series] = scale * ds
    ga[series] = scale * (p * s - (1.0 + x) * ds)

    g = d / h
    grad[:] = (np.bincount(right, g - h * gb / p, n)
               - np.bincount(left, g + h * ga / p, n))
    return 0.5 * float(np.dot(d, d)) / h - h * float(mean.sum()) / p


if USE_NUMBA:
    power_integral = power_integral_numba
    mass_integral = mass_integral_numba
    derivative_sums = derivative_sums_numba
    energy_and_gradient = energy_and_gradient_numba
else:
    power_integral = power_integral_numpy
    mass_integral = mass_integral_numpy
    derivative_sums = derivative_sums_numpy
    energy_and_gradient = energy_and_gradient_numpy
