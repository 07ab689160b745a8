"""Independent reference computations used by several test modules."""

import math

import numpy as np
from scipy import integrate, special


def ncx2_pdf(x, v, nc):
    """Noncentral chi-square density via the modified Bessel function form."""
    x = np.asarray(x, dtype=float)
    if nc == 0:
        return np.exp((v / 2 - 1) * np.log(x) - x / 2 - (v / 2) * np.log(2) - special.gammaln(v / 2))
    s = np.sqrt(nc * x)
    order = v / 2 - 1
    # ive(k, s) = iv(k, s) exp(-s)
    return 0.5 * np.exp(-(x + nc) / 2 + s + (v / 4 - 0.5) * np.log(x / nc)) * special.ive(order, s)


def quad(f, lo, hi):
    val, _ = integrate.quad(f, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=400)
    return val


def cdf_quad(v, nc, x):
    if x == 0:
        return 0.0
    # substitute t = u^2 so the x^(v/2-1) singularity at 0 disappears for v = 1
    return quad(lambda u: 2 * u * ncx2_pdf(u * u, v, nc), 0.0, math.sqrt(x))


def moment_quad(v, nc, power, cut=np.inf):
    """E[X^-power I(X < cut)]."""
    f = lambda t: t ** (-power) * ncx2_pdf(t, v, nc)
    if np.isinf(cut):
        return quad(f, 0, 50) + quad(f, 50, np.inf)
    return quad(f, 0, cut)
