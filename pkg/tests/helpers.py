"""Independent numerical oracles shared by the test modules."""
import math

import numpy as np
from scipy import integrate


def central_diff(f, params, h=1e-5):
    """Central finite differences of scalar ``f(params)`` for each array in ``params``.

    ``params`` is a dict of float arrays; entries are perturbed in place and restored.
    """
    out = {}
    for name, arr in params.items():
        g = np.zeros_like(arr)
        flat, gflat = arr.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = f(params)
            flat[i] = orig - h
            down = f(params)
            flat[i] = orig
            gflat[i] = (up - down) / (2 * h)
        out[name] = g
    return out


def rel_err(a, b):
    a, b = np.ravel(a), np.ravel(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / scale)


def global_rel_err(analytic: dict, numeric: dict) -> float:
    """Relative error of the concatenated gradient vector (norm-wise)."""
    keys = sorted(analytic)
    return rel_err(np.concatenate([np.ravel(analytic[k]) for k in keys]),
                   np.concatenate([np.ravel(numeric[k]) for k in keys]))


def t_pvalue_by_quadrature(t, df):
    """P(T > t) by integrating the Student-t density."""
    logc = math.lgamma((df + 1) / 2) - math.lgamma(df / 2) - 0.5 * math.log(df * math.pi)

    def pdf(u):
        return math.exp(logc - (df + 1) / 2 * math.log1p(u * u / df))

    if t >= 0:
        val, _ = integrate.quad(pdf, t, math.inf, epsabs=1e-13, epsrel=1e-12)
        return val
    val, _ = integrate.quad(pdf, -math.inf, t, epsabs=1e-13, epsrel=1e-12)
    return 1.0 - val


def welch_by_hand(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    vx, vy = x.var(ddof=1) / len(x), y.var(ddof=1) / len(y)
    t = (x.mean() - y.mean()) / math.sqrt(vx + vy)
    df = (vx + vy) ** 2 / (vx ** 2 / (len(x) - 1) + vy ** 2 / (len(y) - 1))
    return t, df
