"""Data generators with known ground truth, shared by unit tests and the acceptance gate."""

import numpy as np
from scipy.signal import lfilter

from horizonbench.anfis import AnfisModel, Variant

AR_TRUE = (0.5, -0.3)
MA_TRUE = (0.2, 0.1)


def simulate_arima(n, seed, sigma=0.1, ar=AR_TRUE, ma=MA_TRUE, burn=200):
    """Filter white noise through the ARMA polynomials and integrate once."""
    e = np.random.default_rng(seed).normal(0, sigma, n + burn)
    w = lfilter(np.r_[1.0, ma], np.r_[1.0, -np.asarray(ar)], e)[burn:]
    return 100.0 + np.cumsum(w)


def simulate_ar(n, seed, coefs=(0.6, 0.25), intercept=0.4, sigma=0.1, burn=200):
    e = np.random.default_rng(seed).normal(0, sigma, n + burn)
    x = np.zeros(n + burn)
    p = len(coefs)
    for t in range(p, n + burn):
        x[t] = intercept + sum(c * x[t - i - 1] for i, c in enumerate(coefs)) + e[t]
    return x[burn:]


def sugeno_generator(seed=0):
    """A fixed 2-input, 9-rule Sugeno system whose bells differ from the default grid."""
    rng = np.random.default_rng(seed)
    centers = (np.array([0.1, 0.45, 0.9]), np.array([0.05, 0.55, 0.95]))
    a = (np.full(3, 0.3), np.full(3, 0.28))
    b = (np.full(3, 2.5), np.full(3, 1.8))
    grids = np.meshgrid(np.arange(3), np.arange(3), indexing="ij")
    antecedents = np.stack([g.ravel() for g in grids], axis=1)
    consequents = rng.uniform(-1, 1, size=(9, 3))
    return AnfisModel(a, b, centers, antecedents, consequents, Variant.GRID_PARTITION)


def sugeno_data(n=2000, seed=0):
    gen = sugeno_generator(seed)
    X = np.random.default_rng(seed + 1).uniform(0, 1, size=(n, 2))
    return X, gen.predict(X)
