"""Reference root-finder for the per-period cost, written independently of the package.

It solves the sales+purchases balance

    omega = 1 - psi_s * sum_i (a_hat_i - a_i omega)^+ - psi_p * sum_i (a_i omega - a_hat_i)^+

over risky i >= 1 by plain bisection on [0, 1] with a fixed iteration count.
"""

import numpy as np


def balance_gap(a_hat, a_new, omega, psi_p, psi_s):
    risky_hat = a_hat[:, 1:]
    risky_new = a_new[:, 1:] * omega[:, None]
    sold = np.clip(risky_hat - risky_new, 0.0, None).sum(axis=1)
    bought = np.clip(risky_new - risky_hat, 0.0, None).sum(axis=1)
    return omega - 1.0 + psi_s * sold + psi_p * bought  # increasing in omega


def oracle_omega(a_hat, a_new, psi_p, psi_s=None, iterations=80):
    psi_s = psi_p if psi_s is None else psi_s
    a_hat = np.atleast_2d(np.asarray(a_hat, dtype=np.float64))
    a_new = np.atleast_2d(np.asarray(a_new, dtype=np.float64))
    lo = np.zeros(len(a_hat))
    hi = np.ones(len(a_hat))
    for _ in range(iterations):
        mid = (lo + hi) / 2
        above = balance_gap(a_hat, a_new, mid, psi_p, psi_s) > 0
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    return (lo + hi) / 2


def random_pairs(rng, count, d):
    """Dirichlet pairs, with a share of sparse draws so faces and corners appear."""
    def one():
        w = rng.dirichlet(np.full(d, 0.7), size=count)
        keep = rng.random((count, d)) < 0.6
        keep[np.arange(count), rng.integers(0, d, count)] = True
        sparse = (rng.random(count) < 0.3)[:, None]
        w = np.where(sparse & ~keep, 0.0, w)
        return w / w.sum(axis=1, keepdims=True)
    return one(), one()
