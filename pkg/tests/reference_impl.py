"""Straight-line reference implementations used as independent test oracles.

Deliberately separate from the package: dense numpy translations of the
update rules written block-by-block (x, y, p, q with explicit descent and
ascent signs) rather than in the library's sign-flipped stacked form.  The
pinned constants in the test suite were produced with these functions.
"""

import numpy as np


def gradients(a, b, mu, x, y):
    """Per-block gradients of x.y + mu/2 ||x-a||^2 - mu/2 ||y-b||^2."""
    gx = y + mu * (x - a)
    gy = x - mu * (y - b)
    return gx, gy


def make_instance(n=16, p=2, d=2, mu=0.1, seed=7):
    """Zero-sum centers drawn exactly like the library's factory."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, p))
    b = rng.standard_normal((n, d))
    a = a - a.mean(axis=0)
    b = b - b.mean(axis=0)
    return a, b, mu


def ring_metropolis(n):
    """Metropolis weights on a ring: 1/3 on the three diagonals."""
    W = np.zeros((n, n))
    for i in range(n):
        W[i, i] = 1.0 / 3.0
        W[i, (i + 1) % n] = 1.0 / 3.0
        W[i, (i - 1) % n] = 1.0 / 3.0
    return W


def initial_point(n=16, p=2, d=2, seed=8, scale=1.0):
    z0 = scale * np.random.default_rng(seed).standard_normal((n, p + d))
    return z0[:, :p].copy(), z0[:, p:].copy()


def gda_centralized(a, b, mu, x, y, gamma, iters):
    """z_{k+1} = z_k - gamma G(z_k) on the averaged objective of one node."""
    out = [np.concatenate([x, y])]
    for _ in range(iters):
        gx, gy = gradients(a, b, mu, x, y)
        x = x - gamma * gx
        y = y + gamma * gy
        out.append(np.concatenate([x, y]))
    return out


def ogda_centralized(a, b, mu, x, y, gamma, iters):
    """Optimistic update z_{k+1} = z_k - gamma (2 G(z_k) - G(z_{k-1}))."""
    gx, gy = gradients(a, b, mu, x, y)
    gx_prev, gy_prev = gx, gy
    out = [np.concatenate([x, y])]
    for _ in range(iters):
        x = x - gamma * (2.0 * gx - gx_prev)
        y = y + gamma * (2.0 * gy - gy_prev)
        gx_prev, gy_prev = gx, gy
        gx, gy = gradients(a, b, mu, x, y)
        out.append(np.concatenate([x, y]))
    return out


def dgda_run(a, b, mu, W, gamma, x, y, iters):
    out = [(x.copy(), y.copy())]
    for _ in range(iters):
        gx, gy = gradients(a, b, mu, x, y)
        x = W @ (x - gamma * gx)
        y = W @ (y + gamma * gy)
        out.append((x.copy(), y.copy()))
    return out


def dogda_run(a, b, mu, W, gamma, x, y, iters):
    gx, gy = gradients(a, b, mu, x, y)
    gx_prev, gy_prev = gx, gy
    out = [(x.copy(), y.copy())]
    for _ in range(iters):
        x = W @ (x - gamma * (2.0 * gx - gx_prev))
        y = W @ (y + gamma * (2.0 * gy - gy_prev))
        gx_prev, gy_prev = gx, gy
        gx, gy = gradients(a, b, mu, x, y)
        out.append((x.copy(), y.copy()))
    return out


def dogt_run(a, b, mu, W, gamma, x, y, iters):
    """Gradient-tracking optimistic run in explicit four-block form."""
    gx, gy = gradients(a, b, mu, x, y)
    gx_prev, gy_prev = gx.copy(), gy.copy()
    p_trk, q_trk = gx.copy(), gy.copy()
    out = [(x.copy(), y.copy())]
    for _ in range(iters):
        x = W @ (x - gamma * (p_trk + gx - gx_prev))
        y = W @ (y + gamma * (q_trk + gy - gy_prev))
        gx_new, gy_new = gradients(a, b, mu, x, y)
        p_trk = W @ (p_trk + gx_new - gx)
        q_trk = W @ (q_trk + gy_new - gy)
        gx_prev, gy_prev = gx, gy
        gx, gy = gx_new, gy_new
        out.append((x.copy(), y.copy()))
    return out


def chebyshev_matrix(W, T, eta):
    """M_T from the two-term momentum recursion with M_{-1} = M_0 = I."""
    n = W.shape[0]
    M_prev = np.eye(n)
    M = np.eye(n)
    for _ in range(T):
        M_prev, M = M, (1.0 + eta) * (W @ M) - eta * M_prev
    return M


def adogt_run(a, b, mu, W, gamma, x, y, iters, T):
    """dogt under the accelerated effective matrix M_T."""
    rho = np.sort(np.abs(np.linalg.eigvalsh(W - np.ones_like(W) / len(W))))[-1] ** 2
    eta = (1.0 - np.sqrt(1.0 - rho)) / (1.0 + np.sqrt(1.0 - rho))
    return dogt_run(a, b, mu, chebyshev_matrix(W, T, eta), gamma, x, y, iters)


def residual_series(pairs, z_star=None):
    """(1/n) ||z_k - 1 z*||^2 per iterate; z* defaults to the origin."""
    out = []
    for x, y in pairs:
        z = np.hstack([x, y])
        if z_star is not None:
            z = z - z_star
        out.append(float(np.sum(z * z)) / z.shape[0])
    return out


def consensus_series(pairs):
    """(1/n) ||z_k - 1 zbar_k|| (unsquared) per iterate."""
    out = []
    for x, y in pairs:
        z = np.hstack([x, y])
        dev = z - z.mean(axis=0)
        out.append(float(np.linalg.norm(dev)) / z.shape[0])
    return out
