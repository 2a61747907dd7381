"""Shared independent oracles for the test suite.

Everything here deliberately avoids the library's own code paths: eigenvalues
come from a hand-rolled shifted QR iteration, the mixing polynomial from the
closed Chebyshev form on the eigendecomposition, and connectivity from BFS.
"""

import math

import numpy as np


def bfs_connected(adjacency):
    n = adjacency.shape[0]
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in range(n):
            if adjacency[u, v] and v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n


def qr_eigvalsh(mat, tol=1e-13, max_sweeps=50000):
    """Symmetric eigenvalues via Wilkinson-shifted QR iteration with deflation."""
    h = np.array(mat, dtype=float)
    scale = max(1.0, np.abs(h).max())
    n = h.shape[0]
    eigs = []
    sweeps = 0
    while n > 1:
        while np.abs(h[n - 1, : n - 1]).max() > tol * scale:
            sweeps += 1
            if sweeps > max_sweeps:
                raise RuntimeError("QR iteration failed to converge")
            a = h[n - 2, n - 2]
            b = h[n - 1, n - 2]
            c = h[n - 1, n - 1]
            delta = (a - c) / 2.0
            if delta == 0 and b == 0:
                mu = c
            else:
                sgn = 1.0 if delta >= 0 else -1.0
                mu = c - sgn * b * b / (abs(delta) + math.hypot(delta, b))
            q, r = np.linalg.qr(h[:n, :n] - mu * np.eye(n))
            h[:n, :n] = r @ q + mu * np.eye(n)
        eigs.append(h[n - 1, n - 1])
        n -= 1
    eigs.append(h[0, 0])
    return np.sort(np.array(eigs))


def chebyshev_closed_form(ell, x):
    """T_ell(x) from the trigonometric/hyperbolic closed forms."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    inside = np.abs(x) <= 1.0
    out[inside] = np.cos(ell * np.arccos(np.clip(x[inside], -1.0, 1.0)))
    above = x > 1.0
    out[above] = np.cosh(ell * np.arccosh(x[above]))
    below = x < -1.0
    out[below] = (-1.0) ** ell * np.cosh(ell * np.arccosh(-x[below]))
    return out


def mixing_polynomial_eig(entries, lambda2_abs, s_rounds):
    """q_S(P) assembled from the eigendecomposition and closed-form Chebyshev."""
    vals, vecs = np.linalg.eigh(entries)
    numer = chebyshev_closed_form(s_rounds, vals / lambda2_abs)
    denom = chebyshev_closed_form(s_rounds, np.array([1.0 / lambda2_abs]))[0]
    return (vecs * (numer / denom)) @ vecs.T


def random_connected_adjacency(n, p, rng, max_tries=500):
    iu = np.triu_indices(n, k=1)
    for _ in range(max_tries):
        a = np.zeros((n, n))
        a[iu] = (rng.random(len(iu[0])) < p).astype(float)
        a = a + a.T
        if bfs_connected(a):
            return a
    raise RuntimeError("could not sample a connected graph")
