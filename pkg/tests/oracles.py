"""Independent reference implementations used as test oracles.

Everything here is written with explicit loops or full-space matrices so it
shares no code path with the package kernels (no eigh, no einsum, no
moveaxis).
"""
import itertools
import math

import numpy as np


def taylor_expm(a, terms=30):
    """exp(a) by scaling and squaring around a truncated Taylor series."""
    a = np.asarray(a, dtype=np.complex128)
    norm = np.max(np.sum(np.abs(a), axis=1))
    s = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0 else 0
    b = a / 2**s
    out = np.eye(a.shape[0], dtype=np.complex128)
    term = np.eye(a.shape[0], dtype=np.complex128)
    for k in range(1, terms):
        term = term @ b / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


def propagator(h, t):
    """exp(-i h t) via the Taylor oracle."""
    return taylor_expm(-1j * np.asarray(h) * t)


def loop_kron(a, b):
    m, n = a.shape
    p, q = b.shape
    out = np.zeros((m * p, n * q), dtype=np.complex128)
    for i in range(m):
        for j in range(n):
            for k in range(p):
                for l in range(q):
                    out[i * p + k, j * q + l] = a[i, j] * b[k, l]
    return out


def flat_index(idx, dims):
    f = 0
    for i, d in zip(idx, dims):
        f = f * d + i
    return f


def loop_partial_trace(rho, dims, keep):
    """Keep the factors at positions ``keep`` (in that order), sum over the rest."""
    rest = [i for i in range(len(dims)) if i not in keep]
    kd = [dims[i] for i in keep]
    rd = [dims[i] for i in rest]
    out = np.zeros((int(np.prod(kd)), int(np.prod(kd))), dtype=np.complex128)
    for a in itertools.product(*[range(d) for d in kd]):
        for b in itertools.product(*[range(d) for d in kd]):
            acc = 0.0
            for r in itertools.product(*[range(d) for d in rd]):
                ia, ib = [0] * len(dims), [0] * len(dims)
                for pos, v in zip(keep, a):
                    ia[pos] = v
                for pos, v in zip(keep, b):
                    ib[pos] = v
                for pos, v in zip(rest, r):
                    ia[pos] = v
                    ib[pos] = v
                acc += rho[flat_index(ia, dims), flat_index(ib, dims)]
            out[flat_index(a, kd), flat_index(b, kd)] = acc
    return out


def loop_inner(a, b):
    acc = 0j
    for x, y in zip(a, b):
        acc += np.conj(x) * y
    return acc


def permutation_matrix(dims, order):
    """Matrix P with (P v) having new factor k = old factor order[k]."""
    new_dims = [dims[o] for o in order]
    n = int(np.prod(dims))
    p = np.zeros((n, n))
    for idx in itertools.product(*[range(d) for d in dims]):
        new_idx = [idx[o] for o in order]
        p[flat_index(new_idx, new_dims), flat_index(idx, dims)] = 1.0
    return p


def embed(op, dims, positions):
    """Full-space matrix of ``op`` acting on ``positions`` (in that order)."""
    rest = [i for i in range(len(dims)) if i not in positions]
    order = list(positions) + rest
    p = permutation_matrix(dims, order)
    other = int(np.prod([dims[i] for i in rest])) if rest else 1
    return p.T @ np.kron(op, np.eye(other)) @ p


def rotation_matrix(dims):
    """Left rotation of the pulse factors as a full-space permutation."""
    n = len(dims)
    return permutation_matrix(dims, [0] + list(range(2, n)) + [1])


def alice_monolithic(y0, pulses, h_sys, h_joint, dt):
    """Alice's N' cycles as one product of full-space matrices."""
    dims = [len(y0)] + [len(p) for p in pulses]
    v = y0
    for p in pulses:
        v = np.kron(v, p)
    f = propagator(h_sys, dt)
    j = propagator(h_joint, dt)
    step = embed(f, dims, [0]) @ embed(f, dims, [0]) @ embed(j, dims, [0, 1])
    # pulse dims are equal, so the rotation preserves dims
    rot = rotation_matrix(dims)
    for _ in pulses:
        v = rot @ (step @ v)
    return v


def random_unit(rng, n, real=False):
    v = rng.normal(size=n)
    if not real:
        v = v + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def random_symmetric(rng, n):
    a = rng.normal(size=(n, n))
    return (a + a.T) / 2
