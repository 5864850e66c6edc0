"""Dense brute-force reference implementations.

Everything here works on plain numpy arrays with explicit loops or einsum and
shares no code with the package beyond data conversion, so it can serve as an
independent check of the sparse implementations.
"""

import itertools

import numpy as np


def dense_contract(D, mode, u, v):
    I, J, K = D.shape
    out = np.zeros(D.shape[mode])
    for i in range(I):
        for j in range(J):
            for k in range(K):
                x = D[i, j, k]
                if mode == 0:
                    out[i] += x * u[j] * v[k]
                elif mode == 1:
                    out[j] += x * u[i] * v[k]
                else:
                    out[k] += x * u[i] * v[j]
    return out


def two_pass_adjacency(C):
    """Line-by-line transcription of the two-pass construction algorithm."""
    C = np.asarray(C)
    I, K = C.shape
    X = np.zeros((I, I, K), dtype=np.int64)
    for k in range(K):
        for i in range(I):
            X[i, :, k] = C[:, k]
            X[i, i, k] = 0
            if C[i, k] == 0:
                X[i, :, k] = 0
    Y = X.copy()
    for k in range(K):
        for j in range(I):
            for i in range(I):
                if X[i, j, k] != 0:
                    X[i, j, k] = X[i, j, k] + Y[j, i, k]
    del Y
    return X


def reconstruct(weights, H, A, T):
    I, J, K = H.shape[0], A.shape[0], T.shape[0]
    out = np.zeros((I, J, K))
    for r, w in enumerate(weights):
        out += w * np.multiply.outer(np.multiply.outer(H[:, r], A[:, r]), T[:, r])
    return out


def dense_hopm(D, h, a, t, iters=2000, tol=1e-15):
    """Alternating higher-order power method on a dense tensor."""
    lam = 0.0
    for _ in range(iters):
        h = np.einsum("ijk,j,k->i", D, a, t)
        h /= np.linalg.norm(h) or 1.0
        a = np.einsum("ijk,i,k->j", D, h, t)
        a /= np.linalg.norm(a) or 1.0
        t = np.einsum("ijk,i,j->k", D, h, a)
        t /= np.linalg.norm(t) or 1.0
        new = float(np.einsum("ijk,i,j,k->", D, h, a, t))
        if abs(new - lam) <= tol * max(abs(new), 1.0):
            lam = new
            break
        lam = new
    return lam, h, a, t


def best_rank1(D, n_random=20, seed=0):
    """Best rank-1 term found from every standard-basis start plus random starts."""
    I, J, K = D.shape
    rng = np.random.default_rng(seed)
    starts = []
    for i, j, k in itertools.product(range(I), range(J), range(K)):
        if D[i, j, k] != 0:
            starts.append((np.eye(I)[i], np.eye(J)[j], np.eye(K)[k]))
    for _ in range(n_random):
        starts.append((rng.standard_normal(I), rng.standard_normal(J), rng.standard_normal(K)))
    best = None
    for h, a, t in starts:
        lam, h, a, t = dense_hopm(D, h / np.linalg.norm(h), a / np.linalg.norm(a), t / np.linalg.norm(t))
        if best is None or abs(lam) > abs(best[0]) + 1e-12:
            best = (lam, h, a, t)
    lam, h, a, t = best
    if lam < 0:
        lam, h = -lam, -h
    return lam, h, a, t


def greedy_dense(D, rank):
    """Greedy deflation with the exhaustive dense rank-1 search."""
    D = np.array(D, dtype=float)
    terms = []
    for _ in range(rank):
        lam, h, a, t = best_rank1(D)
        terms.append((lam, h, a, t))
        D = D - lam * np.multiply.outer(np.multiply.outer(h, a), t)
    return terms


def cosine(u, v):
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(u @ v / (nu * nv))


def dense_tasks(C, H, T, qb=None, qw=None):
    """Standard and decomposition rankings of the four tasks with loops over C.

    ``qb`` and ``qw`` default to all-ones blog and word queries.
    """
    C = np.asarray(C, dtype=float)
    N, M = C.shape
    B = np.array([[cosine(C[i], C[j]) for j in range(N)] for i in range(N)])
    W = np.array([[cosine(C[:, p], C[:, q]) for q in range(M)] for p in range(M)])
    qb = np.ones(N) if qb is None else np.asarray(qb, dtype=float)
    qw = np.ones(M) if qw is None else np.asarray(qw, dtype=float)
    return {
        1: (C @ qw, H @ (T.T @ qw)),
        2: (C.T @ qb, T @ (H.T @ qb)),
        3: (B @ qb, H @ (H.T @ qb)),
        4: (W @ qw, T @ (T.T @ qw)),
    }, B, W
