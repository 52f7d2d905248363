"""Naive loop references for the layer kernels, written for clarity, not speed."""
import numpy as np


def conv(x, w, b, relu):
    F, T, G = x.shape
    M, N, _, K = w.shape
    out = np.zeros((F - M + 1, T - N + 1, K))
    for i in range(F - M + 1):
        for j in range(T - N + 1):
            for k in range(K):
                s = b[k]
                for m in range(M):
                    for n in range(N):
                        for g in range(G):
                            s += x[i + m, j + n, g] * w[m, n, g, k]
                out[i, j, k] = max(s, 0.0) if relu else s
    return out


def intramap(x, p, q):
    F, T, M = x.shape
    out = np.zeros((F // p, T // q, M))
    for i in range(F // p):
        for j in range(T // q):
            for k in range(M):
                out[i, j, k] = max(x[i * p + a, j * q + c, k] for a in range(p) for c in range(q))
    return out


def intermap(x, r, stride):
    F, T, M = x.shape
    n = (M - r) // stride + 1
    out = np.zeros((F, T, n))
    for i in range(F):
        for j in range(T):
            for k in range(n):
                out[i, j, k] = max(x[i, j, k * stride + g] for g in range(r))
    return out
