"""Independent reference implementations used only by the tests.

Each one takes the slow, textbook route so it shares no code with the library.
"""

import math

import numpy as np


def hsic_naive(x, y):
    """tr(K H L H) / (N-1)^2 with explicit Gram and centering matrices."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    n = x.shape[0]
    h = np.eye(n) - np.ones((n, n)) / n
    k, l = x @ x.T, y @ y.T
    return float(np.trace(k @ h @ l @ h)) / (n - 1) ** 2


def cka_naive(x, y):
    return hsic_naive(x, y) / math.sqrt(hsic_naive(x, x) * hsic_naive(y, y))


def average_ranks(values):
    """1-based ranks; tied runs get the mean of the positions they span."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mean
        i = j + 1
    return ranks


def pearson(a, b):
    n = len(a)
    ma, mb = sum(a) / n, sum(b) / n
    cov = sum((p - ma) * (q - mb) for p, q in zip(a, b))
    va = sum((p - ma) ** 2 for p in a)
    vb = sum((q - mb) ** 2 for q in b)
    return cov / math.sqrt(va * vb)


def spearman_oracle(xs, ys):
    return pearson(average_ranks(list(xs)), average_ranks(list(ys)))


def cosine_loop(x):
    n = len(x)
    out = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            dot = sum(p * q for p, q in zip(x[i], x[j]))
            out[i][j] = dot / math.sqrt(sum(p * p for p in x[i]) * sum(q * q for q in x[j]))
    return np.array(out)


def trapezoid(values):
    k = len(values) - 1
    return sum((values[i] + values[i + 1]) / 2 for i in range(k)) / k
