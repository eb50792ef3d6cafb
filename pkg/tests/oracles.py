"""Independent reference computations used as test oracles.

Each function recomputes a quantity from first principles with code that
shares nothing with the package under test.
"""
import itertools
import math

import numpy as np

G = 9.81


def static_hip_knee_torques(thigh_mass, thigh_com, thigh_len, shank_mass, shank_com,
                            q_hip, q_knee, gamma=0.0, g=G):
    """Torques that hold a two-link leg still, from moments of the weights.

    Planar frame with x forward and y up; flexion rotates a segment
    counter-clockwise.  Each weight ``(0, -m g)`` acting at ``r`` exerts the
    moment ``r_x F_y - r_y F_x`` about the joint; the holding torque is its
    negative.
    """
    a1 = gamma + q_hip
    a2 = a1 + q_knee

    def down(a, length):  # point at distance length along a segment hanging at angle a
        return np.array([length * math.sin(a), -length * math.cos(a)])

    knee = down(a1, thigh_len)
    r_thigh = down(a1, thigh_com)
    r_shank = knee + down(a2, shank_com)

    def moment(r, m):
        return r[0] * (-m * g) - r[1] * 0.0

    hip = -(moment(r_thigh, thigh_mass) + moment(r_shank, shank_mass))
    knee_t = -moment(r_shank - knee, shank_mass)
    return hip, knee_t


def wilcoxon_brute(d):
    """Two-sided exact p of the signed-rank test by listing all 2^n sign vectors."""
    d = [x for x in d if x != 0]
    n = len(d)
    a = [abs(x) for x in d]
    order = sorted(range(n), key=lambda i: a[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and a[order[j + 1]] == a[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2 + 1
        i = j + 1
    w = sum(r for r, x in zip(ranks, d) if x > 0)
    mid = n * (n + 1) / 4
    hits = 0
    for signs in itertools.product((0, 1), repeat=n):
        ws = sum(r for r, s in zip(ranks, signs) if s)
        if abs(ws - mid) >= abs(w - mid) - 1e-9:
            hits += 1
    return w, hits / 2 ** n


def friedman_brute(x):
    """Q and exact p by listing every table of within-subject rank permutations."""
    x = np.asarray(x, dtype=float)
    n, k = x.shape
    rows = []
    for row in x:
        r = []
        for v in row:
            less = sum(1 for u in row if u < v)
            eq = sum(1 for u in row if u == v)
            r.append(less + (eq + 1) / 2)
        rows.append(r)

    def q_of(table):
        sums = [sum(t[j] for t in table) for j in range(k)]
        return 12 / (n * k * (k + 1)) * sum(s * s for s in sums) - 3 * n * (k + 1)

    q = q_of(rows)
    perms = [list(itertools.permutations(r)) for r in rows]
    hits = total = 0
    for table in itertools.product(*perms):
        total += 1
        if q_of(table) >= q - 1e-9:
            hits += 1
    return q, hits / total


def friedman_distribution_untied(n, k):
    """Exact null distribution ``{Q: probability}`` without ties, by enumeration."""
    base = list(itertools.permutations(range(1, k + 1)))
    sums = {(0,) * k: 1}
    for _ in range(n):
        nxt = {}
        for s, c in sums.items():
            for p in base:
                key = tuple(a + b for a, b in zip(s, p))
                nxt[key] = nxt.get(key, 0) + c
        sums = nxt
    total = len(base) ** n
    dist = {}
    for s, c in sums.items():
        q = round(12 / (n * k * (k + 1)) * sum(v * v for v in s) - 3 * n * (k + 1), 9)
        dist[q] = dist.get(q, 0) + c / total
    return dist
