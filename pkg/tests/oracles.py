"""Independent oracles the production code is checked against.

Nothing here shares assembly code with skewlab.fiber_measure: the vertex
oracle enumerates polytope vertices directly, and the flow oracle solves
the transport-with-creation dual, tied to the primal only by LP duality.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog


def _facets(positions, zeta):
    """All facet rows (a, b) with a.g <= b of the test-function polytope."""
    n = len(positions)
    rows = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        rows.append((e.copy(), 1.0))
        rows.append((-e, 1.0))
    for i in range(n):
        for j in range(i + 1, n):
            d = abs(positions[i] - positions[j]) ** zeta
            a = np.zeros(n)
            a[i], a[j] = 1.0, -1.0
            rows.append((a.copy(), d))
            rows.append((-a, d))
    return rows


def w_norm_vertex_oracle(positions, weights, zeta):
    """Exhaustive vertex enumeration of the dual-Hölder LP (<= 3 atoms).

    Every vertex of the bounded feasible polytope is the intersection of n
    facets; the optimum of a bounded LP sits on one of them.
    """
    positions = np.asarray(positions, dtype=float)
    weights = np.asarray(weights, dtype=float)
    n = len(positions)
    if n == 0:
        return 0.0
    if n > 3:
        raise ValueError("vertex oracle is for supports of at most 3 atoms")
    rows = _facets(positions, zeta)
    best = -np.inf
    for combo in itertools.combinations(range(len(rows)), n):
        a = np.asarray([rows[k][0] for k in combo])
        b = np.asarray([rows[k][1] for k in combo])
        try:
            g = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            continue
        feasible = all(np.dot(ar, g) <= br + 1e-9 for ar, br in rows)
        if feasible:
            best = max(best, float(np.dot(weights, g)))
    return best


def w_norm_flow_oracle(positions, weights, zeta):
    """All-pairs transport/creation LP for the dual-Hölder norm.

    minimize  sum_{i != j} f_ij d_ij^zeta + sum_i (p_i + m_i)
    s.t.      sum_j (f_ij - f_ji) + p_i - m_i = w_i,  all vars >= 0.

    Equals the test-function supremum by LP duality.
    """
    positions = np.asarray(positions, dtype=float)
    weights = np.asarray(weights, dtype=float)
    n = len(positions)
    if n == 0:
        return 0.0
    arcs = [(i, j) for i in range(n) for j in range(n) if i != j]
    nv = len(arcs) + 2 * n
    cost = np.empty(nv)
    for k, (i, j) in enumerate(arcs):
        cost[k] = abs(positions[i] - positions[j]) ** zeta
    cost[len(arcs):] = 1.0

    a_eq = np.zeros((n, nv))
    for k, (i, j) in enumerate(arcs):
        a_eq[i, k] += 1.0
        a_eq[j, k] -= 1.0
    for i in range(n):
        a_eq[i, len(arcs) + i] = 1.0        # creation p_i
        a_eq[i, len(arcs) + n + i] = -1.0   # annihilation m_i
    res = linprog(cost, A_eq=a_eq, b_eq=weights, bounds=[(0, None)] * nv, method="highs")
    if res.status != 0:
        raise RuntimeError(f"flow oracle LP failed: {res.message}")
    return float(res.fun)


def holder_seminorm_exhaustive(points, values, zeta, distance):
    """Max difference quotient over every pair of samples."""
    best = 0.0
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            d = distance(points[i], points[j])
            if d > 0:
                best = max(best, abs(values[i] - values[j]) / d**zeta)
    return best


def iterate_density_oracle(base_map, phi, steps):
    """Brute-force repeated application of the cell-center transfer
    formula, written against branch_preimages directly (does not use
    perron_frobenius or the cached tables)."""
    from skewlab.base_dynamics import branch_preimages

    out = np.asarray(phi, dtype=float)
    n = out.size
    for _ in range(steps):
        new = np.zeros(n)
        for k in range(n):
            gamma = (k + 0.5) / n
            for x, w in branch_preimages(base_map, gamma):
                new[k] += out[min(int(x * n), n - 1)] * w
        out = new
    return out
