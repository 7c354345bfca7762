"""Exact optimal transport on finite spaces via the transportation simplex.

Northwest-corner start, MODI (u/v potential) pivoting, Bland's rule for
entering and leaving cells, and a 1e-13 perturbation of the marginals to
break degenerate ties.  Forbidden (infinite-cost) cells are handled with a
symbolic big-M: costs are pairs (penalty_units, cost) compared
lexicographically, so the solver first minimizes mass on forbidden cells
and only then the finite cost.  If the minimal forbidden mass is positive,
no finite-cost coupling exists and the value is +inf.

After the pivoting loop the basis (a spanning tree) is re-solved against
the unperturbed marginals, so the reported plan sums exactly to the inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .extreal import INF

_PEN_TOL = 1e-9     # penalties are near-integers
_MAX_PIVOTS = 20000


@dataclass
class TransportSolution:
    value: float
    plan: Optional[np.ndarray]
    row_potentials: Optional[np.ndarray]
    col_potentials: Optional[np.ndarray]
    pivots: int


def _northwest_corner(a, b):
    R, C = a.size, b.size
    arem = a.copy()
    brem = b.copy()
    flows = {}
    basis = []
    i = j = 0
    while True:
        q = min(arem[i], brem[j])
        flows[(i, j)] = q
        basis.append((i, j))
        arem[i] -= q
        brem[j] -= q
        if i == R - 1 and j == C - 1:
            break
        if arem[i] <= brem[j] and i < R - 1:
            i += 1
        elif j < C - 1:
            j += 1
        else:
            i += 1
    return basis, flows


def _tree_adjacency(basis, R, C):
    adj = {("r", i): [] for i in range(R)}
    adj.update({("c", j): [] for j in range(C)})
    for (i, j) in basis:
        adj[("r", i)].append((("c", j), (i, j)))
        adj[("c", j)].append((("r", i), (i, j)))
    return adj


def _potentials(basis, cost_pair, R, C):
    adj = _tree_adjacency(basis, R, C)
    u = np.full((R, 2), np.nan)
    v = np.full((C, 2), np.nan)
    u[0] = (0.0, 0.0)
    stack = [("r", 0)]
    seen = {("r", 0)}
    while stack:
        node = stack.pop()
        for nxt, (i, j) in adj[node]:
            if nxt in seen:
                continue
            seen.add(nxt)
            if nxt[0] == "c":
                v[nxt[1]] = cost_pair[i, j] - u[i]
            else:
                u[nxt[1]] = cost_pair[i, j] - v[j]
            stack.append(nxt)
    return u, v


def _find_cycle_path(basis, start, goal, R, C):
    """Path of basic cells between two tree nodes (exists and is unique)."""
    adj = _tree_adjacency(basis, R, C)
    prev = {start: (None, None)}
    stack = [start]
    while stack:
        node = stack.pop()
        if node == goal:
            break
        for nxt, cell in adj[node]:
            if nxt not in prev:
                prev[nxt] = (node, cell)
                stack.append(nxt)
    path = []
    node = goal
    while prev[node][0] is not None:
        node, cell = prev[node][0], prev[node][1]
        path.append(cell)
    path.reverse()
    return path


def _solve_tree_flows(basis, a, b, R, C):
    """Unique flows on a spanning-tree basis matching the marginals."""
    need = {("r", i): a[i] for i in range(R)}
    need.update({("c", j): b[j] for j in range(C)})
    degree = {}
    incident = {}
    for cell in basis:
        for node in (("r", cell[0]), ("c", cell[1])):
            degree[node] = degree.get(node, 0) + 1
            incident.setdefault(node, []).append(cell)
    flows = {}
    alive = set(basis)
    leaves = [n for n, d in degree.items() if d == 1]
    while leaves:
        node = leaves.pop()
        cells = [c for c in incident[node] if c in alive]
        if not cells:
            continue
        cell = cells[0]
        q = need[node]
        flows[cell] = q
        alive.discard(cell)
        other = ("c", cell[1]) if node[0] == "r" else ("r", cell[0])
        need[other] -= q
        need[node] = 0.0
        degree[other] -= 1
        if degree[other] == 1:
            leaves.append(other)
    return flows


def solve_transport(a, b, cost, eps: float = 1e-13) -> TransportSolution:
    """Minimize sum(cost * plan) over couplings of marginals (a, b).

    ``cost`` entries must be >= 0; +inf marks forbidden cells.  Returns
    value +inf when every coupling must use a forbidden cell.
    """
    a = np.asarray(a, dtype=float).copy()
    b = np.asarray(b, dtype=float).copy()
    cost = np.asarray(cost, dtype=float)
    R, C = a.size, b.size
    if cost.shape != (R, C):
        raise ValueError("cost matrix shape mismatch")
    if (cost < 0).any():
        raise ValueError("cost entries must be >= 0")
    if abs(a.sum() - b.sum()) > 1e-9:
        raise ValueError("marginals must have equal mass")

    forbidden = np.isinf(cost)
    fin = np.where(forbidden, 0.0, cost)
    pair = np.stack([forbidden.astype(float), fin], axis=-1)
    val_tol = 1e-12 * (1.0 + float(np.abs(fin).max(initial=0.0)))

    ap = a + eps
    bp = b.copy()
    bp[-1] += R * eps
    basis, flows = _northwest_corner(ap, bp)

    pivots = 0
    while pivots < _MAX_PIVOTS:
        u, v = _potentials(basis, pair, R, C)
        in_basis = set(basis)
        entering = None
        for i in range(R):
            red = pair[i] - u[i][None, :] - v
            for j in range(C):
                if (i, j) in in_basis:
                    continue
                r0, r1 = red[j]
                if r0 < -_PEN_TOL or (abs(r0) <= _PEN_TOL and r1 < -val_tol):
                    entering = (i, j)
                    break
            if entering is not None:
                break
        if entering is None:
            break
        pivots += 1
        path = _find_cycle_path(basis, ("c", entering[1]), ("r", entering[0]), R, C)
        # Cycle: entering cell carries +theta, then alternate along the path.
        signs = {entering: +1}
        s = -1
        for cell in path:
            signs[cell] = s
            s = -s
        minus = [c for c in basis if signs.get(c) == -1]
        theta = min(flows[c] for c in minus)
        leaving = next(c for c in minus if flows[c] <= theta)
        for cell, sg in signs.items():
            if cell == entering:
                flows[cell] = theta
            else:
                flows[cell] = flows[cell] + sg * theta
        basis = [c for c in basis if c != leaving] + [entering]
        del flows[leaving]
    else:
        raise ArithmeticError("transportation simplex failed to terminate")

    # Optimality of the final basis depends only on the costs, so re-solve
    # the tree flows against the unperturbed marginals for an exact plan.
    exact = _solve_tree_flows(basis, a, b, R, C)
    plan = np.zeros((R, C))
    for (i, j), q in exact.items():
        if q < -1e-8:
            raise ArithmeticError("tree flow went negative beyond tolerance")
        plan[i, j] = max(q, 0.0)

    forbidden_mass = float(plan[forbidden].sum())
    if forbidden_mass > 1e-12:
        return TransportSolution(INF, None, None, None, pivots)
    u, v = _potentials(basis, pair, R, C)
    value = float((plan * fin).sum())
    return TransportSolution(value, plan, u[:, 1].copy(), v[:, 1].copy(), pivots)
