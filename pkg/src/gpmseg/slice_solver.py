"""Tree-slice subproblem: pick one active node per root-to-leaf path.

The binary program ``min sum(alpha * s) s.t. P s = 1`` is solved exactly by
dynamic programming over the tree; a brute-force enumerator and an LP-format
exporter exist for cross-checking.
"""

from __future__ import annotations

import math

import numpy as np

from .energy import entropy
from .hierarchy import PathMatrix, SupervoxelTree, path_matrix

BRUTE_FORCE_MAX_NODES = 22


def slice_costs(L, inst) -> np.ndarray:
    """alpha_t = entropy(L_t) * |s_t| + theta_h for every node."""
    L = np.asarray(L, dtype=np.int64)
    tree = inst.tree
    alpha = np.array([entropy(L[m]) * float(sz) for m, sz in zip(tree.members, tree.size)])
    return alpha + inst.params.theta_h


def slice_objective(s, costs) -> float:
    s = np.asarray(s, dtype=bool)
    return math.fsum(np.asarray(costs, dtype=np.float64)[s])


def is_valid_slice(s, pm: PathMatrix) -> bool:
    s = np.asarray(s, dtype=np.int64)
    if s.size != pm.dense.shape[1]:
        return False
    return bool(np.all(pm.dense @ s == 1))


def solve_slice_dp(tree: SupervoxelTree, costs) -> np.ndarray:
    """Exact minimum-cost slice.

    best(t) = min(alpha_t, sum of best(c) over children); a node is preferred
    over its children on ties.  Subtree values are exact sums (``math.fsum``)
    of the selected costs so the result is comparable bit-for-bit with
    enumeration.
    """
    costs = np.asarray(costs, dtype=np.float64)
    if costs.shape != (tree.n_nodes,):
        raise ValueError("costs must have one entry per tree node")
    if not np.all(np.isfinite(costs)):
        raise ValueError("slice costs must be finite")
    chosen = {}
    value = {}
    for t in tree.postorder:
        t = int(t)
        kids = tree.children[t]
        if kids:
            sel = [x for c in kids for x in chosen[c]]
            below = math.fsum(costs[sel])
            if costs[t] <= below:
                chosen[t], value[t] = [t], float(costs[t])
            else:
                chosen[t], value[t] = sel, below
            for c in kids:
                del chosen[c]
        else:
            chosen[t], value[t] = [t], float(costs[t])
    s = np.zeros(tree.n_nodes, dtype=np.int64)
    s[chosen[tree.root]] = 1
    return s


def brute_force_slice(tree: SupervoxelTree, costs) -> np.ndarray:
    """Enumerate all activation vectors; lexicographically smallest optimum wins."""
    n = tree.n_nodes
    if n > BRUTE_FORCE_MAX_NODES:
        raise ValueError(f"tree too large for enumeration: {n} nodes > {BRUTE_FORCE_MAX_NODES}")
    costs = np.asarray(costs, dtype=np.float64)
    pm = path_matrix(tree)
    masks = np.arange(1 << n, dtype=np.int64)
    ok = np.ones(masks.size, dtype=bool)
    for row in pm.paths:
        pmask = int(sum(1 << int(t) for t in row))
        hits = masks & pmask
        # exactly one bit set: nonzero and a power of two
        ok &= (hits != 0) & ((hits & (hits - 1)) == 0)
    valid = masks[ok]
    bits = ((valid[:, None] >> np.arange(n)) & 1).astype(np.int64)
    approx = bits @ costs
    lo = approx.min()
    # exact re-check of near-optimal candidates
    tol = 1e-9 * max(1.0, float(np.abs(costs).sum()))
    cand = bits[approx <= lo + tol]
    best = None
    for row in cand:
        key = (slice_objective(row, costs), tuple(int(b) for b in row))
        if best is None or key < best:
            best = key
    return np.array(best[1], dtype=np.int64)


def _fmt(x: float) -> str:
    return repr(float(x))


def export_blp(tree: SupervoxelTree, costs) -> str:
    """CPLEX-LP text of the slice program; variable ``s<t>`` is node ``t``."""
    costs = np.asarray(costs, dtype=np.float64)
    pm = path_matrix(tree)
    terms = []
    for t, c in enumerate(costs):
        sign = "-" if c < 0 else "+"
        terms.append(f"{sign} {_fmt(abs(c))} s{t}")
    obj = " ".join(terms)
    if obj.startswith("+ "):
        obj = obj[2:]
    lines = ["\\ tree slice program: one active node per root-to-leaf path", "Minimize", f" obj: {obj}", "Subject To"]
    for p, row in enumerate(pm.paths):
        lines.append(f" path{p}: " + " + ".join(f"s{int(t)}" for t in row) + " = 1")
    lines.append("Binary")
    lines.append(" " + " ".join(f"s{t}" for t in range(tree.n_nodes)))
    lines.append("End")
    return "\n".join(lines) + "\n"
