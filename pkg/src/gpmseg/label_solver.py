"""Video-labeling subproblem over the joint actor-action label space.

Pairwise tables are stored compactly: every table is ``coef[e, cat[a, b]]``
where ``cat`` is a shared ``L x L`` category matrix.  With the four actor /
action agreement categories this covers both the segment CRF tables and the
supervoxel group tables; arbitrary dense tables use ``cat = arange(L*L)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .energy import refine_gates, supported
from .hierarchy import path_matrix
from .maxflow import min_cut

log = logging.getLogger(__name__)

BRUTE_FORCE_MAX_STATES = 2_000_000


class NonMetricError(ValueError):
    """Raised when alpha-expansion is asked to run on a non-metric problem."""


@dataclass(frozen=True)
class EdgeSet:
    edges: np.ndarray  # E x 2, i < j
    coef: np.ndarray  # E x K

    @classmethod
    def empty(cls, k: int) -> "EdgeSet":
        return cls(np.zeros((0, 2), dtype=np.int64), np.zeros((0, k)))

    def __len__(self) -> int:
        return int(self.edges.shape[0])


def merge_edges(edges, coef) -> EdgeSet:
    """Canonicalize (i < j) and sum the coefficients of parallel edges."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    coef = np.asarray(coef, dtype=np.float64)
    if edges.shape[0] == 0:
        return EdgeSet(edges, coef.reshape(0, coef.shape[-1] if coef.ndim == 2 else 0))
    e = np.sort(edges, axis=1)
    uniq, inv = np.unique(e, axis=0, return_inverse=True)
    out = np.zeros((uniq.shape[0], coef.shape[1]))
    np.add.at(out, inv.ravel(), coef)
    return EdgeSet(uniq, out)


@dataclass(frozen=True)
class ExpansionProblem:
    """Multi-label energy: unary + pairwise tables + label-subset costs.

    ``cost_masks[c]`` marks the labels of subset ``c``; ``cost_values[c]`` is
    charged once if any node takes a label in that subset.
    """

    unary: np.ndarray  # N x L
    cat: np.ndarray  # L x L
    pairwise: EdgeSet
    group: EdgeSet
    cost_masks: np.ndarray  # C x L bool
    cost_values: np.ndarray  # C

    @property
    def n_nodes(self) -> int:
        return int(self.unary.shape[0])

    @property
    def n_labels(self) -> int:
        return int(self.unary.shape[1])

    def combined(self) -> EdgeSet:
        if len(self.group) == 0:
            return self.pairwise
        if len(self.pairwise) == 0:
            return self.group
        return merge_edges(
            np.vstack([self.pairwise.edges, self.group.edges]),
            np.vstack([self.pairwise.coef, self.group.coef]),
        )

    def table(self, coef_row) -> np.ndarray:
        return np.asarray(coef_row)[self.cat]

    def energy(self, labels) -> float:
        lab = np.asarray(labels, dtype=np.int64)
        parts = [self.unary[np.arange(lab.size), lab]]
        for es in (self.pairwise, self.group):
            if len(es):
                c = self.cat[lab[es.edges[:, 0]], lab[es.edges[:, 1]]]
                parts.append(es.coef[np.arange(len(es)), c])
        if self.cost_values.size:
            present = np.zeros(self.n_labels, dtype=bool)
            present[lab] = True
            used = (self.cost_masks & present).any(axis=1)
            parts.append(self.cost_values[used])
        return math.fsum(np.concatenate(parts))

    def energies(self, batch) -> np.ndarray:
        """Vectorized (approximate-order) energy of many labelings, shape M x N."""
        batch = np.asarray(batch, dtype=np.int64)
        out = self.unary[np.arange(self.n_nodes)[None, :], batch].sum(axis=1)
        for es in (self.pairwise, self.group):
            if len(es):
                c = self.cat[batch[:, es.edges[:, 0]], batch[:, es.edges[:, 1]]]
                out += es.coef[np.arange(len(es))[None, :], c].sum(axis=1)
        if self.cost_values.size:
            onehot = np.zeros((batch.shape[0], self.n_labels), dtype=bool)
            np.put_along_axis(onehot, batch, True, axis=1)
            used = (onehot[:, None, :] & self.cost_masks[None, :, :]).any(axis=2)
            out += used.astype(np.float64) @ self.cost_values
        return out


def dense_problem(unary, edges, tables, label_costs=()) -> ExpansionProblem:
    """Build a problem from explicit ``L x L`` tables (one per edge)."""
    unary = np.asarray(unary, dtype=np.float64)
    n_labels = unary.shape[1]
    tables = np.asarray(tables, dtype=np.float64).reshape(-1, n_labels, n_labels)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    # store i<j orientation: transpose tables of flipped edges
    flip = edges[:, 0] > edges[:, 1]
    tables = np.where(flip[:, None, None], tables.transpose(0, 2, 1), tables)
    cat = np.arange(n_labels * n_labels).reshape(n_labels, n_labels)
    es = merge_edges(edges, tables.reshape(len(edges), -1)) if len(edges) else EdgeSet.empty(n_labels * n_labels)
    masks = np.array([m for m, _ in label_costs], dtype=bool).reshape(-1, n_labels)
    vals = np.array([c for _, c in label_costs], dtype=np.float64)
    return ExpansionProblem(unary, cat, es, EdgeSet.empty(n_labels * n_labels), masks, vals)


def build_expansion_problem(inst, s, v, labeling, use_video: bool = True) -> ExpansionProblem:
    """Labeling problem for a fixed slice and video labels.

    Group agreement gates (dominant actor / action supported by ``v``) are
    frozen from ``labeling``.  Group edges whose gates are both closed carry
    zero energy and are not emitted.
    """
    tree = inst.tree
    s = np.asarray(s, dtype=np.int64)
    if s.shape != (tree.n_nodes,) or np.any((s != 0) & (s != 1)):
        raise ValueError("slice must be a 0/1 vector with one entry per tree node")
    if np.any(path_matrix(tree).dense @ s > 1):
        raise ValueError("invalid slice: overlapping active nodes")
    lab = inst.labels
    v = np.asarray(v, dtype=np.int64)
    if not use_video:
        v = np.zeros(lab.n_joint, dtype=np.int64)

    g = inst.graph
    pairwise = merge_edges(g.edges, inst.edge_coef) if len(g.edges) else EdgeSet.empty(4)

    theta = inst.params.theta_t
    g_edges, g_coef = [], []
    for t in np.flatnonzero(s):
        m = tree.members[int(t)]
        if m.size < 2 or theta == 0:
            continue
        gx, gy = refine_gates(int(t), labeling, v, inst)
        if not (gx or gy):
            continue
        iu, ju = np.triu_indices(m.size, 1)
        g_edges.append(np.stack([m[iu], m[ju]], axis=1))
        a, b = theta * gx, theta * gy
        g_coef.append(np.tile([0.0, a, b, a + b], (iu.size, 1)))
    if g_edges:
        group = merge_edges(np.vstack(g_edges), np.vstack(g_coef))
    else:
        group = EdgeSet.empty(4)

    masks, vals = [], []
    if use_video and inst.params.theta_V > 0:
        sup_x, sup_y = supported(v, inst)
        for x in range(len(lab.actors)):
            if not sup_x[x]:
                masks.append(lab.actor_of == x)
                vals.append(inst.params.theta_V)
        for y in range(len(lab.actions)):
            if not sup_y[y]:
                masks.append(lab.action_of == y)
                vals.append(inst.params.theta_V)
    masks = np.array(masks, dtype=bool).reshape(-1, lab.n_labels)
    # subsets with no valid joint label can never be paid
    keep = masks.any(axis=1)
    return ExpansionProblem(
        unary=np.array(inst.unary_matrix),
        cat=np.array(lab.category),
        pairwise=pairwise,
        group=group,
        cost_masks=masks[keep],
        cost_values=np.array(vals, dtype=np.float64)[keep],
    )


def _tol(problem: ExpansionProblem) -> float:
    scale = np.abs(problem.unary).sum()
    for es in (problem.pairwise, problem.group):
        scale += np.abs(es.coef).sum()
    scale += np.abs(problem.cost_values).sum()
    return 1e-12 * max(1.0, float(scale))


def check_submodular(problem: ExpansionProblem) -> bool:
    """True iff every pairwise table has a zero diagonal and obeys the
    triangle inequality over all label triples."""
    tol = _tol(problem)
    cat = problem.cat
    diag = np.unique(np.diag(cat))
    for es in (problem.pairwise, problem.group, problem.combined()):
        if len(es) == 0:
            continue
        rows = np.unique(es.coef, axis=0)
        if np.any(np.abs(rows[:, diag]) > tol):
            return False
        for start in range(0, rows.shape[0], 256):
            T = rows[start : start + 256][:, cat]  # U x L x L
            lhs = T[:, :, None, :]  # T(a, b) broadcast over c
            rhs = T[:, :, :, None] + T[:, None, :, :]  # T(a, c) + T(c, b)
            if np.any(lhs > rhs + tol):
                return False
    return True


def _expansion_move(problem, es, lab, alpha, tol, debug):
    n, n_labels = problem.n_nodes, problem.n_labels
    U = problem.unary
    idx = np.arange(n)
    const = 0.0
    u0 = U[idx, lab]
    u1 = U[:, alpha] - u0
    const += math.fsum(u0)

    arc_t, arc_h, arc_c = [], [], []
    if len(es):
        i, j = es.edges[:, 0], es.edges[:, 1]
        er = np.arange(len(es))
        cat = problem.cat
        A = es.coef[er, cat[lab[i], lab[j]]]
        B = es.coef[er, cat[lab[i], alpha]]
        C = es.coef[er, cat[alpha, lab[j]]]
        D = es.coef[er, cat[alpha, alpha]]
        const += math.fsum(A)
        np.add.at(u1, i, C - A)
        np.add.at(u1, j, D - C)
        w = B + C - A - D
        if np.any(w < -tol):
            raise NonMetricError("expansion move is not submodular")
        pos = w > 0
        arc_t.append(i[pos])
        arc_h.append(j[pos])
        arc_c.append(w[pos])

    src, snk = n, n + 1
    # label-subset costs: one auxiliary node each (y on sink side <=> y = 1)
    aux = []  # (tails, heads, caps) with None caps meaning "infinite"
    n_aux = 0
    for mask, cost in zip(problem.cost_masks, problem.cost_values):
        if cost <= 0:
            continue
        in_set = mask[lab]
        if mask[alpha]:
            if in_set.any():
                const += cost  # paid whatever the move does
                continue
            # paid iff some node switches to alpha: cost * y, x_i <= y
            y = n + 2 + n_aux
            aux.append(([src], [y], [cost]))
            aux.append((np.full(n, y), idx, None))
        else:
            holders = np.flatnonzero(in_set)
            if holders.size == 0:
                continue
            # paid iff some holder keeps its label: cost * (1 - y), y <= x_i
            y = n + 2 + n_aux
            aux.append(([y], [snk], [cost]))
            aux.append((holders, np.full(holders.size, y), None))
        n_aux += 1
    if n_aux:
        big = float(np.abs(u1).sum() + sum(c.sum() for c in arc_c) + problem.cost_values.sum()) + 1.0
        for a, b, c in aux:
            arc_t.append(np.asarray(a, dtype=np.int64))
            arc_h.append(np.asarray(b, dtype=np.int64))
            arc_c.append(np.full(len(a), big) if c is None else np.asarray(c, dtype=np.float64))

    neg = u1 < 0
    const += math.fsum(u1[neg])
    tails = [np.full(n, src)[~neg], idx[neg]] + arc_t
    heads = [idx[~neg], np.full(n, snk)[neg]] + arc_h
    caps = [u1[~neg], -u1[neg]] + arc_c
    flow, reach = min_cut(
        n + 2 + n_aux,
        np.concatenate(tails),
        np.concatenate(heads),
        np.concatenate(caps),
        src,
        snk,
    )
    switch = ~reach[:n]
    if not switch.any():
        return lab
    new = np.where(switch, alpha, lab)
    if debug:
        direct = problem.energy(new)
        assert abs(const + flow - direct) <= 1e-7 * max(1.0, abs(direct)), (const + flow, direct)
    return new


def alpha_expansion(problem: ExpansionProblem, init, order=None, seed=None, max_cycles: int = 100, debug: bool = False, check: bool = True):
    """Alpha-expansion with label costs.

    Labels are visited in index order (or ``order``, or a permutation drawn
    from ``seed``).  A move is kept only if it strictly lowers the full
    objective; the loop stops after a cycle with no improvement.
    """
    if check and not check_submodular(problem):
        raise NonMetricError("pairwise tables violate the triangle inequality")
    lab = np.array(init, dtype=np.int64)
    if lab.shape != (problem.n_nodes,):
        raise ValueError("initial labeling has the wrong length")
    if order is None:
        order = np.arange(problem.n_labels)
        if seed is not None:
            order = np.random.default_rng(seed).permutation(problem.n_labels)
    es = problem.combined()
    tol = _tol(problem)
    energy = problem.energy(lab)
    for _ in range(max_cycles):
        improved = False
        for alpha in order:
            cand = _expansion_move(problem, es, lab, int(alpha), tol, debug)
            if cand is lab:
                continue
            e = problem.energy(cand)
            if e < energy - tol:
                assert e < energy
                lab, energy = cand, e
                improved = True
        if not improved:
            break
    return lab


def icm(problem: ExpansionProblem, init, max_sweeps: int = 1000):
    """Iterated conditional modes: greedy single-node moves until none helps."""
    lab = np.array(init, dtype=np.int64)
    n, n_labels = problem.n_nodes, problem.n_labels
    es = problem.combined()
    tol = _tol(problem)
    nbrs = [[] for _ in range(n)]
    for e, (i, j) in enumerate(es.edges):
        nbrs[i].append((e, j, True))
        nbrs[j].append((e, i, False))
    masks = problem.cost_masks
    counts = masks[:, lab].sum(axis=1) if masks.size else np.zeros(0, dtype=np.int64)
    all_labels = np.arange(n_labels)
    for _ in range(max_sweeps):
        changed = False
        for i in range(n):
            cur = lab[i]
            local = problem.unary[i].copy()
            for e, j, first in nbrs[i]:
                c = problem.cat[all_labels, lab[j]] if first else problem.cat[lab[j], all_labels]
                local += es.coef[e, c]
            if masks.size:
                others = counts - masks[:, cur]
                paid = (others[:, None] + masks) > 0  # C x L
                local += problem.cost_values @ paid
            best = int(np.argmin(local))
            if local[best] < local[cur] - tol:
                if masks.size:
                    counts = counts - masks[:, cur] + masks[:, best]
                lab[i] = best
                changed = True
        if not changed:
            break
    return lab


def brute_force_labeling(problem: ExpansionProblem):
    """Exhaustive minimum; ties go to the lexicographically smallest labeling."""
    n, n_labels = problem.n_nodes, problem.n_labels
    total = n_labels**n
    if total > BRUTE_FORCE_MAX_STATES:
        raise ValueError(f"instance too large for enumeration: {n_labels}^{n} = {total} > {BRUTE_FORCE_MAX_STATES}")
    chunk = 1 << 15
    powers = n_labels ** np.arange(n - 1, -1, -1)

    def batches():
        for start in range(0, total, chunk):
            codes = np.arange(start, min(total, start + chunk))
            batch = (codes[:, None] // powers[None, :]) % n_labels
            yield batch, problem.energies(batch)

    lo = min(float(e.min()) for _, e in batches())
    # resolve near-ties exactly, in lexicographic order
    tol = 1e-9 * max(1.0, abs(lo))
    exact_best, winner = math.inf, None
    for batch, e in batches():
        for k in np.flatnonzero(e <= lo + tol):
            ek = problem.energy(batch[k])
            if ek < exact_best:
                exact_best, winner = ek, batch[k]
    return np.array(winner, dtype=np.int64)


def solve_labeling(problem: ExpansionProblem, init, seed=None):
    """Alpha-expansion when the problem is metric, ICM otherwise.

    Returns ``(labeling, solver_name)``.
    """
    if check_submodular(problem):
        return alpha_expansion(problem, init, seed=seed, check=False), "alpha_expansion"
    log.warning("non-metric pairwise tables; falling back to ICM")
    return icm(problem, init), "icm"
