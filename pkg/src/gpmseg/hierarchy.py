"""Supervoxel tree: construction from flat segmentations, paths and membership."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class SupervoxelTree:
    """Rooted tree over supervoxels.

    Nodes are indexed ``0..n_nodes-1``.  ``parent[root] == -1``.  ``members[t]``
    holds the sorted segment indices covered by node ``t``; ``size[t]`` is its
    voxel count and ``level[t]`` its hierarchy level (0 = finest).
    """

    parent: np.ndarray
    members: tuple
    size: np.ndarray
    level: np.ndarray

    def __post_init__(self):
        parent = np.asarray(self.parent, dtype=np.int64)
        members = tuple(np.asarray(m, dtype=np.int64) for m in self.members)
        size = np.asarray(self.size, dtype=np.int64)
        level = np.asarray(self.level, dtype=np.int64)
        for arr in (parent, size, level, *members):
            arr.flags.writeable = False
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "level", level)

    @property
    def n_nodes(self) -> int:
        return int(self.parent.size)

    @cached_property
    def children(self) -> tuple:
        kids = [[] for _ in range(self.n_nodes)]
        for t, p in enumerate(self.parent):
            if p >= 0:
                kids[p].append(t)
        return tuple(tuple(k) for k in kids)

    @cached_property
    def root(self) -> int:
        roots = np.flatnonzero(self.parent < 0)
        if roots.size != 1:
            raise ValueError(f"tree must have exactly one root, found {roots.size}")
        return int(roots[0])

    @cached_property
    def leaves(self) -> np.ndarray:
        return np.array([t for t in range(self.n_nodes) if not self.children[t]], dtype=np.int64)

    @cached_property
    def postorder(self) -> np.ndarray:
        """Node order with every child before its parent."""
        out = []
        stack = [(self.root, False)]
        while stack:
            t, done = stack.pop()
            if done:
                out.append(t)
                continue
            stack.append((t, True))
            for c in reversed(self.children[t]):
                stack.append((c, False))
        return np.array(out, dtype=np.int64)


@dataclass(frozen=True)
class PathMatrix:
    """Root-to-leaf paths, one per leaf in ascending leaf order."""

    paths: tuple
    dense: np.ndarray = field(repr=False)

    @property
    def n_leaves(self) -> int:
        return len(self.paths)


def tree_violations(tree: SupervoxelTree, segment_sizes=None) -> list[str]:
    """List every broken structural invariant of ``tree`` (empty if valid)."""
    out = []
    n = tree.n_nodes
    if n == 0:
        return ["tree has no nodes"]
    if len(tree.members) != n or tree.size.size != n or tree.level.size != n:
        return ["tree arrays have inconsistent lengths"]
    roots = np.flatnonzero(tree.parent < 0)
    if roots.size != 1:
        return [f"tree must have exactly one root, found {roots.size}"]
    if np.any(tree.parent >= n):
        return ["parent index out of range"]
    # cycle / reachability check
    seen = np.zeros(n, dtype=bool)
    stack = [int(roots[0])]
    kids = [[] for _ in range(n)]
    for t, p in enumerate(tree.parent):
        if p >= 0:
            kids[p].append(t)
    while stack:
        t = stack.pop()
        if seen[t]:
            return ["parent links contain a cycle"]
        seen[t] = True
        stack.extend(kids[t])
    if not seen.all():
        return ["parent links do not form a single rooted tree"]
    for t in range(n):
        m = tree.members[t]
        if kids[t]:
            union = np.unique(np.concatenate([tree.members[c] for c in kids[t]]))
            if not np.array_equal(np.unique(m), union):
                out.append(f"node {t}: members differ from union of children")
        elif m.size == 0:
            out.append(f"leaf {t} has no members")
        if segment_sizes is not None and m.size:
            if m.min() < 0 or m.max() >= len(segment_sizes):
                out.append(f"node {t}: member index out of range")
            elif int(tree.size[t]) != int(np.sum(np.asarray(segment_sizes)[m])):
                out.append(f"node {t}: size {int(tree.size[t])} != sum of member segment sizes")
    return out


def build_tree(levels, segment_sizes=None) -> SupervoxelTree:
    """Extract a supervoxel tree from flat segmentations.

    ``levels`` is a sequence of per-segment supervoxel id arrays.  Levels are
    ordered fine to coarse by descending supervoxel count (stable, so equal
    counts keep input order).  Every supervoxel of a finer level takes as
    parent the coarser supervoxel it overlaps most by voxel size, ties going to
    the lowest coarse id.  Coarse supervoxels that receive no child are dropped.
    A virtual root is appended when more than one node remains at the top.
    """
    if len(levels) == 0:
        raise ValueError("need at least one segmentation level")
    maps = [np.asarray(lv, dtype=np.int64) for lv in levels]
    n_seg = maps[0].size
    for k, m in enumerate(maps):
        if m.ndim != 1 or m.size != n_seg:
            raise ValueError(f"level {k}: expected {n_seg} segment entries")
        if m.size == 0:
            raise ValueError(f"level {k} has zero supervoxels")
        if m.min() < 0:
            raise ValueError(f"level {k}: supervoxel ids must be non-negative")
    sizes = np.ones(n_seg, dtype=np.int64) if segment_sizes is None else np.asarray(segment_sizes, dtype=np.int64)
    if sizes.size != n_seg:
        raise ValueError("segment_sizes length does not match levels")

    counts = [np.unique(m).size for m in maps]
    order = sorted(range(len(maps)), key=lambda k: -counts[k])
    maps = [maps[k] for k in order]

    # per level: kept supervoxel ids (ascending) and their members
    ids0 = np.unique(maps[0])
    level_ids = [ids0]
    level_members = [[np.flatnonzero(maps[0] == sv) for sv in ids0]]
    level_parent_ids = []

    for k in range(1, len(maps)):
        fine, coarse = maps[k - 1], maps[k]
        kept_fine = level_ids[-1]
        parent_of = {}
        for sv in kept_fine:
            sel = fine == sv
            cand, inv = np.unique(coarse[sel], return_inverse=True)
            overlap = np.bincount(inv, weights=sizes[sel])
            parent_of[int(sv)] = int(cand[np.argmax(overlap)])  # argmax: first = lowest id
        level_parent_ids.append(parent_of)
        coarse_ids = np.array(sorted(set(parent_of.values())), dtype=np.int64)
        fine_members = dict(zip((int(s) for s in kept_fine), level_members[-1]))
        members = []
        for cv in coarse_ids:
            kids = [fine_members[f] for f, p in parent_of.items() if p == cv]
            members.append(np.unique(np.concatenate(kids)))
        level_ids.append(coarse_ids)
        level_members.append(members)

    # flatten, finest level first
    index = {}
    parent, members, level = [], [], []
    for k, ids in enumerate(level_ids):
        for sv, mem in zip(ids, level_members[k]):
            index[(k, int(sv))] = len(parent)
            parent.append(-1)
            members.append(mem)
            level.append(k)
    for k, parent_of in enumerate(level_parent_ids):
        for f, p in parent_of.items():
            parent[index[(k, f)]] = index[(k + 1, p)]

    top = [i for i, p in enumerate(parent) if p < 0]
    if len(top) > 1:
        root = len(parent)
        for t in top:
            parent[t] = root
        parent.append(-1)
        members.append(np.arange(n_seg, dtype=np.int64))
        level.append(len(level_ids))

    size = [int(sizes[m].sum()) for m in members]
    return SupervoxelTree(parent=np.array(parent), members=tuple(members), size=np.array(size), level=np.array(level))


def path_matrix(tree: SupervoxelTree) -> PathMatrix:
    paths = []
    for leaf in tree.leaves:
        row = []
        t = int(leaf)
        while t >= 0:
            row.append(t)
            t = int(tree.parent[t])
        paths.append(np.array(sorted(row), dtype=np.int64))
    dense = np.zeros((len(paths), tree.n_nodes), dtype=np.int64)
    for p, row in enumerate(paths):
        dense[p, row] = 1
    dense.flags.writeable = False
    return PathMatrix(paths=tuple(paths), dense=dense)


def members_of(tree: SupervoxelTree, t: int) -> np.ndarray:
    if not 0 <= t < tree.n_nodes:
        raise IndexError(f"node {t} out of range [0, {tree.n_nodes})")
    return tree.members[t]


def read_level_table(path) -> np.ndarray:
    """Read a ``segment_id supervoxel_id`` table into a per-segment id array."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'segment_id supervoxel_id'")
        rows.append((int(parts[0]), int(parts[1])))
    if not rows:
        raise ValueError(f"{path}: empty segmentation table")
    rows.sort()
    seg = [r[0] for r in rows]
    if seg != list(range(len(seg))):
        raise ValueError(f"{path}: segment ids must be exactly 0..N-1")
    return np.array([r[1] for r in rows], dtype=np.int64)


def write_level_table(path, level) -> None:
    lines = [f"{i} {int(sv)}" for i, sv in enumerate(level)]
    Path(path).write_text("\n".join(lines) + "\n")
