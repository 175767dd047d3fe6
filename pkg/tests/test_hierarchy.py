import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpmseg.hierarchy import (
    build_tree,
    members_of,
    path_matrix,
    read_level_table,
    tree_violations,
    write_level_table,
)

from _util import random_tree, single_node_tree, tree_from_parents


def _node(tree, level, members):
    for t in range(tree.n_nodes):
        if tree.level[t] == level and tree.members[t].tolist() == sorted(members):
            return t
    raise AssertionError(f"no level-{level} node with members {members}")


def test_nested_levels_parent_is_container():
    fine = [0, 0, 1, 1, 2, 2]
    coarse = [0, 0, 0, 0, 1, 1]
    tree = build_tree([fine, coarse])
    assert tree_violations(tree) == []
    for fine_m, coarse_m in (([0, 1], [0, 1, 2, 3]), ([2, 3], [0, 1, 2, 3]), ([4, 5], [4, 5])):
        assert tree.parent[_node(tree, 0, fine_m)] == _node(tree, 1, coarse_m)


def test_virtual_root_over_three_coarse_nodes():
    tree = build_tree([[0, 1, 2, 3, 4, 5], [0, 0, 1, 1, 2, 2]])
    root = tree.root
    assert tree.parent[root] == -1
    assert len(tree.children[root]) == 3
    assert tree.members[root].tolist() == list(range(6))
    assert tree.level[root] == 2


def test_parent_follows_voxel_overlap_not_segment_count():
    # fine node A = segments 0..4 with voxel sizes 6,1,1,1,1.  Coarse node 1 holds
    # segment 0 (6 voxels, 60% of A); coarse node 0 holds segments 1..9 (40% of A).
    sizes = [6, 1, 1, 1, 1, 2, 2, 2, 2, 2]
    fine = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1]
    coarse = [1, 0, 0, 0, 0, 0, 0, 0, 0, 0]
    tree = build_tree([fine, coarse], sizes)
    a = _node(tree, 0, [0, 1, 2, 3, 4])
    assert tree.members[tree.parent[a]].tolist() == [0, 1, 2, 3, 4]
    assert tree.size[tree.parent[a]] == 10
    b = _node(tree, 0, [5, 6, 7, 8, 9])
    assert tree.members[tree.parent[b]].tolist() == [5, 6, 7, 8, 9]
    assert tree_violations(tree, sizes) == []


def test_overlap_tie_goes_to_lowest_coarse_id():
    # fine node {0, 1} overlaps coarse 1 (segment 0) and coarse 0 (segment 1) equally;
    # choosing coarse 0 leaves coarse 1 childless, so it is dropped
    tree = build_tree([[0, 0, 1], [1, 0, 0]])
    assert tree.n_nodes == 3
    fine = _node(tree, 0, [0, 1])
    assert tree.parent[fine] == tree.root
    assert tree.members[tree.root].tolist() == [0, 1, 2]


def test_level_order_is_by_supervoxel_count():
    fine = [0, 1, 2, 3]
    coarse = [0, 0, 1, 1]
    a = build_tree([fine, coarse])
    b = build_tree([coarse, fine])
    assert a.parent.tolist() == b.parent.tolist()
    assert [m.tolist() for m in a.members] == [m.tolist() for m in b.members]


def test_build_tree_rejects_bad_levels():
    with pytest.raises(ValueError):
        build_tree([])
    with pytest.raises(ValueError):
        build_tree([[0, 1], [0]])
    with pytest.raises(ValueError):
        build_tree([[0, -1]])


def test_path_matrix_small_cases():
    pm = path_matrix(single_node_tree())
    assert [p.tolist() for p in pm.paths] == [[0]]

    two = tree_from_parents([-1, 0, 0], {1: [0], 2: [1]})
    assert sorted(p.tolist() for p in path_matrix(two).paths) == [[0, 1], [0, 2]]

    chain = tree_from_parents([-1, 0, 1], {2: [0]})
    assert [p.tolist() for p in path_matrix(chain).paths] == [[0, 1, 2]]


def test_members_of():
    tree = tree_from_parents([-1, 0, 1, 1, 0], {2: [0, 1], 3: [2], 4: [3]})
    assert members_of(tree, 2).tolist() == [0, 1]
    assert members_of(tree, 1).tolist() == [0, 1, 2]
    assert members_of(tree, 0).tolist() == [0, 1, 2, 3]
    with pytest.raises(IndexError):
        members_of(tree, 5)


def test_tree_violations_reports_problems():
    good = tree_from_parents([-1, 0, 0], {1: [0], 2: [1]})
    assert tree_violations(good) == []
    two_roots = type(good)(parent=[-1, -1], members=([0], [1]), size=[1, 1], level=[0, 0])
    assert "exactly one root" in tree_violations(two_roots)[0]
    bad_union = type(good)(parent=[-1, 0], members=([0, 1], [0]), size=[2, 1], level=[1, 0])
    assert any("union of children" in m for m in tree_violations(bad_union))
    bad_size = type(good)(parent=[-1, 0, 0], members=([0, 1], [0], [1]), size=[5, 1, 1], level=[1, 0, 0])
    assert any("size" in m for m in tree_violations(bad_size, [1, 1]))


def test_level_table_round_trip(tmp_path):
    p = tmp_path / "lv.txt"
    write_level_table(p, [3, 3, 1, 0])
    assert read_level_table(p).tolist() == [3, 3, 1, 0]
    p.write_text("0 1\n2 1\n")
    with pytest.raises(ValueError, match="0..N-1"):
        read_level_table(p)


level_lists = st.integers(2, 12).flatmap(
    lambda n: st.lists(st.lists(st.integers(0, 4), min_size=n, max_size=n), min_size=1, max_size=4)
)


@settings(max_examples=150, deadline=None)
@given(levels=level_lists, data=st.data())
def test_built_trees_satisfy_invariants(levels, data):
    n = len(levels[0])
    sizes = data.draw(st.lists(st.integers(1, 9), min_size=n, max_size=n))
    tree = build_tree(levels, sizes)
    assert tree_violations(tree, sizes) == []
    leaves = np.concatenate([tree.members[t] for t in tree.leaves])
    assert sorted(leaves.tolist()) == list(range(n))
    assert tree.members[tree.root].tolist() == list(range(n))
    pm = path_matrix(tree)
    # every leaf-to-root path: one row per leaf, each containing the root
    assert pm.dense.shape == (tree.leaves.size, tree.n_nodes)
    assert np.all(pm.dense[:, tree.root] == 1)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 30), st.integers(0, 10_000))
def test_every_node_lies_on_some_path(n, seed):
    tree = random_tree(np.random.default_rng(seed), n)
    pm = path_matrix(tree)
    assert np.all(pm.dense.sum(axis=0) >= 1)
    # children's members partition their parent's
    for t in range(tree.n_nodes):
        kids = tree.children[t]
        if kids:
            joined = sorted(np.concatenate([tree.members[c] for c in kids]).tolist())
            assert joined == tree.members[t].tolist()


@settings(max_examples=100, deadline=None)
@given(level_lists)
def test_segments_nest_along_paths(levels):
    tree = build_tree(levels)
    pm = path_matrix(tree)
    for row in pm.paths:
        leaf = [t for t in row if not tree.children[t]][0]
        for seg in tree.members[leaf]:
            holders = [t for t in row if seg in tree.members[t]]
            assert sorted(holders) == sorted(row.tolist())
