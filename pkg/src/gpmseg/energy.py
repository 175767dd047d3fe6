"""Pure evaluators for every term of the actor-action grouping energy.

A labeling is an int array of joint-label indices (background = ``|Z|``); a
slice is a 0/1 array over tree nodes; video labels are a 0/1 array over the
joint labels.  All solvers are checked against these functions.
"""

from __future__ import annotations

import math

import numpy as np

from .instance import Instance


def entropy(labels) -> float:
    """Natural-log entropy of the label frequencies in ``labels``."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return 0.0
    counts = np.unique(labels, return_counts=True)[1]
    if counts.size == 1:
        return 0.0
    p = counts / labels.size
    return math.fsum(-p * np.log(p))


def segment_crf_energy(L, inst: Instance) -> float:
    L = np.asarray(L, dtype=np.int64)
    unary = inst.unary_matrix[np.arange(L.size), L]
    e = inst.graph.edges
    if e.size == 0:
        return math.fsum(unary)
    cat = inst.labels.category[L[e[:, 0]], L[e[:, 1]]]
    pair = inst.edge_coef[np.arange(len(e)), cat]
    return math.fsum(unary) + math.fsum(pair)


def supported(v, inst: Instance) -> tuple[np.ndarray, np.ndarray]:
    """Boolean masks of actors and actions backed by an active video label."""
    lab = inst.labels
    v = np.asarray(v, dtype=bool)
    actors = np.zeros(len(lab.actors), dtype=bool)
    actions = np.zeros(len(lab.actions), dtype=bool)
    actors[lab.actor_of[:-1][v]] = True
    actions[lab.action_of[:-1][v]] = True
    return actors, actions


def video_unary_energy(v, inst: Instance) -> float:
    p = inst.params
    v = np.asarray(v, dtype=np.float64)
    return math.fsum(-(inst.unaries.video_response - p.theta_T) * p.theta_B * v)


def label_cost_energy(L, v, inst: Instance) -> float:
    """Label-cost interaction: theta_V per actor/action present but unsupported."""
    lab = inst.labels
    L = np.asarray(L, dtype=np.int64)
    sup_x, sup_y = supported(v, inst)
    ax = lab.actor_of[L]
    ay = lab.action_of[L]
    present_x = np.unique(ax[ax >= 0])
    present_y = np.unique(ay[ay >= 0])
    n = int((~sup_x[present_x]).sum() + (~sup_y[present_y]).sum())
    return n * inst.params.theta_V


def video_level_energy(L, v, inst: Instance) -> float:
    return video_unary_energy(v, inst) + label_cost_energy(L, v, inst)


def grouping_energy(t: int, L, s_t, inst: Instance) -> float:
    if not s_t:
        return 0.0
    L = np.asarray(L, dtype=np.int64)
    m = inst.tree.members[t]
    return entropy(L[m]) * float(inst.tree.size[t]) + inst.params.theta_h


def slice_penalty(s, pm, inst: Instance) -> float:
    s = np.asarray(s, dtype=np.int64)
    bad = int(np.count_nonzero(pm.dense @ s != 1))
    return bad * inst.params.theta_tau


def _dominant(values, n_values: int) -> int:
    # null (-1) is counted as value n_values so real labels win ties
    v = np.where(values < 0, n_values, values)
    return int(np.argmax(np.bincount(v, minlength=n_values + 1)))


def _disagreeing_pairs(values) -> int:
    n = values.size
    counts = np.unique(values, return_counts=True)[1]
    return (n * (n - 1) - int((counts * (counts - 1)).sum())) // 2


def refine_gates(t: int, L, v, inst: Instance) -> tuple[bool, bool]:
    """Whether actor and action agreement is enforced inside node ``t``.

    A gate is open when the dominant actor (action) among the node's members
    is the projection of some active video label.
    """
    lab = inst.labels
    L = np.asarray(L, dtype=np.int64)
    m = inst.tree.members[t]
    sup_x, sup_y = supported(v, inst)
    fx = _dominant(lab.actor_of[L[m]], len(lab.actors))
    fy = _dominant(lab.action_of[L[m]], len(lab.actions))
    gate_x = fx < len(lab.actors) and bool(sup_x[fx])
    gate_y = fy < len(lab.actions) and bool(sup_y[fy])
    return gate_x, gate_y


def gpm_refine_energy(t: int, L, v, s_t, inst: Instance, gates=None) -> float:
    """Gated fully-connected Potts energy inside an active node.

    ``gates`` overrides the (actor, action) gates; by default they are
    derived from ``L`` itself.
    """
    if not s_t:
        return 0.0
    lab = inst.labels
    L = np.asarray(L, dtype=np.int64)
    m = inst.tree.members[t]
    gate_x, gate_y = refine_gates(t, L, v, inst) if gates is None else gates
    e = 0
    if gate_x:
        e += _disagreeing_pairs(lab.actor_of[L[m]])
    if gate_y:
        e += _disagreeing_pairs(lab.action_of[L[m]])
    return e * inst.params.theta_t


def labeling_objective(L, s, v, inst: Instance, gates=None, use_video: bool = True) -> float:
    """Labeling-step objective for a fixed slice: segment CRF + refinement
    (+ label costs when video evidence is used)."""
    s = np.asarray(s)
    e = segment_crf_energy(L, inst)
    if use_video:
        e += label_cost_energy(L, v, inst)
    for t in np.flatnonzero(s):
        g = None if gates is None else gates[t]
        e += gpm_refine_energy(int(t), L, v, 1, inst, gates=g)
    return e


def total_energy(L, s, v, inst: Instance, use_video: bool = True) -> float:
    s = np.asarray(s, dtype=np.int64)
    e = segment_crf_energy(L, inst)
    if use_video:
        e += video_level_energy(L, v, inst)
    e += slice_penalty(s, inst.paths, inst)
    for t in np.flatnonzero(s):
        e += gpm_refine_energy(int(t), L, v, 1, inst) + grouping_energy(int(t), L, 1, inst)
    return e
