"""Planted-truth synthetic instances: moving boxes on a voxel grid.

Geometry
    The video is a ``width x height x frames`` voxel grid cut into cubic
    segments of edge ``segment_block``.  Each planted object is an
    axis-aligned box that moves with a constant velocity and bounces off the
    frame border; later objects occlude earlier ones.  A segment's owner is
    the majority owner of its voxels (background wins ties) and its true label
    is the owner's joint label.

Contrast
    Edges join 6-connected segments.  ``w_ij = 1`` when both segments share an
    owner and ``w_ij = boundary_weight`` (default 0.5) across an owner boundary.

Unaries
    The joint table holds 0 for the true label and 1 for every other label,
    plus Gaussian noise of std ``unary_noise``.  Actor and action tables are
    zero.  Video responses are ``1 + noise`` for planted labels and
    ``0 + noise`` otherwise.

Hierarchy
    Level ``k`` groups segments into cells of ``2**(k+1)`` segments per axis
    (space and time), split by owner, then :func:`build_tree` links levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .hierarchy import build_tree
from .instance import Instance, LabelSpace, Params, SegmentGraph, UnaryTables, validate_instance

DEFAULT_LABELS = LabelSpace(
    actors=("adult", "dog", "car"),
    actions=("walking", "running", "rolling"),
    joint=((0, 0), (0, 1), (1, 0), (1, 1), (1, 2), (2, 1), (2, 2)),
)

MIN_BOX_BLOCKS = 3


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class SynthConfig:
    grid: tuple = (32, 32, 16)  # width, height, frames (voxels)
    n_actors_present: int = 2
    label_space: LabelSpace = DEFAULT_LABELS
    segment_block: int = 4
    tree_levels: int = 3
    unary_noise: float = 0.0
    response_noise: float = 0.0
    seed: int = 0
    boundary_weight: float = 0.5
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(int(g) for g in self.grid))

    def check(self) -> None:
        if len(self.grid) != 3 or min(self.grid) < 1:
            raise ConfigError("grid", "expected three positive dimensions (width, height, frames)")
        b = self.segment_block
        if b < 1:
            raise ConfigError("segment_block", "must be >= 1")
        if any(g % b for g in self.grid):
            raise ConfigError("grid", f"dimensions {self.grid} not divisible by segment_block {b}")
        if self.tree_levels < 1:
            raise ConfigError("tree_levels", "must be >= 1")
        if self.unary_noise < 0:
            raise ConfigError("unary_noise", "must be >= 0")
        if self.response_noise < 0:
            raise ConfigError("response_noise", "must be >= 0")
        if self.n_actors_present < 0:
            raise ConfigError("n_actors_present", "must be >= 0")
        if self.n_actors_present > self.label_space.n_joint:
            raise ConfigError("n_actors_present", f"cannot plant {self.n_actors_present} distinct labels from {self.label_space.n_joint}")
        if self.n_actors_present and min(self.grid[0], self.grid[1]) < MIN_BOX_BLOCKS * b:
            raise ConfigError("grid", f"objects of at least {MIN_BOX_BLOCKS} blocks cannot fit")
        unknown = set(self.params) - {f.name for f in fields(Params)}
        if unknown:
            raise ConfigError("params", f"unknown parameter(s) {sorted(unknown)}")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown config field")
        if "label_space" in d:
            ls = d["label_space"]
            d["label_space"] = LabelSpace(ls["actors"], ls["actions"], ls["joint"], ls.get("background", "background"))
        return cls(**d)

    def to_dict(self) -> dict:
        ls = self.label_space
        return {
            "grid": list(self.grid),
            "n_actors_present": self.n_actors_present,
            "label_space": {"actors": list(ls.actors), "actions": list(ls.actions), "joint": [list(j) for j in ls.joint], "background": ls.background},
            "segment_block": self.segment_block,
            "tree_levels": self.tree_levels,
            "unary_noise": self.unary_noise,
            "response_noise": self.response_noise,
            "seed": self.seed,
            "boundary_weight": self.boundary_weight,
            "params": dict(self.params),
        }


def _bounce(x0: int, v: int, span: int, n_frames: int) -> np.ndarray:
    f = np.arange(n_frames)
    if span <= 0:
        return np.zeros(n_frames, dtype=np.int64)
    period = 2 * span
    p = np.mod(x0 + v * f, period)
    return np.where(p <= span, p, period - p).astype(np.int64)


def _owner_volume(cfg: SynthConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    W, H, F = cfg.grid
    b = cfg.segment_block
    n_obj = cfg.n_actors_present
    labels = rng.choice(cfg.label_space.n_joint, size=n_obj, replace=False) if n_obj else np.zeros(0, dtype=np.int64)
    owner = np.full((F, H, W), -1, dtype=np.int64)
    lo = MIN_BOX_BLOCKS * b
    for k in range(n_obj):
        bw = int(rng.integers(lo, max(lo, W // 2) + 1))
        bh = int(rng.integers(lo, max(lo, H // 2) + 1))
        x0 = int(rng.integers(0, W - bw + 1))
        y0 = int(rng.integers(0, H - bh + 1))
        vx, vy = (int(v) for v in rng.integers(-1, 2, size=2))
        xs = _bounce(x0, vx, W - bw, F)
        ys = _bounce(y0, vy, H - bh, F)
        for f in range(F):
            owner[f, ys[f] : ys[f] + bh, xs[f] : xs[f] + bw] = k
    return owner, np.asarray(labels, dtype=np.int64)


def generate(cfg: SynthConfig) -> tuple[Instance, np.ndarray]:
    """Build a planted-truth instance; returns ``(instance, truth labeling)``."""
    cfg.check()
    rng = np.random.default_rng(cfg.seed)
    lab = cfg.label_space
    W, H, F = cfg.grid
    b = cfg.segment_block
    gx, gy, gt = W // b, H // b, F // b
    n = gx * gy * gt
    n_obj = cfg.n_actors_present

    owner, obj_labels = _owner_volume(cfg, rng)
    blocks = owner.reshape(gt, b, gy, b, gx, b)
    counts = np.stack([(blocks == k).sum(axis=(1, 3, 5)) for k in range(-1, n_obj)], axis=-1)
    seg_owner = (np.argmax(counts, axis=-1) - 1).reshape(-1)  # background first, so it wins ties
    truth = np.where(seg_owner >= 0, obj_labels[np.maximum(seg_owner, 0)] if n_obj else 0, lab.bg).astype(np.int64)

    ids = np.arange(n).reshape(gt, gy, gx)
    pairs = [
        (ids[:, :, :-1].ravel(), ids[:, :, 1:].ravel()),
        (ids[:, :-1, :].ravel(), ids[:, 1:, :].ravel()),
        (ids[:-1, :, :].ravel(), ids[1:, :, :].ravel()),
    ]
    ei = np.concatenate([p[0] for p in pairs])
    ej = np.concatenate([p[1] for p in pairs])
    order = np.lexsort((ej, ei))
    edges = np.stack([ei[order], ej[order]], axis=1)
    weights = np.where(seg_owner[edges[:, 0]] == seg_owner[edges[:, 1]], 1.0, cfg.boundary_weight)

    layout = {"scale": b, "frames": [ids[f // b] for f in range(F)]}
    graph = SegmentGraph(
        n_segments=n,
        edges=edges,
        weights=weights,
        segment_sizes=np.full(n, b**3),
        frame_of=np.repeat(np.arange(gt) * b, gx * gy),
        layout=layout,
    )

    joint = 1.0 - np.eye(lab.n_labels)[truth]
    if cfg.unary_noise > 0:
        joint = joint + rng.normal(0.0, cfg.unary_noise, size=joint.shape)
    present = np.zeros(lab.n_joint)
    present[obj_labels] = 1.0
    response = present.copy()
    if cfg.response_noise > 0:
        response = response + rng.normal(0.0, cfg.response_noise, size=response.shape)
    unaries = UnaryTables(
        actor=np.zeros((n, len(lab.actors))),
        action=np.zeros((n, len(lab.actions))),
        joint=joint,
        video_response=response,
    )

    tt, yy, xx = np.meshgrid(np.arange(gt), np.arange(gy), np.arange(gx), indexing="ij")
    tt, yy, xx = tt.ravel(), yy.ravel(), xx.ravel()
    levels = []
    for k in range(cfg.tree_levels):
        f = 2 ** (k + 1)
        ncx, ncy = -(-gx // f), -(-gy // f)
        cell = ((tt // f) * ncy + yy // f) * ncx + xx // f
        levels.append(cell * (n_obj + 1) + (seg_owner + 1))
    tree = build_tree(levels, graph.segment_sizes)

    params = Params(**cfg.params)
    bound = 10 * unaries.abs_sum()
    if "theta_tau" not in cfg.params or params.theta_tau < bound:
        params = params.replace(theta_tau=float(math.ceil(bound)) + 1000.0)
    inst = Instance(labels=lab, graph=graph, unaries=unaries, tree=tree, params=params)
    problems = validate_instance(inst)
    if problems:  # pragma: no cover - generator invariant
        raise RuntimeError("generator produced an invalid instance: " + "; ".join(problems))
    return inst, truth


def corrupt(inst: Instance, truth, flip_fraction: float, seed) -> Instance:
    """Move the unary argmin of a random ``flip_fraction`` of segments to a
    random wrong label.

    For each chosen segment a wrong label ``w`` is drawn uniformly; the
    combined unary values of the current argmin and ``w`` are swapped by
    editing the joint table, so ``w`` becomes the argmin.
    """
    if not 0.0 <= flip_fraction <= 1.0:
        raise ValueError("flip_fraction must lie in [0, 1]")
    truth = np.asarray(truth, dtype=np.int64)
    n = inst.n_segments
    k = int(round(flip_fraction * n))
    if k == 0:
        return inst
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(n, size=k, replace=False))
    n_labels = inst.labels.n_labels
    U = inst.unary_matrix
    joint = np.array(inst.unaries.joint)
    for i in chosen:
        wrong = [lbl for lbl in range(n_labels) if lbl != truth[i]]
        w = wrong[int(rng.integers(len(wrong)))]
        a = int(np.argmin(U[i]))
        if a == w:
            continue
        delta = U[i, w] - U[i, a]
        joint[i, a] += delta
        joint[i, w] -= delta
    unaries = UnaryTables(inst.unaries.actor, inst.unaries.action, joint, inst.unaries.video_response)
    params = inst.params
    bound = 10 * unaries.abs_sum()
    if params.theta_tau < bound:
        params = params.replace(theta_tau=float(math.ceil(bound)) + 1000.0)
    return inst.replace(unaries=unaries, params=params)


SUITE_SEEDS = 50
BENCH_CONFIG = SynthConfig(grid=(80, 40, 40), segment_block=4, tree_levels=1, n_actors_present=1, unary_noise=0.3, response_noise=0.1)


def standard_suite(n_seeds: int = SUITE_SEEDS, unary_noise: float = 0.3, flip_fraction: float = 0.2, **overrides):
    """Yield ``(seed, instance, truth)`` for the default-config benchmark suite.

    Seed ``k`` generates with ``seed=k`` and corrupts with ``seed=k + 1000``;
    response noise is 0.1 whenever anything is noisy.
    """
    noisy = unary_noise > 0 or flip_fraction > 0
    for seed in range(n_seeds):
        kw = {"seed": seed, "unary_noise": unary_noise, "response_noise": 0.1 if noisy else 0.0, **overrides}
        inst, truth = generate(SynthConfig(**kw))
        yield seed, corrupt(inst, truth, flip_fraction, seed + 1000), truth
