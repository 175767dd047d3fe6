"""Problem instance data model, validation and the JSON instance format.

Joint labels are indexed ``0..|Z|-1`` in the order of ``LabelSpace.joint``;
index ``|Z|`` is the background label, whose actor and action projections are
both null (encoded as -1).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

from .hierarchy import SupervoxelTree, path_matrix, tree_violations

# label-pair categories used by every pairwise table
SAME, ACTOR_ONLY, ACTION_ONLY, BOTH = 0, 1, 2, 3


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class LabelSpace:
    actors: tuple
    actions: tuple
    joint: tuple  # (actor index, action index) pairs
    background: str = "background"

    def __post_init__(self):
        object.__setattr__(self, "actors", tuple(str(a) for a in self.actors))
        object.__setattr__(self, "actions", tuple(str(a) for a in self.actions))
        object.__setattr__(self, "joint", tuple((int(x), int(y)) for x, y in self.joint))

    @property
    def n_joint(self) -> int:
        return len(self.joint)

    @property
    def n_labels(self) -> int:
        """Joint labels plus background."""
        return len(self.joint) + 1

    @property
    def bg(self) -> int:
        return len(self.joint)

    @cached_property
    def actor_of(self) -> np.ndarray:
        return _frozen([x for x, _ in self.joint] + [-1], np.int64)

    @cached_property
    def action_of(self) -> np.ndarray:
        return _frozen([y for _, y in self.joint] + [-1], np.int64)

    @cached_property
    def category(self) -> np.ndarray:
        """``category[a, b]`` classifies a label pair as SAME / ACTOR_ONLY / ACTION_ONLY / BOTH."""
        ax = self.actor_of[:, None] != self.actor_of[None, :]
        ay = self.action_of[:, None] != self.action_of[None, :]
        cat = np.where(ax & ay, BOTH, np.where(ax, ACTOR_ONLY, np.where(ay, ACTION_ONLY, SAME)))
        cat.flags.writeable = False
        return cat

    def name(self, label: int) -> str:
        if label == self.bg:
            return self.background
        x, y = self.joint[label]
        return f"{self.actors[x]}-{self.actions[y]}"

    def violations(self) -> list[str]:
        out = []
        if len(self.joint) < 1:
            out.append("joint label space must contain at least one pair")
        for k, (x, y) in enumerate(self.joint):
            if not (0 <= x < len(self.actors) and 0 <= y < len(self.actions)):
                out.append(f"joint pair {k} references an unknown actor/action index")
        if len(set(self.joint)) != len(self.joint):
            out.append("joint label space contains duplicate pairs")
        if len(set(self.actors)) != len(self.actors) or len(set(self.actions)) != len(self.actions):
            out.append("duplicate actor or action names")
        names = {f"{a}-{b}" for a in self.actors for b in self.actions}
        if self.background in names or self.background in self.actors or self.background in self.actions:
            out.append("background label must not be a member of the joint space")
        return out


@dataclass(frozen=True)
class SegmentGraph:
    """Segment adjacency with per-edge contrast weights.

    ``layout`` optionally maps pixels to segments for rendering:
    ``{"scale": int, "frames": [per-frame 2D segment-id grid]}``; each grid
    cell covers ``scale x scale`` pixels.
    """

    n_segments: int
    edges: np.ndarray
    weights: np.ndarray
    segment_sizes: np.ndarray
    frame_of: np.ndarray | None = None
    layout: dict | None = None

    def __post_init__(self):
        object.__setattr__(self, "n_segments", int(self.n_segments))
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        edges.flags.writeable = False
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", _frozen(self.weights, np.float64))
        object.__setattr__(self, "segment_sizes", _frozen(self.segment_sizes, np.int64))
        if self.frame_of is not None:
            object.__setattr__(self, "frame_of", _frozen(self.frame_of, np.int64))
        if self.layout is not None:
            frames = [_frozen(f, np.int64) for f in self.layout["frames"]]
            object.__setattr__(self, "layout", {"scale": int(self.layout["scale"]), "frames": frames})

    def violations(self) -> list[str]:
        out = []
        n = self.n_segments
        if n < 1:
            out.append("graph must have at least one segment")
        e = self.edges
        if self.weights.size != e.shape[0]:
            out.append("edge weight count does not match edge count")
        if e.size:
            if e.min() < 0 or e.max() >= n:
                out.append("edge endpoint out of range")
            if np.any(e[:, 0] == e[:, 1]):
                out.append("graph contains a self-loop")
            key = np.sort(e, axis=1)
            if np.unique(key, axis=0).shape[0] != key.shape[0]:
                out.append("graph contains duplicate edges")
        if self.weights.size and (np.any(self.weights < 0) or not np.all(np.isfinite(self.weights))):
            out.append("contrast weights must be finite and >= 0")
        if self.segment_sizes.size != n:
            out.append("segment_sizes length does not match n_segments")
        elif np.any(self.segment_sizes < 1):
            out.append("segment sizes must be >= 1")
        if self.frame_of is not None and self.frame_of.size != n:
            out.append("frame_of length does not match n_segments")
        if self.layout is not None:
            for f, grid in enumerate(self.layout["frames"]):
                if grid.ndim != 2 or (grid.size and (grid.min() < 0 or grid.max() >= n)):
                    out.append(f"layout frame {f} is malformed")
                    break
        return out


@dataclass(frozen=True)
class UnaryTables:
    """Segment unary energies (lower is better) and video-level responses."""

    actor: np.ndarray  # N x |X|
    action: np.ndarray  # N x |Y|
    joint: np.ndarray  # N x (|Z| + 1), background last
    video_response: np.ndarray  # |Z|

    def __post_init__(self):
        for name in ("actor", "action", "joint", "video_response"):
            object.__setattr__(self, name, _frozen(getattr(self, name), np.float64))

    def abs_sum(self) -> float:
        return float(np.abs(self.actor).sum() + np.abs(self.action).sum() + np.abs(self.joint).sum())


@dataclass(frozen=True)
class Params:
    theta_t: float = 0.25  # grouping pairwise strength
    theta_h: float = 40.0  # slice depth prior
    theta_tau: float = 1e6  # invalid-slice penalty
    theta_T: float = 0.5  # video response threshold
    theta_B: float = 10.0  # video unary scale
    theta_V: float = 2.0  # label cost
    potts_actor: float = 1.0
    potts_action: float = 1.0
    max_iters: int = 10
    epsilon: float = 1e-6  # relative to the initial labeling objective

    def __post_init__(self):
        for f in fields(self):
            cast = int if f.name == "max_iters" else float
            object.__setattr__(self, f.name, cast(getattr(self, f.name)))

    def replace(self, **kw) -> "Params":
        d = asdict(self)
        d.update(kw)
        return Params(**d)


@dataclass(frozen=True)
class Instance:
    labels: LabelSpace
    graph: SegmentGraph
    unaries: UnaryTables
    tree: SupervoxelTree
    params: Params
    ground_truth: np.ndarray | None = None

    def __post_init__(self):
        if self.ground_truth is not None:
            object.__setattr__(self, "ground_truth", _frozen(self.ground_truth, np.int64))

    @property
    def n_segments(self) -> int:
        return self.graph.n_segments

    @cached_property
    def unary_matrix(self) -> np.ndarray:
        """Combined per-segment unary over all labels (actor + action + joint)."""
        lab = self.labels
        u = self.unaries.joint.copy()
        u[:, : lab.n_joint] += self.unaries.actor[:, lab.actor_of[:-1]]
        u[:, : lab.n_joint] += self.unaries.action[:, lab.action_of[:-1]]
        u.flags.writeable = False
        return u

    @cached_property
    def edge_coef(self) -> np.ndarray:
        """Per-edge pairwise values indexed by label-pair category."""
        p = self.params
        psi = p.potts_actor * self.graph.weights
        phi = p.potts_action * self.graph.weights
        coef = np.stack([np.zeros_like(psi), psi, phi, psi * phi], axis=1)
        coef.flags.writeable = False
        return coef

    @cached_property
    def paths(self):
        return path_matrix(self.tree)

    def replace(self, **kw) -> "Instance":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(kw)
        return Instance(**d)


def validate_instance(inst: Instance) -> list[str]:
    """Return every violated invariant as a message; an empty list means valid."""
    out = []
    lab, g, u, p = inst.labels, inst.graph, inst.unaries, inst.params
    out += lab.violations()
    out += g.violations()
    n = g.n_segments
    shapes = {
        "actor": (n, len(lab.actors)),
        "action": (n, len(lab.actions)),
        "joint": (n, lab.n_labels),
        "video_response": (lab.n_joint,),
    }
    shapes_ok = True
    for name, shape in shapes.items():
        arr = getattr(u, name)
        if arr.shape != shape:
            out.append(f"unary table '{name}' has shape {arr.shape}, expected {shape}")
            shapes_ok = False
        elif not np.all(np.isfinite(arr)):
            out.append(f"unary table '{name}' contains non-finite values")

    for name in ("theta_t", "theta_h", "theta_V", "potts_actor", "potts_action"):
        if getattr(p, name) < 0:
            out.append(f"{name} must be >= 0")
    if p.theta_B <= 0:
        out.append("theta_B must be > 0")
    if not p.theta_B > 2 * p.theta_V:
        out.append("theta_B must exceed 2*theta_V")
    if shapes_ok and p.theta_tau < 10 * u.abs_sum():
        out.append("theta_tau must be >= 10 * sum of absolute unary magnitudes")
    if p.max_iters < 0:
        out.append("max_iters must be >= 0")
    if p.epsilon < 0:
        out.append("epsilon must be >= 0")

    tv = tree_violations(inst.tree, g.segment_sizes if g.segment_sizes.size == n else None)
    out += [f"tree: {m}" for m in tv]
    if not tv:
        t = inst.tree
        leaf_members = [t.members[leaf] for leaf in t.leaves]
        allm = np.concatenate(leaf_members) if leaf_members else np.array([], dtype=np.int64)
        if allm.size != n or not np.array_equal(np.sort(allm), np.arange(n)):
            missing = np.setdiff1d(np.arange(n), allm)
            out.append(
                "tree leaves do not partition the segments"
                + (f" (missing {missing[:5].tolist()})" if missing.size else " (overlapping leaves)")
            )
    if inst.ground_truth is not None:
        gt = inst.ground_truth
        if gt.shape != (n,) or (gt.size and (gt.min() < 0 or gt.max() >= lab.n_labels)):
            out.append("ground_truth must hold one valid label per segment")
    return out


# ---------------------------------------------------------------------------
# serialization


def dumps(obj) -> str:
    """JSON text with sorted keys; lists of scalars stay on one line."""

    def enc(o, ind):
        pad = " " * ind
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f'{pad}  {json.dumps(str(k))}: {enc(o[k], ind + 2)}' for k in sorted(o)]
            return "{\n" + ",\n".join(items) + f"\n{pad}}}"
        if isinstance(o, (list, tuple)):
            if all(not isinstance(x, (dict, list, tuple)) for x in o):
                return "[" + ", ".join(enc(x, ind) for x in o) + "]"
            items = [f"{pad}  {enc(x, ind + 2)}" for x in o]
            return "[\n" + ",\n".join(items) + f"\n{pad}]"
        if isinstance(o, (bool, np.bool_)):
            return "true" if o else "false"
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            f = float(o)
            if not np.isfinite(f):
                raise ValueError("cannot serialize non-finite number")
            return repr(f)
        if o is None:
            return "null"
        return json.dumps(o)

    return enc(obj, 0) + "\n"


def _tolist(a):
    return np.asarray(a).tolist()


def instance_to_dict(inst: Instance) -> dict:
    g = inst.graph
    graph = {
        "n_segments": g.n_segments,
        "edges": _tolist(g.edges),
        "weights": [float(w) for w in g.weights],
        "segment_sizes": _tolist(g.segment_sizes),
    }
    if g.frame_of is not None:
        graph["frame_of"] = _tolist(g.frame_of)
    if g.layout is not None:
        graph["layout"] = {"scale": g.layout["scale"], "frames": [_tolist(f) for f in g.layout["frames"]]}
    t = inst.tree
    d = {
        "labels": {
            "actors": list(inst.labels.actors),
            "actions": list(inst.labels.actions),
            "joint": [list(j) for j in inst.labels.joint],
            "background": inst.labels.background,
        },
        "graph": graph,
        "unaries": {
            "actor": [[float(x) for x in r] for r in inst.unaries.actor],
            "action": [[float(x) for x in r] for r in inst.unaries.action],
            "joint": [[float(x) for x in r] for r in inst.unaries.joint],
            "video_response": [float(x) for x in inst.unaries.video_response],
        },
        "tree": {
            "parent": _tolist(t.parent),
            "members": [_tolist(m) for m in t.members],
            "size": _tolist(t.size),
            "level": _tolist(t.level),
        },
        "params": asdict(inst.params),
    }
    if inst.ground_truth is not None:
        d["ground_truth"] = _tolist(inst.ground_truth)
    return d


def _table(rows, n_cols):
    a = np.asarray(rows, dtype=np.float64)
    return a.reshape(-1, n_cols) if a.size == 0 else a


def instance_from_dict(d: dict) -> Instance:
    lab = LabelSpace(
        actors=d["labels"]["actors"],
        actions=d["labels"]["actions"],
        joint=d["labels"]["joint"],
        background=d["labels"].get("background", "background"),
    )
    gd = d["graph"]
    graph = SegmentGraph(
        n_segments=gd["n_segments"],
        edges=gd["edges"],
        weights=gd["weights"],
        segment_sizes=gd["segment_sizes"],
        frame_of=gd.get("frame_of"),
        layout=gd.get("layout"),
    )
    ud = d["unaries"]
    unaries = UnaryTables(
        actor=_table(ud["actor"], len(lab.actors)),
        action=_table(ud["action"], len(lab.actions)),
        joint=_table(ud["joint"], lab.n_labels),
        video_response=ud["video_response"],
    )
    td = d["tree"]
    tree = SupervoxelTree(parent=td["parent"], members=tuple(td["members"]), size=td["size"], level=td["level"])
    return Instance(
        labels=lab,
        graph=graph,
        unaries=unaries,
        tree=tree,
        params=Params(**d["params"]),
        ground_truth=d.get("ground_truth"),
    )


def load_schema() -> dict:
    return json.loads(resources.files("gpmseg").joinpath("schema/instance.schema.json").read_text())


def check_schema(d: dict) -> None:
    import jsonschema

    jsonschema.validate(d, load_schema())


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(dumps(instance_to_dict(inst)))


def load_instance(path, validate: bool = True) -> Instance:
    """Load an instance file.  Schema errors raise ``jsonschema.ValidationError``;
    semantic violations raise ``ValueError`` when ``validate`` is set."""
    d = json.loads(Path(path).read_text())
    check_schema(d)
    inst = instance_from_dict(d)
    if validate:
        problems = validate_instance(inst)
        if problems:
            raise ValueError(f"invalid instance {path}: " + "; ".join(problems))
    return inst
