"""Joint actor-action labeling of video segments with a supervoxel grouping process."""

from .gpm import Solution, infer
from .hierarchy import SupervoxelTree, build_tree
from .instance import Instance, LabelSpace, Params, SegmentGraph, UnaryTables, load_instance, save_instance
from .metrics import EvalReport, evaluate
from .synth import SynthConfig, corrupt, generate

__version__ = "0.1.0"

__all__ = [
    "EvalReport",
    "Instance",
    "LabelSpace",
    "Params",
    "SegmentGraph",
    "Solution",
    "SupervoxelTree",
    "SynthConfig",
    "UnaryTables",
    "build_tree",
    "corrupt",
    "evaluate",
    "generate",
    "infer",
    "load_instance",
    "save_instance",
]
