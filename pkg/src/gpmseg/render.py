"""Label-map rendering to binary PPM (P6)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

# tableau-style colors; background is always black
_BASE = np.array(
    [
        (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40),
        (148, 103, 189), (140, 86, 75), (227, 119, 194), (127, 127, 127),
        (188, 189, 34), (23, 190, 207), (174, 199, 232), (255, 187, 120),
    ],
    dtype=np.uint8,
)


def palette(n_labels: int) -> np.ndarray:
    """RGB row per label index; the last index (background) is black."""
    n_joint = n_labels - 1
    reps = -(-max(n_joint, 1) // len(_BASE))
    colors = np.tile(_BASE, (reps, 1))[:n_joint]
    return np.vstack([colors, np.zeros((1, 3), dtype=np.uint8)])


def frame_image(labeling, layout: dict, frame: int, n_labels: int) -> np.ndarray:
    if layout is None:
        raise ValueError("instance has no frame layout; cannot render")
    frames = layout["frames"]
    if not 0 <= frame < len(frames):
        raise ValueError(f"frame {frame} out of range [0, {len(frames)})")
    ids = np.asarray(frames[frame], dtype=np.int64)
    labels = np.asarray(labeling, dtype=np.int64)[ids]
    scale = int(layout["scale"])
    img = palette(n_labels)[labels]
    return np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)


def ppm_bytes(img: np.ndarray) -> bytes:
    img = np.ascontiguousarray(img, dtype=np.uint8)
    h, w, _ = img.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + img.tobytes()


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P6":
        raise ValueError(f"{path}: not a binary PPM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: w * h * 3], dtype=np.uint8).reshape(h, w, 3)


def write_frame(path, labeling, layout, frame: int, n_labels: int) -> tuple[int, int]:
    img = frame_image(labeling, layout, frame, n_labels)
    Path(path).write_bytes(ppm_bytes(img))
    return img.shape[1], img.shape[0]
