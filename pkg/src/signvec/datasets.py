"""Synthetic sign datasets and on-disk dataset layouts.

Each synthetic class is a prototype: smooth wrist trajectories through
class-specific control points plus a class-specific static handshape
offset pattern drawn from a shared prototype library. A sample is the
prototype evaluated on a monotonically warped time grid with i.i.d.
coordinate noise added. Everything is a pure function of the seed.

Directory layouts:
  dataset dir:     <root>/<label>/<index>.json   (many samples per class)
  dictionary dir:  <root>/<label>.json           (exactly one per label)
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .keypoints import (
    HAND_LANDMARKS,
    NUM_LANDMARKS,
    POSE_LANDMARKS,
    KeypointSequence,
    parse_poseseq,
    write_poseseq,
)

LabeledSample = tuple[str, KeypointSequence]

# Static upper-body anchor points (MediaPipe pose indexing), roughly in
# normalized image units with the torso centered near the origin.
_NOSE = np.array([0.0, -0.62, 0.0])
_LEFT_SHOULDER = np.array([0.20, -0.40, 0.0])
_RIGHT_SHOULDER = np.array([-0.20, -0.40, 0.0])
_LEFT_HIP = np.array([0.13, 0.12, 0.0])
_RIGHT_HIP = np.array([-0.13, 0.12, 0.0])

# Hands move inside this box in front of the torso.
_MOTION_LOW = np.array([-0.55, -0.75, -0.20])
_MOTION_HIGH = np.array([0.55, 0.25, 0.20])

_HANDSHAPE_SCALE = 0.09


class SynthConfigError(ValueError):
    """Synthetic-data configuration violates an invariant."""


@dataclass(frozen=True)
class SynthConfig:
    num_classes: int = 20
    samples_per_class: int = 5
    min_frames: int = 40
    max_frames: int = 70
    handshape_prototypes: int = 6
    control_points: int = 4
    noise_scale: float = 0.25
    warp_amplitude: float = 0.31
    fps: float = 25.0
    seed: int = 0

    def validate(self) -> None:
        for name in ("num_classes", "samples_per_class", "handshape_prototypes"):
            if getattr(self, name) < 1:
                raise SynthConfigError(f"{name} must be positive")
        if self.control_points < 2:
            raise SynthConfigError("control_points must be >= 2 for motion")
        if not 2 <= self.min_frames <= self.max_frames:
            raise SynthConfigError("need 2 <= min_frames <= max_frames")
        if self.noise_scale < 0:
            raise SynthConfigError("noise_scale must be >= 0")
        # Monotonicity of t + a*sin(pi t) requires |a| < 1/pi.
        if not 0 <= self.warp_amplitude <= 0.31:
            raise SynthConfigError("warp_amplitude must be in [0, 0.31]")
        if self.fps <= 0:
            raise SynthConfigError("fps must be positive")


def _base_pose() -> np.ndarray:
    """Static 33-landmark body; arm joints are overwritten per frame."""
    pose = np.zeros((POSE_LANDMARKS, 3))
    pose[0] = _NOSE
    for i in range(1, 11):  # face points scattered around the nose
        side = 1.0 if i % 2 else -1.0
        pose[i] = _NOSE + np.array([side * 0.02 * ((i + 1) // 2), -0.015 * i, 0.0])
    pose[11], pose[12] = _LEFT_SHOULDER, _RIGHT_SHOULDER
    pose[23], pose[24] = _LEFT_HIP, _RIGHT_HIP
    pose[25] = _LEFT_HIP + np.array([0.01, 0.43, 0.0])
    pose[26] = _RIGHT_HIP + np.array([-0.01, 0.43, 0.0])
    pose[27] = pose[25] + np.array([0.01, 0.40, 0.0])
    pose[28] = pose[26] + np.array([-0.01, 0.40, 0.0])
    for i, parent in ((29, 27), (30, 28), (31, 27), (32, 28)):
        pose[i] = pose[parent] + np.array([0.0, 0.05, 0.02 if i >= 31 else 0.0])
    return pose


_BASE_POSE = _base_pose()


def _smooth_path(control: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Cosine-eased piecewise interpolation through control points.

    control: [P, 3]; u: [T] in [0, 1]. Returns [T, 3].
    """
    segments = control.shape[0] - 1
    pos = np.clip(u, 0.0, 1.0) * segments
    idx = np.minimum(pos.astype(np.intp), segments - 1)
    frac = pos - idx
    w = (1.0 - np.cos(np.pi * frac)) / 2.0
    return control[idx] * (1.0 - w[:, None]) + control[idx + 1] * w[:, None]


@dataclass(frozen=True)
class _ClassPrototype:
    left_control: np.ndarray  # [P, 3]
    right_control: np.ndarray  # [P, 3]
    left_hand: np.ndarray  # [21, 3] offsets from the wrist
    right_hand: np.ndarray  # [21, 3]

    def frames(self, u: np.ndarray) -> np.ndarray:
        """Evaluate the prototype at warped times u; returns [T, 75, 3]."""
        t = u.shape[0]
        coords = np.zeros((t, NUM_LANDMARKS, 3))
        coords[:, :POSE_LANDMARKS] = _BASE_POSE
        left_wrist = _smooth_path(self.left_control, u)
        right_wrist = _smooth_path(self.right_control, u)
        coords[:, 13] = (_LEFT_SHOULDER + left_wrist) / 2.0 + np.array([0.10, 0.0, 0.05])
        coords[:, 14] = (_RIGHT_SHOULDER + right_wrist) / 2.0 + np.array([-0.10, 0.0, 0.05])
        coords[:, 15] = left_wrist
        coords[:, 16] = right_wrist
        for i, offset in ((17, 0.04), (19, 0.05), (21, 0.03)):  # pose hand points
            coords[:, i] = left_wrist + np.array([offset, -0.02, 0.0])
            coords[:, i + 1] = right_wrist + np.array([-offset, -0.02, 0.0])
        lh = slice(POSE_LANDMARKS, POSE_LANDMARKS + HAND_LANDMARKS)
        rh = slice(POSE_LANDMARKS + HAND_LANDMARKS, NUM_LANDMARKS)
        coords[:, lh] = left_wrist[:, None, :] + self.left_hand
        coords[:, rh] = right_wrist[:, None, :] + self.right_hand
        return coords


def _hand_library(rng: np.random.Generator, count: int) -> np.ndarray:
    """[count, 21, 3] handshape offset patterns shared by all classes."""
    shapes = rng.normal(scale=_HANDSHAPE_SCALE, size=(count, HAND_LANDMARKS, 3))
    shapes[:, 0] = 0.0  # landmark 0 is the wrist itself
    return shapes


def _class_prototype(rng: np.random.Generator, cfg: SynthConfig,
                     library: np.ndarray) -> _ClassPrototype:
    span = _MOTION_HIGH - _MOTION_LOW
    left = _MOTION_LOW + rng.random((cfg.control_points, 3)) * span
    right = _MOTION_LOW + rng.random((cfg.control_points, 3)) * span
    li = int(rng.integers(len(library)))
    ri = int(rng.integers(len(library)))
    return _ClassPrototype(
        left_control=left,
        right_control=right,
        left_hand=library[li],
        right_hand=library[ri],
    )


def synth_generate(cfg: SynthConfig) -> list[LabeledSample]:
    """Generate the labeled dataset described by cfg (pure in the seed)."""
    cfg.validate()
    root = np.random.SeedSequence(cfg.seed)
    library_ss, *class_ss = root.spawn(cfg.num_classes + 1)
    library = _hand_library(np.random.default_rng(library_ss), cfg.handshape_prototypes)

    samples: list[LabeledSample] = []
    for c, ss in enumerate(class_ss):
        proto_ss, *sample_ss = ss.spawn(cfg.samples_per_class + 1)
        proto = _class_prototype(np.random.default_rng(proto_ss), cfg, library)
        label = f"sign{c:04d}"
        for i, sss in enumerate(sample_ss):
            rng = np.random.default_rng(sss)
            t = int(rng.integers(cfg.min_frames, cfg.max_frames + 1))
            v = np.linspace(0.0, 1.0, t)
            amplitude = rng.uniform(-cfg.warp_amplitude, cfg.warp_amplitude)
            u = v + amplitude * np.sin(np.pi * v)
            coords = proto.frames(u)
            if cfg.noise_scale > 0:
                coords = coords + rng.normal(scale=cfg.noise_scale, size=coords.shape)
            seq = KeypointSequence(
                coords=coords,
                presence=np.ones((t, 3), dtype=bool),
                fps=cfg.fps,
                source_id=f"{label}:{i}",
            )
            samples.append((label, seq))
    return samples


def class_prototype_frames(cfg: SynthConfig, class_index: int, num_frames: int) -> np.ndarray:
    """Noise-free prototype frames for one class (for separation checks)."""
    cfg.validate()
    root = np.random.SeedSequence(cfg.seed)
    library_ss, *class_ss = root.spawn(cfg.num_classes + 1)
    library = _hand_library(np.random.default_rng(library_ss), cfg.handshape_prototypes)
    proto_ss = class_ss[class_index].spawn(1)[0]
    proto = _class_prototype(np.random.default_rng(proto_ss), cfg, library)
    return proto.frames(np.linspace(0.0, 1.0, num_frames))


def classes_of(samples: list[LabeledSample]) -> list[str]:
    """Sorted unique labels."""
    return sorted({label for label, _ in samples})


def by_class(samples: list[LabeledSample]) -> dict[str, list[KeypointSequence]]:
    grouped: dict[str, list[KeypointSequence]] = {}
    for label, seq in samples:
        grouped.setdefault(label, []).append(seq)
    return grouped


def split_disjoint_classes(samples: list[LabeledSample], pretrain_fraction: float,
                           seed: int) -> tuple[list[LabeledSample], list[LabeledSample]]:
    """Split into class-disjoint (pretrain, oneshot) sets; seeded shuffle."""
    if not 0.0 < pretrain_fraction < 1.0:
        raise ValueError(f"pretrain_fraction must be in (0, 1), got {pretrain_fraction}")
    labels = classes_of(samples)
    if len(labels) < 2:
        raise ValueError("need at least 2 classes for a disjoint split")
    n_pre = int(round(len(labels) * pretrain_fraction))
    n_pre = min(max(n_pre, 1), len(labels) - 1)
    rng = np.random.default_rng(seed)
    shuffled = [labels[i] for i in rng.permutation(len(labels))]
    pretrain_classes = set(shuffled[:n_pre])
    pretrain = [s for s in samples if s[0] in pretrain_classes]
    oneshot = [s for s in samples if s[0] not in pretrain_classes]
    return pretrain, oneshot


def label_indices(samples: list[LabeledSample]) -> tuple[dict[str, int], list[tuple[int, KeypointSequence]]]:
    """Map labels to dense class indices (sorted order) for training."""
    mapping = {label: i for i, label in enumerate(classes_of(samples))}
    return mapping, [(mapping[label], seq) for label, seq in samples]


# -- directory layouts -------------------------------------------------------


def save_dataset(samples: list[LabeledSample], root) -> None:
    """Write <root>/<label>/<index>.json, one poseseq file per sample."""
    root = Path(root)
    counters: dict[str, int] = {}
    for label, seq in samples:
        i = counters.get(label, 0)
        counters[label] = i + 1
        directory = root / label
        directory.mkdir(parents=True, exist_ok=True)
        (directory / f"{i:04d}.json").write_bytes(write_poseseq(seq))


def load_dataset(root) -> list[LabeledSample]:
    """Read a dataset directory (sorted labels, sorted file names)."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {root}")
    samples: list[LabeledSample] = []
    for directory in sorted(p for p in root.iterdir() if p.is_dir()):
        for file in sorted(directory.glob("*.json")):
            samples.append((directory.name, parse_poseseq(file.read_bytes())))
    if not samples:
        raise FileNotFoundError(f"no samples under {root}")
    return samples


def save_dictionary(entries: list[LabeledSample], root) -> None:
    """Write <root>/<label>.json, exactly one poseseq per label."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    seen: set[str] = set()
    for label, seq in entries:
        if label in seen:
            raise ValueError(f"duplicate dictionary label {label!r}")
        seen.add(label)
        (root / f"{label}.json").write_bytes(write_poseseq(seq))


def load_dictionary(root) -> list[LabeledSample]:
    """Read a flat dictionary directory (sorted labels)."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dictionary directory not found: {root}")
    entries = [(p.stem, parse_poseseq(p.read_bytes())) for p in sorted(root.glob("*.json"))]
    if not entries:
        raise FileNotFoundError(f"no dictionary entries under {root}")
    return entries
