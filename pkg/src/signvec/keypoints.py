"""Landmark-sequence data model, the poseseq on-disk format, and preprocessing.

A sequence is a time-ordered list of frames, each carrying 75 landmarks
(33 body, 21 left hand, 21 right hand) as (x, y, z) coordinates plus one
presence flag per landmark group. Groups that were not detected carry
all-zero coordinates and presence=False.

The poseseq format is a UTF-8 JSON document:

    {
      "version": 1,
      "fps": 25.0,
      "landmark_spec": "pose33+lhand21+rhand21",
      "dims": 3,
      "frames": [
        {"points": [[x, y, z], ... 75 entries ...],
         "presence": {"pose": true, "lhand": true, "rhand": false}},
        ...
      ],
      "source_id": "optional opaque string"
    }

Writing is canonical: for a given sequence the serialized bytes are always
identical, and write -> parse -> write is a byte-level fixed point.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np

POSE_LANDMARKS = 33
HAND_LANDMARKS = 21
NUM_LANDMARKS = POSE_LANDMARKS + 2 * HAND_LANDMARKS  # 75
NUM_CHANNELS = NUM_LANDMARKS * 3  # 225, flattened landmark-major

LANDMARK_SPEC = "pose33+lhand21+rhand21"
POSESEQ_VERSION = 1

GROUP_NAMES = ("pose", "lhand", "rhand")
GROUP_SLICES = {
    "pose": slice(0, POSE_LANDMARKS),
    "lhand": slice(POSE_LANDMARKS, POSE_LANDMARKS + HAND_LANDMARKS),
    "rhand": slice(POSE_LANDMARKS + HAND_LANDMARKS, NUM_LANDMARKS),
}

# MediaPipe pose indexing: 11 = left shoulder, 12 = right shoulder.
LEFT_SHOULDER = 11
RIGHT_SHOULDER = 12

_DEGENERATE_SCALE = 1e-6


class PoseseqError(ValueError):
    """Base class for poseseq parsing failures."""


class PoseseqFormatError(PoseseqError):
    """Document is not a well-formed poseseq (JSON, fields, version, spec)."""


class LandmarkCountError(PoseseqError):
    """A frame does not contain exactly 75 landmarks."""


class NonFiniteCoordinateError(PoseseqError):
    """A coordinate is NaN or infinite."""


class FrameRateError(PoseseqError):
    """Declared fps is not a positive number."""


class NormalizationError(ValueError):
    """Sequence cannot be normalized (no pose frames or degenerate scale)."""


@dataclass(frozen=True)
class KeypointFrame:
    """One frame: 75 landmark coordinates plus per-group presence flags."""

    coordinates: np.ndarray  # [75, 3] float64
    presence: np.ndarray  # [3] bool, order (pose, lhand, rhand)

    def group_present(self, name: str) -> bool:
        return bool(self.presence[GROUP_NAMES.index(name)])


@dataclass(frozen=True)
class KeypointSequence:
    """A landmark sequence stored as dense arrays.

    coords: [T, 75, 3] float64; presence: [T, 3] bool.
    """

    coords: np.ndarray
    presence: np.ndarray
    fps: float
    source_id: str = ""

    def __post_init__(self):
        coords = np.ascontiguousarray(np.asarray(self.coords, dtype=np.float64))
        presence = np.ascontiguousarray(np.asarray(self.presence, dtype=bool))
        if coords.ndim != 3 or coords.shape[1:] != (NUM_LANDMARKS, 3):
            raise ValueError(f"coords must be [T, {NUM_LANDMARKS}, 3], got {coords.shape}")
        if presence.shape != (coords.shape[0], len(GROUP_NAMES)):
            raise ValueError(f"presence must be [T, 3], got {presence.shape}")
        if coords.shape[0] < 1:
            raise ValueError("sequence must contain at least one frame")
        if not float(self.fps) > 0:
            raise ValueError(f"fps must be > 0, got {self.fps}")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "presence", presence)
        object.__setattr__(self, "fps", float(self.fps))

    def __len__(self) -> int:
        return self.coords.shape[0]

    @property
    def frames(self) -> list[KeypointFrame]:
        return [KeypointFrame(self.coords[t], self.presence[t]) for t in range(len(self))]

    def equals(self, other: "KeypointSequence") -> bool:
        """Field-for-field equality (exact coordinate bits)."""
        return (
            self.coords.shape == other.coords.shape
            and np.array_equal(self.coords, other.coords)
            and np.array_equal(self.presence, other.presence)
            and self.fps == other.fps
            and self.source_id == other.source_id
        )


@dataclass(frozen=True)
class ModelInput:
    """Fixed-length network input: [T, 225] values plus a validity mask.

    Rows with valid_mask False are padding and are all-zero.
    """

    values: np.ndarray  # [T, 225] float64
    valid_mask: np.ndarray  # [T] bool

    def __post_init__(self):
        values = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        mask = np.ascontiguousarray(np.asarray(self.valid_mask, dtype=bool))
        if values.ndim != 2 or values.shape[1] != NUM_CHANNELS:
            raise ValueError(f"values must be [T, {NUM_CHANNELS}], got {values.shape}")
        if mask.shape != (values.shape[0],):
            raise ValueError("valid_mask length must match values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid_mask", mask)


def _require(condition: bool, exc: type[PoseseqError], message: str) -> None:
    if not condition:
        raise exc(message)


def _reject_constant(value: str):
    raise NonFiniteCoordinateError(f"non-finite number in document: {value}")


def parse_poseseq(data: bytes | str) -> KeypointSequence:
    """Parse a poseseq document into a KeypointSequence.

    Raises a distinct error subtype per failure mode: PoseseqFormatError,
    LandmarkCountError, NonFiniteCoordinateError, FrameRateError.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise PoseseqFormatError(f"document is not UTF-8: {e}") from e
    else:
        text = data
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise PoseseqFormatError(f"document is not valid JSON: {e}") from e

    _require(isinstance(doc, dict), PoseseqFormatError, "top level must be an object")
    _require(doc.get("version") == POSESEQ_VERSION, PoseseqFormatError,
             f"unsupported version {doc.get('version')!r} (expected {POSESEQ_VERSION})")
    _require(doc.get("landmark_spec") == LANDMARK_SPEC, PoseseqFormatError,
             f"unsupported landmark_spec {doc.get('landmark_spec')!r}")
    _require(doc.get("dims") == 3, PoseseqFormatError,
             f"dims must be 3, got {doc.get('dims')!r}")

    fps = doc.get("fps")
    _require(isinstance(fps, (int, float)) and not isinstance(fps, bool),
             PoseseqFormatError, "fps must be a number")
    if not math.isfinite(fps) or fps <= 0:
        raise FrameRateError(f"fps must be a positive finite number, got {fps}")

    frames = doc.get("frames")
    _require(isinstance(frames, list), PoseseqFormatError, "frames must be an array")
    _require(len(frames) >= 1, PoseseqFormatError, "frames must contain at least one frame")

    source_id = doc.get("source_id", "")
    _require(isinstance(source_id, str), PoseseqFormatError, "source_id must be a string")

    T = len(frames)
    coords = np.zeros((T, NUM_LANDMARKS, 3), dtype=np.float64)
    presence = np.zeros((T, len(GROUP_NAMES)), dtype=bool)
    for t, frame in enumerate(frames):
        _require(isinstance(frame, dict), PoseseqFormatError, f"frame {t} must be an object")
        points = frame.get("points")
        _require(isinstance(points, list), PoseseqFormatError, f"frame {t}: points must be an array")
        if len(points) != NUM_LANDMARKS:
            raise LandmarkCountError(
                f"frame {t}: expected {NUM_LANDMARKS} landmarks, got {len(points)}")
        for i, point in enumerate(points):
            _require(isinstance(point, list) and len(point) == 3, PoseseqFormatError,
                     f"frame {t}, landmark {i}: point must be an array of 3 numbers")
            for c, v in enumerate(point):
                _require(isinstance(v, (int, float)) and not isinstance(v, bool),
                         PoseseqFormatError,
                         f"frame {t}, landmark {i}: coordinate must be a number")
                if not math.isfinite(v):
                    raise NonFiniteCoordinateError(
                        f"frame {t}, landmark {i}: non-finite coordinate {v}")
                coords[t, i, c] = v
        pres = frame.get("presence")
        _require(isinstance(pres, dict), PoseseqFormatError, f"frame {t}: presence must be an object")
        for g, name in enumerate(GROUP_NAMES):
            flag = pres.get(name)
            _require(isinstance(flag, bool), PoseseqFormatError,
                     f"frame {t}: presence.{name} must be a boolean")
            presence[t, g] = flag
            if not flag:
                # Absent groups carry all-zero coordinates by invariant.
                coords[t, GROUP_SLICES[name]] = 0.0

    return KeypointSequence(coords=coords, presence=presence, fps=float(fps), source_id=source_id)


def write_poseseq(seq: KeypointSequence) -> bytes:
    """Serialize a sequence to canonical poseseq bytes (deterministic)."""
    doc: dict = {
        "version": POSESEQ_VERSION,
        "fps": seq.fps,
        "landmark_spec": LANDMARK_SPEC,
        "dims": 3,
        "frames": [
            {
                "points": [[float(v) for v in point] for point in seq.coords[t]],
                "presence": {name: bool(seq.presence[t, g]) for g, name in enumerate(GROUP_NAMES)},
            }
            for t in range(len(seq))
        ],
    }
    if seq.source_id:
        doc["source_id"] = seq.source_id
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")


def normalize(seq: KeypointSequence) -> KeypointSequence:
    """Remove global translation and scale from a sequence.

    The mid-shoulder midpoint averaged over pose-present frames maps to the
    origin and the mean shoulder distance maps to 1; x, y and z are divided
    by the same scalar. Coordinates of absent groups stay zero and presence
    flags are preserved.
    """
    pose_present = seq.presence[:, 0]
    if not pose_present.any():
        raise NormalizationError("no pose-present frames to anchor normalization")

    left = seq.coords[pose_present, LEFT_SHOULDER]
    right = seq.coords[pose_present, RIGHT_SHOULDER]
    distances = np.linalg.norm(left - right, axis=1)
    if (distances < _DEGENERATE_SCALE).all():
        raise NormalizationError(
            f"degenerate scale: shoulder distance < {_DEGENERATE_SCALE} in every pose-present frame")

    center = ((left + right) / 2.0).mean(axis=0)
    scale = distances.mean()

    coords = seq.coords.copy()
    for g, name in enumerate(GROUP_NAMES):
        rows = seq.presence[:, g]
        if rows.any():
            block = GROUP_SLICES[name]
            coords[rows, block] = (seq.coords[rows, block] - center) / scale
    return replace(seq, coords=coords)


def resample_uniform(seq: KeypointSequence, target_len: int) -> KeypointSequence:
    """Resample to exactly target_len frames by nearest-frame selection.

    Frames are taken at uniformly spaced fractional indices over [0, T-1];
    the first and last frames are preserved for target_len >= 2. Presence
    flags travel with the selected frame. fps is left unchanged (this is
    frame selection, not retiming).
    """
    if target_len < 1:
        raise ValueError(f"target_len must be >= 1, got {target_len}")
    T = len(seq)
    positions = np.linspace(0.0, T - 1, num=target_len)
    indices = np.rint(positions).astype(np.intp)
    return replace(seq, coords=seq.coords[indices].copy(), presence=seq.presence[indices].copy())


def to_model_input(seq: KeypointSequence, T: int) -> ModelInput:
    """Convert a (normalized) sequence into a fixed-length network input.

    Longer sequences are resampled down to T; shorter ones are zero-padded
    at the end with valid_mask False. Channels are flattened landmark-major:
    landmark i's (x, y, z) occupy columns 3i, 3i+1, 3i+2.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if len(seq) > T:
        seq = resample_uniform(seq, T)
    n = len(seq)
    values = np.zeros((T, NUM_CHANNELS), dtype=np.float64)
    values[:n] = seq.coords.reshape(n, NUM_CHANNELS)
    mask = np.zeros(T, dtype=bool)
    mask[:n] = True
    return ModelInput(values=values, valid_mask=mask)
