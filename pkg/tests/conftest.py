import numpy as np
import pytest

from signvec.datasets import SynthConfig, synth_generate
from signvec.keypoints import NUM_LANDMARKS, KeypointSequence
from signvec.model import build_model, preset


def random_sequence(rng: np.random.Generator, frames: int = 12, fps: float = 25.0,
                    presence: np.ndarray | None = None) -> KeypointSequence:
    """A generic random sequence with non-degenerate shoulders."""
    coords = rng.normal(scale=0.3, size=(frames, NUM_LANDMARKS, 3))
    coords[:, 11] += np.array([0.5, -0.4, 0.0])
    coords[:, 12] += np.array([-0.5, -0.4, 0.0])
    if presence is None:
        pres = np.ones((frames, 3), dtype=bool)
    else:
        pres = presence
    for g, sl in enumerate((slice(0, 33), slice(33, 54), slice(54, 75))):
        coords[~pres[:, g], sl] = 0.0
    return KeypointSequence(coords=coords, presence=pres, fps=fps)


@pytest.fixture(scope="session")
def tiny_model():
    return build_model(preset("tiny"), seed=11)


@pytest.fixture(scope="session")
def small_dataset():
    """10 classes x 4 samples, quick to embed."""
    cfg = SynthConfig(num_classes=10, samples_per_class=4, min_frames=18,
                      max_frames=30, seed=5)
    return synth_generate(cfg)


@pytest.fixture(scope="session")
def small_model(small_dataset):
    return build_model(preset("small", num_classes=10, sequence_len=16), seed=3)
