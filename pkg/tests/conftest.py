import numpy as np
import pytest

from rapdscreen.patches import extract_labeled_patches, train_baseline_classifier

from scenes import eye_frame


@pytest.fixture(scope="session")
def trained_mini_model():
    """Baseline classifier trained on a small set of rendered eye frames."""
    g = np.random.default_rng(123)
    train, val = [], []
    for i in range(70):
        cx = 80 + g.integers(-12, 13)
        cy = 60 + g.integers(-10, 11)
        r = g.integers(15, 26)
        frame = eye_frame(120, 160, cx, cy, r)
        samples = extract_labeled_patches(frame, (cx, cy), 60, balance_seed=i)
        (train if i < 55 else val).extend(samples)
    return train_baseline_classifier(train, val, epochs=15, seed=4)
