import numpy as np
import pytest
from PIL import Image


@pytest.fixture(scope="session")
def image_dir(tmp_path_factory):
    """4 classes x 6 small colorful images, deterministic content."""
    root = tmp_path_factory.mktemp("images")
    rng = np.random.default_rng(1234)
    for c, name in enumerate(["ash", "birch", "cedar", "dogwood"]):
        cdir = root / name
        cdir.mkdir()
        for i in range(6):
            base = rng.integers(0, 256, size=(48, 48, 3), dtype=np.uint8)
            tint = np.zeros(3, dtype=np.uint8)
            tint[c % 3] = 90
            pixels = np.clip(base.astype(int) + tint, 0, 255).astype(np.uint8)
            Image.fromarray(pixels, "RGB").save(cdir / f"img_{i}.png")
    return root
