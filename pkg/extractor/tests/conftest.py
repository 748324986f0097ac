import numpy as np
import pytest
from PIL import Image

from specs import N_IMAGES


@pytest.fixture(scope="session")
def image_dir(tmp_path_factory):
    """Six small labeled PNGs plus one file that does not decode."""
    root = tmp_path_factory.mktemp("corpus")
    rng = np.random.default_rng(0)
    for i in range(N_IMAGES):
        pixels = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
        Image.fromarray(pixels).save(root / f"img_{i:02d}.png")
    (root / "broken.png").write_bytes(b"not a png at all")
    return str(root)


@pytest.fixture(scope="session")
def label_file(tmp_path_factory, image_dir):
    """Positional labels for the corpus listing (broken.png included)."""
    n_listed = N_IMAGES + 1
    path = tmp_path_factory.mktemp("labels") / "labels.txt"
    path.write_text("".join(f"{i % 3}\n" for i in range(n_listed)))
    return str(path)
