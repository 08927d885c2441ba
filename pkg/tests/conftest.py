from __future__ import annotations

import numpy as np
import pytest

from dualview.fusion import Detection
from dualview.masks import BinaryMask, PlacedMask


def random_mask(rng: np.random.Generator, width: int, height: int, density: float = 0.4) -> BinaryMask:
    return BinaryMask(rng.random((height, width)) < density)


def random_blob(rng: np.random.Generator, width: int, height: int) -> PlacedMask:
    """A random filled ellipse, guaranteed single-component and hole-free."""
    a = rng.uniform(4.0, min(width, height) / 3.0)
    b = rng.uniform(3.0, a)
    phi = rng.uniform(0.0, np.pi)
    cx = rng.uniform(a, width - a)
    cy = rng.uniform(a, height - a)
    u = np.arange(width, dtype=np.float64)[None, :] - cx
    v = np.arange(height, dtype=np.float64)[:, None] - cy
    p = u * np.cos(phi) + v * np.sin(phi)
    q = -u * np.sin(phi) + v * np.cos(phi)
    return PlacedMask.from_crop(width, height, 0, 0, (p / a) ** 2 + (q / b) ** 2 <= 1.0)


def det_from_placed(placed: PlacedMask, det_id: int, score: float, class_id: int = 1,
                    image_id: str = "img", view: str = "original") -> Detection:
    return Detection.from_placed(
        placed, image_id=image_id, class_id=class_id, score=score, view=view, det_id=det_id
    )


def strip_mask(cols: list[int], width: int = 25) -> PlacedMask:
    """1-pixel-tall mask with foreground at the listed columns."""
    row = np.zeros((1, width), dtype=bool)
    row[0, cols] = True
    return PlacedMask.from_crop(width, 1, 0, 0, row)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
