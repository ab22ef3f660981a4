"""Maps between binary feature masks and model inputs.

Images are split into an exact grid of square-ish patches; absent patches are
filled with a neutral baseline (0.5 per channel by default, pixels normalized to
[0, 1]). Generic vectors use per-feature baseline substitution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RAW_TENSOR_MAGIC = "RT1"
DEFAULT_PIXEL_BASELINE = 0.5


def as_mask(bits) -> np.ndarray:
    mask = np.asarray(bits)
    if mask.ndim != 1 or mask.size < 2:
        raise ValueError(f"feature mask must be 1-d with >= 2 features, got shape {mask.shape}")
    if not np.isin(mask, (0, 1)).all():
        raise ValueError("feature mask entries must be 0 or 1")
    return mask.astype(np.uint8)


def full_mask(feature_count: int) -> np.ndarray:
    return np.ones(feature_count, dtype=np.uint8)


def mask_key(mask) -> bytes:
    """Hashable cache key for a mask."""
    return np.asarray(mask, dtype=np.uint8).tobytes()


@dataclass(frozen=True)
class PatchGrid:
    """Square partition of an image: `side` x `side` patches, row-major feature order.

    Feature i covers patch row i // side, patch column i % side.
    """

    height: int
    width: int
    channels: int
    side: int

    @property
    def patch_height(self) -> int:
        return self.height // self.side

    @property
    def patch_width(self) -> int:
        return self.width // self.side

    @property
    def feature_count(self) -> int:
        return self.side * self.side


def grid_partition(height: int, width: int, channels: int, side: int) -> PatchGrid:
    """Partition an image into side*side patches; dimensions must divide exactly."""
    if side < 2:
        raise ValueError("need at least 2 patches per side")
    if height % side != 0 or width % side != 0:
        raise ValueError(f"patch count {side} does not divide image dimensions {height}x{width}")
    if channels < 1:
        raise ValueError("channels must be >= 1")
    return PatchGrid(height=height, width=width, channels=channels, side=side)


def _baseline_channels(baseline, channels: int) -> np.ndarray:
    values = np.asarray(baseline, dtype=float)
    if values.ndim == 0:
        values = np.full(channels, float(values))
    if values.shape != (channels,):
        raise ValueError(f"baseline must be a scalar or one value per channel, got shape {values.shape}")
    if values.min() < 0.0 or values.max() > 1.0:
        raise ValueError("baseline values must lie in [0, 1]")
    return values


def apply_mask(image, grid: PatchGrid, mask, baseline=DEFAULT_PIXEL_BASELINE) -> np.ndarray:
    """Return a copy of `image` with every masked-out patch filled by the baseline."""
    img = np.asarray(image, dtype=float)
    if img.shape != (grid.height, grid.width, grid.channels):
        raise ValueError(f"image shape {img.shape} does not match grid {grid}")
    mask = as_mask(mask)
    if mask.size != grid.feature_count:
        raise ValueError(f"mask length {mask.size} != feature count {grid.feature_count}")
    fill = _baseline_channels(baseline, grid.channels)

    out = img.copy()
    patches = out.reshape(grid.side, grid.patch_height, grid.side, grid.patch_width, grid.channels)
    rows, cols = np.nonzero(mask.reshape(grid.side, grid.side) == 0)
    patches[rows, :, cols, :, :] = fill
    return out


def vector_apply_mask(x, mask, baseline) -> np.ndarray:
    """Entry i of the result is x[i] where the mask bit is 1, baseline[i] where it is 0."""
    x = np.asarray(x, dtype=float)
    baseline = np.asarray(baseline, dtype=float)
    mask = as_mask(mask)
    if x.shape != baseline.shape or x.shape != (mask.size,):
        raise ValueError(f"length mismatch: x {x.shape}, baseline {baseline.shape}, mask {mask.shape}")
    return np.where(mask == 1, x, baseline)


def from_uint8(image) -> np.ndarray:
    """Normalize an 8-bit image to floats in [0, 1]."""
    return np.asarray(image, dtype=float) / 255.0


class ImageFeaturizer:
    """Patch-grid featurizer: mask bits select which patches of the instance survive."""

    def __init__(self, grid: PatchGrid, baseline=DEFAULT_PIXEL_BASELINE):
        self.grid = grid
        self.baseline = _baseline_channels(baseline, grid.channels)

    @property
    def feature_count(self) -> int:
        return self.grid.feature_count

    def mask_to_input(self, x, mask) -> np.ndarray:
        return apply_mask(x, self.grid, mask, self.baseline)


class VectorFeaturizer:
    """Pass-through featurizer for generic vectors with per-feature baselines."""

    def __init__(self, feature_count: int, baseline=None):
        if feature_count < 2:
            raise ValueError("need at least 2 features")
        self.feature_count = feature_count
        if baseline is None:
            baseline = np.zeros(feature_count)
        self.baseline = np.asarray(baseline, dtype=float)
        if self.baseline.shape != (feature_count,):
            raise ValueError(f"baseline must have one entry per feature, got {self.baseline.shape}")

    def mask_to_input(self, x, mask) -> np.ndarray:
        return vector_apply_mask(x, mask, self.baseline)


def write_raw_tensor(path, array) -> None:
    """Write the RT1 format: ASCII header line, then little-endian float32 values."""
    arr = np.asarray(array, dtype=np.float32)
    if arr.ndim == 1:
        arr = arr[:, None, None]
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"raw tensors are rank 3 (height, width, channels), got shape {arr.shape}")
    height, width, channels = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"{RAW_TENSOR_MAGIC} {height} {width} {channels}\n".encode("ascii"))
        fh.write(arr.astype("<f4").tobytes(order="C"))


def read_raw_tensor(path) -> np.ndarray:
    """Read an RT1 file back into a float64 (height, width, channels) array."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").strip()
        parts = header.split()
        if len(parts) != 4 or parts[0] != RAW_TENSOR_MAGIC:
            raise ValueError(f"not a raw tensor file (header {header!r})")
        height, width, channels = (int(p) for p in parts[1:])
        expected = height * width * channels
        payload = fh.read(4 * expected)
        if len(payload) != 4 * expected:
            raise ValueError(f"raw tensor payload truncated: expected {expected} floats")
        data = np.frombuffer(payload, dtype="<f4")
    return data.reshape(height, width, channels).astype(float)
