"""Synthetic semantic source, reference part codec, classifier, and MSE.

The source is a 32x32x3 image in [0, 1]: a smooth dark background field plus
one of ten bright stencil shapes (the object) placed at a random offset. The
stencil identity is the class label. Segmentation is by construction exact,
so the codec and the control loop can be validated without a trained
vision stack.

Codec data format (frozen):
    Each part (a masked image) is reduced to a 16x16 grid of coefficients,
    one per 2x2-pixel block. A coefficient is the mean of the supported
    scalar samples in its block (up to 2*2 pixels x 3 channels, i.e. the
    block's luminance over the part's own support); blocks without support
    encode 0. Coefficients are quantized uniformly to 8 bits on [0, 1] and
    emitted row-major, most significant bit first: 256 bytes = 2048 bits per
    part. Decoding writes each coefficient back to the supported pixels of
    its block on all three channels.

Classification reads only the object region: the decoded luminance at the
mask's pixels is thresholded at 0.5 and matched against the ten stencils by
Hamming distance, lowest index winning ties.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

IMAGE_SIZE = 32
CHANNELS = 3
TEMPLATE_SIZE = 16
BLOCK = 2
COEFF_GRID = IMAGE_SIZE // BLOCK
N_COEFFS = COEFF_GRID * COEFF_GRID
BITS_PER_PART = N_COEFFS * 8
N_CLASSES = 10

_BG_LUMA = (0.36, 0.46)
_OBJ_LUMA_BASE = 0.54
_OBJ_LUMA_STEP = 0.006
_OBJ_PIXEL_NOISE = 0.015
_BINARIZE_THRESHOLD = 0.5

# per-class chroma offsets, zero-sum so the luminance is the class base
_CHROMA = np.array(
    [
        [0.03, 0.0, -0.03],
        [-0.03, 0.03, 0.0],
        [0.0, -0.03, 0.03],
        [0.03, -0.03, 0.0],
        [0.0, 0.03, -0.03],
        [-0.03, 0.0, 0.03],
        [0.02, 0.02, -0.04],
        [-0.04, 0.02, 0.02],
        [0.02, -0.04, 0.02],
        [0.0, 0.0, 0.0],
    ]
)


@dataclass
class SemanticFrame:
    """One source image with its oracle segmentation and codec payloads."""

    image: np.ndarray
    object_mask: np.ndarray
    class_label: int
    part_background: np.ndarray | None = None
    part_object: np.ndarray | None = None
    bits_background: np.ndarray | None = None
    bits_object: np.ndarray | None = None
    decoded: np.ndarray | None = None


@lru_cache(maxsize=1)
def object_templates() -> np.ndarray:
    """The ten 16x16 binary stencils, one per class label.

    Every stencil touches all four edges of its bounding box (so the box is
    recoverable from a placed mask), covers 10-25% of the image after
    placement, and is far from the others: pairwise Hamming distance >= 64
    and at least 30 pixels of each stencil lie outside any other.
    """
    n = TEMPLATE_SIZE
    r, c = np.mgrid[0:n, 0:n].astype(float)
    rad = np.hypot(r - 7.5, c - 7.5)
    shapes = []
    corners = np.zeros((n, n), bool)
    corners[:6, :6] = corners[:6, -6:] = corners[-6:, :6] = corners[-6:, -6:] = True
    shapes.append(corners)
    shapes.append((rad <= 7.9) & (rad >= 4.6))
    frame = np.zeros((n, n), bool)
    frame[:3, :] = frame[-3:, :] = frame[:, :3] = frame[:, -3:] = True
    shapes.append(frame)
    plus = np.zeros((n, n), bool)
    plus[6:10, :] = True
    plus[:, 6:10] = True
    shapes.append(plus)
    shapes.append((np.abs(r - c) <= 2) | (np.abs(r + c - 15) <= 2))
    h_stripes = np.zeros((n, n), bool)
    for start in (0, 7, 13):
        h_stripes[start : start + 3, :] = True
    shapes.append(h_stripes)
    v_stripes = np.zeros((n, n), bool)
    for start in (0, 7, 13):
        v_stripes[:, start : start + 3] = True
    shapes.append(v_stripes)
    shapes.append(((r // 4).astype(int) + (c // 4).astype(int)) % 2 == 0)
    shapes.append(r >= c)
    h_bar = np.zeros((n, n), bool)
    h_bar[:, :4] = True
    h_bar[:, -4:] = True
    h_bar[6:10, :] = True
    shapes.append(h_bar)
    out = np.array(shapes)
    out.setflags(write=False)
    return out


def _bilinear_upsample(grid: np.ndarray, size: int) -> np.ndarray:
    """Bilinear interpolation of a small square grid onto size x size."""
    n = grid.shape[0]
    coords = np.linspace(0.0, n - 1.0, size)
    i0 = np.floor(coords).astype(int)
    i1 = np.minimum(i0 + 1, n - 1)
    frac = coords - i0
    rows = grid[i0][:, i0] * np.outer(1 - frac, 1 - frac)
    rows += grid[i0][:, i1] * np.outer(1 - frac, frac)
    rows += grid[i1][:, i0] * np.outer(frac, 1 - frac)
    rows += grid[i1][:, i1] * np.outer(frac, frac)
    return rows


def generate_source(rng: np.random.Generator, class_label: int) -> SemanticFrame:
    """Draw one frame: smooth background plus the class stencil at a random offset."""
    if not 0 <= class_label < N_CLASSES:
        raise ValueError(f"class_label must be in [0, {N_CLASSES - 1}], got {class_label}")
    lo, hi = _BG_LUMA
    field_vals = lo + rng.random((4, 4)) * (hi - lo)
    background = _bilinear_upsample(field_vals, IMAGE_SIZE)
    image = np.repeat(background[:, :, None], CHANNELS, axis=2)

    template = object_templates()[class_label]
    offset_r, offset_c = rng.integers(0, IMAGE_SIZE - TEMPLATE_SIZE + 1, size=2)
    mask = np.zeros((IMAGE_SIZE, IMAGE_SIZE), dtype=bool)
    mask[offset_r : offset_r + TEMPLATE_SIZE, offset_c : offset_c + TEMPLATE_SIZE] = template

    base = _OBJ_LUMA_BASE + _OBJ_LUMA_STEP * class_label + _CHROMA[class_label]
    noise = rng.uniform(-_OBJ_PIXEL_NOISE, _OBJ_PIXEL_NOISE, size=(IMAGE_SIZE, IMAGE_SIZE, CHANNELS))
    obj = np.clip(base[None, None, :] + noise, 0.0, 1.0)
    image = np.where(mask[:, :, None], obj, image)
    frame = SemanticFrame(image=image, object_mask=mask, class_label=int(class_label))
    frame.part_background, frame.part_object = segment(frame)
    return frame


def segment(frame: SemanticFrame) -> tuple[np.ndarray, np.ndarray]:
    """Pixelwise partition: (image * (1-mask), image * mask)."""
    mask3 = frame.object_mask[:, :, None]
    return frame.image * (~frame.object_mask)[:, :, None], frame.image * mask3


def _infer_support(part: np.ndarray) -> np.ndarray:
    return np.any(part > 0, axis=2)


def _block_counts(support: np.ndarray) -> np.ndarray:
    return support.reshape(COEFF_GRID, BLOCK, COEFF_GRID, BLOCK).sum(axis=(1, 3))


def encode_part(part: np.ndarray, support: np.ndarray | None = None) -> np.ndarray:
    """Quantize a masked image into its 2048-bit codeword.

    ``support`` is the pixel set the part lives on; by default it is inferred
    from nonzero pixels. Each 2x2 block's supported samples are averaged
    (all three channels folded into one luminance coefficient), quantized to
    8 bits, and packed row-major MSB-first.
    """
    if part.shape != (IMAGE_SIZE, IMAGE_SIZE, CHANNELS):
        raise ValueError(f"expected {(IMAGE_SIZE, IMAGE_SIZE, CHANNELS)} part, got {part.shape}")
    if support is None:
        support = _infer_support(part)
    luma_sum = (part * support[:, :, None]).sum(axis=2)
    block_sum = luma_sum.reshape(COEFF_GRID, BLOCK, COEFF_GRID, BLOCK).sum(axis=(1, 3))
    counts = _block_counts(support) * CHANNELS
    coeff = np.divide(block_sum, counts, out=np.zeros_like(block_sum), where=counts > 0)
    q = np.clip(np.floor(coeff * 255.0 + 0.5), 0, 255).astype(np.uint8)
    return np.unpackbits(q.reshape(-1))


def decode_part(bits: np.ndarray, support: np.ndarray) -> np.ndarray:
    """Inverse of :func:`encode_part`: dequantize, upsample, mask to support."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size != BITS_PER_PART:
        raise ValueError(f"expected {BITS_PER_PART} bits, got {bits.size}")
    q = np.packbits(bits).reshape(COEFF_GRID, COEFF_GRID)
    values = q.astype(np.float64) / 255.0
    upsampled = np.repeat(np.repeat(values, BLOCK, axis=0), BLOCK, axis=1)
    plane = upsampled * support
    return np.repeat(plane[:, :, None], CHANNELS, axis=2)


def decode_frame(
    bits_background: np.ndarray, bits_object: np.ndarray, mask: np.ndarray
) -> np.ndarray:
    """Decode both parts, recombine via the mask, clamp to [0, 1]."""
    background = decode_part(bits_background, ~mask)
    obj = decode_part(bits_object, mask)
    return np.clip(background + obj, 0.0, 1.0)


def mask_bounding_box(mask: np.ndarray) -> tuple[int, int]:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise ValueError("empty mask has no bounding box")
    return int(rows[0]), int(cols[0])


def classify(
    image: np.ndarray, mask: np.ndarray, class_label: int | None = None
) -> tuple[int, bool | None]:
    """Nearest-stencil match on the binarized object region.

    The decoded luminance at the mask's pixels is thresholded at 0.5 and
    compared to every stencil over those same pixels; the lowest-index
    minimum-distance stencil wins. Returns ``(predicted, correct)`` where
    ``correct`` is None when no true label is supplied.
    """
    top, left = mask_bounding_box(mask)
    window = mask[top : top + TEMPLATE_SIZE, left : left + TEMPLATE_SIZE]
    luma = image[top : top + TEMPLATE_SIZE, left : left + TEMPLATE_SIZE].mean(axis=2)
    binarized = luma[window] > _BINARIZE_THRESHOLD
    templates = object_templates()
    distances = [int(np.sum(binarized != t[window])) for t in templates]
    predicted = int(np.argmin(distances))
    if class_label is None:
        return predicted, None
    return predicted, predicted == int(class_label)


def frame_mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared per-pixel-per-channel difference."""
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((np.asarray(a, dtype=np.float64) - b) ** 2))


def save_frame(frame: SemanticFrame, path: str) -> None:
    """Serialize to the flat layout: H, W, C, label; image; mask; part bits."""
    if frame.bits_background is None or frame.bits_object is None:
        raise ValueError("frame has no encoded bits to serialize")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4I", IMAGE_SIZE, IMAGE_SIZE, CHANNELS, frame.class_label))
        fh.write(frame.image.astype("<f8").tobytes())
        fh.write(frame.object_mask.astype(np.uint8).tobytes())
        fh.write(np.packbits(frame.bits_background).tobytes())
        fh.write(np.packbits(frame.bits_object).tobytes())


def load_frame(path: str) -> SemanticFrame:
    with open(path, "rb") as fh:
        h, w, c, label = struct.unpack("<4I", fh.read(16))
        if (h, w, c) != (IMAGE_SIZE, IMAGE_SIZE, CHANNELS):
            raise ValueError(f"unsupported frame dimensions {(h, w, c)}")
        image = np.frombuffer(fh.read(h * w * c * 8), dtype="<f8").reshape(h, w, c).copy()
        mask = np.frombuffer(fh.read(h * w), dtype=np.uint8).reshape(h, w).astype(bool)
        bits_bg = np.unpackbits(np.frombuffer(fh.read(N_COEFFS), dtype=np.uint8))
        bits_obj = np.unpackbits(np.frombuffer(fh.read(N_COEFFS), dtype=np.uint8))
    frame = SemanticFrame(image=image, object_mask=mask, class_label=int(label))
    frame.part_background, frame.part_object = segment(frame)
    frame.bits_background, frame.bits_object = bits_bg, bits_obj
    return frame
