import numpy as np
import pytest

from ris_semcom.codec import (
    BITS_PER_PART,
    decode_frame,
    encode_part,
    frame_mse,
    generate_source,
)
from ris_semcom.reconstruct import PartQuality, detect_broken, inpaint


def decoded_frame(f, object_bits=None, background_bits=None, rng=None):
    bits_bg = encode_part(f.part_background, ~f.object_mask) if background_bits is None else background_bits
    bits_obj = encode_part(f.part_object, f.object_mask) if object_bits is None else object_bits
    return decode_frame(bits_bg, bits_obj, f.object_mask)


def noise_bits(rng):
    return rng.integers(0, 2, BITS_PER_PART).astype(np.uint8)


def test_clean_roundtrip_has_no_bad_parts():
    rng = np.random.default_rng(0)
    f = generate_source(rng, 3)
    quality = detect_broken(decoded_frame(f), f.object_mask, reference=f.image)
    assert not quality.background_bad and not quality.object_bad
    assert quality.method == "reference"


def test_noised_object_is_flagged_bad_background_good():
    rng = np.random.default_rng(1)
    f = generate_source(rng, 7)
    decoded = decoded_frame(f, object_bits=noise_bits(rng))
    quality = detect_broken(decoded, f.object_mask, reference=f.image)
    assert quality.object_bad and not quality.background_bad
    assert quality.object_score > 0.05


def test_exact_threshold_is_good():
    # per-part MSE of exactly 0.05 stays good: strict inequality
    rng = np.random.default_rng(2)
    f = generate_source(rng, 0)
    decoded = f.image.copy()
    region = f.object_mask
    delta = np.sqrt(0.05)
    decoded[region] = np.clip(f.image[region] + 0.0, 0, 1)  # start equal
    # craft an exact-MSE perturbation on the object part
    decoded[region] = f.image[region] + delta * np.sign(0.5 - f.image[region])
    quality = detect_broken(decoded, f.object_mask, reference=f.image)
    assert abs(quality.object_score - 0.05) <= 1e-12
    assert not quality.object_bad


def test_proxy_counts_quantizer_extremes():
    rng = np.random.default_rng(3)
    f = generate_source(rng, 5)
    clean = decoded_frame(f)
    quality = detect_broken(clean, f.object_mask)
    assert quality.method == "proxy"
    assert not quality.object_bad and not quality.background_bad
    # saturate 40% of the object's occupied coefficient bytes to the upper rail
    bits = encode_part(f.part_object, f.object_mask).reshape(-1, 8).copy()
    occupied = np.flatnonzero(
        f.object_mask.reshape(16, 2, 16, 2).sum(axis=(1, 3)).reshape(-1) > 0
    )
    n_extreme = int(0.4 * occupied.size) + 1
    bits[occupied[:n_extreme]] = 1  # byte 255
    railed = decoded_frame(f, object_bits=bits.reshape(-1))
    quality = detect_broken(railed, f.object_mask)
    assert quality.object_bad and not quality.background_bad


def test_inpaint_identity_when_no_bad_parts():
    rng = np.random.default_rng(4)
    f = generate_source(rng, 2)
    decoded = decoded_frame(f)
    quality = detect_broken(decoded, f.object_mask, reference=f.image)
    filled, both_bad = inpaint(decoded, quality, f.object_mask)
    assert not both_bad
    assert np.array_equal(filled, decoded)


def test_inpaint_diffuses_constant_background():
    # bad object on a constant-0.5 background converges to 0.5
    rng = np.random.default_rng(5)
    f = generate_source(rng, 0)
    decoded = np.full_like(f.image, 0.5)
    decoded[f.object_mask] = rng.random((int(f.object_mask.sum()), 3))
    quality = PartQuality(0.0, 1.0, False, True, "reference")
    filled, _ = inpaint(decoded, quality, f.object_mask)
    assert np.max(np.abs(filled[f.object_mask] - 0.5)) <= 0.01


def test_inpaint_preserves_good_part_bit_exactly():
    rng = np.random.default_rng(6)
    f = generate_source(rng, 8)
    decoded = decoded_frame(f, object_bits=noise_bits(rng))
    quality = detect_broken(decoded, f.object_mask, reference=f.image)
    filled, _ = inpaint(decoded, quality, f.object_mask)
    assert np.array_equal(filled[~f.object_mask], decoded[~f.object_mask])
    assert filled.min() >= 0.0 and filled.max() <= 1.0


def test_inpaint_improves_global_mse_on_either_part():
    rng = np.random.default_rng(7)
    for i in range(100):
        f = generate_source(rng, int(rng.integers(10)))
        if i % 2 == 0:
            decoded = decoded_frame(f, object_bits=noise_bits(rng))
        else:
            decoded = decoded_frame(f, background_bits=noise_bits(rng))
        quality = detect_broken(decoded, f.object_mask, reference=f.image)
        assert quality.object_bad != quality.background_bad
        filled, both_bad = inpaint(decoded, quality, f.object_mask)
        assert not both_bad
        assert frame_mse(f.image, filled) <= frame_mse(f.image, decoded)


def test_inpaint_returns_input_when_both_parts_bad():
    rng = np.random.default_rng(8)
    f = generate_source(rng, 1)
    decoded = decoded_frame(f, object_bits=noise_bits(rng), background_bits=noise_bits(rng))
    quality = detect_broken(decoded, f.object_mask, reference=f.image)
    assert quality.object_bad and quality.background_bad
    filled, both_bad = inpaint(decoded, quality, f.object_mask)
    assert both_bad
    assert np.array_equal(filled, decoded)
