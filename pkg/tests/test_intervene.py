import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from propeffect.errors import FormatError, GeometryError, InvalidConfig, OrderError
from propeffect.intervene import (
    ImageStack,
    OperatorSpec,
    background_scale,
    blend_patch,
    generate_stack,
    masked_brightness,
    read_png,
    read_stack,
    round_clamp,
    write_png,
    write_stack,
)

images = st.one_of(
    arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12))),
    arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12), st.sampled_from([3, 4]))),
)


def _image_and_mask(draw_img, seed=0):
    rng = np.random.default_rng(seed)
    mask = (rng.uniform(size=draw_img.shape[:2]) < 0.4).astype(np.uint8) * 255
    return mask


def test_round_half_away_from_zero():
    np.testing.assert_array_equal(round_clamp([0.5, 1.5, 2.5, 254.5, 300.0, -3.0]), [1, 2, 3, 255, 255, 0])


def test_blend_examples():
    base = np.full((4, 4), 100, np.uint8)
    patch = np.full((2, 2), 200, np.uint8)
    mask = np.array([[255, 0], [255, 255]], np.uint8)
    out = blend_patch(base, patch, mask, 0.5, offset=(1, 1))
    assert out[1, 1] == 150 and out[2, 1] == 150 and out[2, 2] == 150
    assert out[1, 2] == 100
    assert np.array_equal(blend_patch(base, patch, mask, 0.0, (1, 1)), base)
    assert blend_patch(base, patch, mask, 1.0, (2, 2))[3, 3] == 200


def test_blend_geometry_errors():
    base = np.zeros((4, 4), np.uint8)
    patch = np.zeros((2, 2), np.uint8)
    with pytest.raises(GeometryError):
        blend_patch(base, patch, np.ones((2, 2), np.uint8), 0.5, offset=(3, 0))
    with pytest.raises(GeometryError):
        blend_patch(base, patch, np.ones((3, 2), np.uint8), 0.5)
    with pytest.raises(GeometryError):
        blend_patch(base, np.zeros((2, 2, 3), np.uint8), np.ones((2, 2), np.uint8), 0.5)
    with pytest.raises(GeometryError):
        blend_patch(base.astype(np.float32), patch, np.ones((2, 2), np.uint8), 0.5)


def test_background_corner_golden():
    # g = exp(-4) at u = (1, 1) with sigma_rel 0.5; 200 * (1 - 0.5 * (1 - g)) = 101.83
    img = np.full((9, 9), 200, np.uint8)
    out = background_scale(img, -0.5, 0.5)
    factor = 1 - 0.5 * (1 - math.exp(-4))
    assert factor == pytest.approx(0.509158, abs=1e-6)
    assert out[0, 0] == out[0, -1] == out[-1, 0] == out[-1, -1] == 102


@pytest.mark.parametrize("strength", [-1.0, -0.3, 0.4, 1.0])
def test_background_center_unchanged(strength):
    img = np.random.default_rng(0).integers(0, 256, (7, 9, 3), dtype=np.uint8)
    out = background_scale(img, strength)
    assert np.array_equal(out[3, 4], img[3, 4])


def test_masked_brightness_examples():
    img = np.full((3, 3), 180, np.uint8)
    mask = np.zeros((3, 3), np.uint8)
    mask[1, 1] = 1
    assert masked_brightness(img, mask, 0.5)[1, 1] == 90
    assert masked_brightness(img, mask, 0.0)[1, 1] == 0
    assert masked_brightness(img, mask, 2.0)[1, 1] == 255
    with pytest.raises(GeometryError):
        masked_brightness(img, np.ones((2, 3)), 0.5)


@settings(max_examples=150, deadline=None)
@given(images)
def test_identity_elements(img):
    mask = _image_and_mask(img)
    assert np.array_equal(background_scale(img, 0.0), img)
    assert np.array_equal(masked_brightness(img, mask, 1.0), img)
    assert np.array_equal(blend_patch(img, np.zeros_like(img), mask, 0.0), img)


@settings(max_examples=150, deadline=None)
@given(images, st.floats(0, 1), st.floats(0, 3), st.integers(0, 2**16))
def test_mask_locality(img, alpha, factor, seed):
    mask = _image_and_mask(img, seed)
    outside = mask == 0
    patch = np.random.default_rng(seed).integers(0, 256, img.shape, dtype=np.uint8)
    assert np.array_equal(blend_patch(img, patch, mask, alpha)[outside], img[outside])
    assert np.array_equal(masked_brightness(img, mask, factor)[outside], img[outside])


@settings(max_examples=150, deadline=None)
@given(images, st.floats(0.01, 1), st.floats(0.05, 2))
def test_monotone_background(img, s, sigma):
    assert np.all(background_scale(img, -s, sigma) <= img)
    assert np.all(background_scale(img, s, sigma) >= img)


def test_stack_examples():
    base = np.random.default_rng(1).integers(0, 256, (8, 8), dtype=np.uint8)
    mask = np.zeros((8, 8), np.uint8)
    mask[2:6, 2:6] = 1
    s = generate_stack(base, OperatorSpec("patch_blend", patch=np.zeros((8, 8), np.uint8), mask=mask), 5, 0, 1)
    np.testing.assert_array_equal(s.values, [0, 0.25, 0.5, 0.75, 1.0])
    assert np.array_equal(s.images[0], base)
    s = generate_stack(base, OperatorSpec("background_gauss"), 3, -0.5, 0.5)
    np.testing.assert_array_equal(s.values, [-0.5, 0, 0.5])
    assert np.array_equal(s.images[1], base)
    s = generate_stack(base, OperatorSpec("fg_brightness", mask=mask), 11, 0.2, 1.0)
    assert len(s) == 11 and s.values[-1] == 1.0
    assert np.array_equal(s.images[-1], base)


def test_stack_errors():
    base = np.zeros((4, 4), np.uint8)
    with pytest.raises(InvalidConfig):
        generate_stack(base, OperatorSpec("background_gauss"), 1, -0.5, 0.5)
    with pytest.raises(InvalidConfig):
        generate_stack(base, OperatorSpec("background_gauss"), 3, -2, 0.5)
    with pytest.raises(InvalidConfig):
        OperatorSpec("blur")
    with pytest.raises(InvalidConfig):
        OperatorSpec("fg_brightness")
    with pytest.raises(OrderError):
        ImageStack([0.0, 0.0], [base, base], "x")
    with pytest.raises(GeometryError):
        ImageStack([0.0, 1.0], [base, np.zeros((3, 3), np.uint8)], "x")


@pytest.mark.parametrize("shape", [(5, 7), (5, 7, 3), (5, 7, 4)])
def test_png_roundtrip(tmp_path, shape):
    img = np.random.default_rng(2).integers(0, 256, shape, dtype=np.uint8)
    write_png(tmp_path / "a.png", img)
    back = read_png(tmp_path / "a.png")
    assert back.dtype == np.uint8 and np.array_equal(back, img)


def test_manifest_roundtrip(tmp_path):
    base = np.random.default_rng(3).integers(0, 256, (10, 12, 3), dtype=np.uint8)
    stack = generate_stack(base, OperatorSpec("background_gauss", sigma_rel=0.7), 6, -1, 1, source="base.png")
    manifest = write_stack(stack, tmp_path / "out")
    data = json.loads(open(manifest).read())
    assert data["operator"] == "background_gauss(sigma_rel=0.7)" and data["source"] == "base.png"
    assert [e["p"] for e in data["entries"]] == stack.values.tolist()
    assert all(not e["path"].startswith("/") for e in data["entries"])
    assert read_stack(manifest).equals(stack)


def test_manifest_errors(tmp_path):
    bad = tmp_path / "m.json"
    bad.write_text("{not json")
    with pytest.raises(FormatError):
        read_stack(bad)
    bad.write_text('{"entries": [{"p": 1}]}')
    with pytest.raises(FormatError):
        read_stack(bad)
