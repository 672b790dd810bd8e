"""Synthetic image interventions and ordered intervention stacks.

Images are ``uint8`` numpy arrays shaped ``(H, W)`` (gray) or ``(H, W, C)``
with C = 3 (RGB) or 4 (RGBA). Masks are ``(H, W)`` ``uint8`` arrays where
any nonzero value marks the region to edit. All operators compute in
float64, round half away from zero and clamp to [0, 255].
"""
import json
import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image as PILImage

from .errors import FormatError, GeometryError, InvalidConfig, OrderError

IDENTITY = {"patch_blend": 0.0, "background_gauss": 0.0, "fg_brightness": 1.0}
PNG_MODES = {2: "L", 3: "RGB", 4: "RGBA"}


def check_image(img) -> np.ndarray:
    a = np.asarray(img)
    if a.dtype != np.uint8:
        raise GeometryError(f"images must be uint8, got {a.dtype}")
    if a.ndim == 2 or (a.ndim == 3 and a.shape[2] in (3, 4)):
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise GeometryError("empty image")
        return a
    raise GeometryError(f"unsupported image shape {a.shape}")


def check_mask(mask, shape) -> np.ndarray:
    m = np.asarray(mask)
    if m.ndim != 2 or m.shape != tuple(shape[:2]):
        raise GeometryError(f"mask shape {m.shape} does not match image {tuple(shape[:2])}")
    return m != 0


def round_clamp(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    r = np.sign(v) * np.floor(np.abs(v) + 0.5)
    return np.clip(r, 0, 255).astype(np.uint8)


def blend_patch(base, patch, mask, alpha: float, offset=(0, 0)) -> np.ndarray:
    """Alpha-blend ``patch`` into ``base`` inside ``mask``.

    ``patch`` and ``mask`` share one shape and are placed with their top-left
    corner at ``offset = (row, col)``; they must lie fully inside ``base``.
    Pixels outside the mask are copied from ``base`` unchanged.
    """
    base = check_image(base)
    patch = check_image(patch)
    if not 0.0 <= alpha <= 1.0:
        raise InvalidConfig(f"alpha must lie in [0, 1], got {alpha}")
    if patch.ndim != base.ndim or patch.shape[2:] != base.shape[2:]:
        raise GeometryError("patch and base have different channel layouts")
    inside = check_mask(mask, patch.shape)
    r0, c0 = (int(v) for v in offset)
    h, w = patch.shape[:2]
    if r0 < 0 or c0 < 0 or r0 + h > base.shape[0] or c0 + w > base.shape[1]:
        raise GeometryError(f"patch of size {h}x{w} at {offset} exceeds base {base.shape[:2]}")

    out = base.copy()
    region = out[r0 : r0 + h, c0 : c0 + w]
    mixed = (1.0 - alpha) * region[inside].astype(np.float64) + alpha * patch[inside].astype(np.float64)
    region[inside] = round_clamp(mixed)
    return out


def gaussian_falloff(height: int, width: int, sigma_rel: float = 0.5) -> np.ndarray:
    """Centered Gaussian over normalized coordinates in [-1, 1]^2, 1 at the center."""
    if sigma_rel <= 0:
        raise InvalidConfig("sigma_rel must be positive")
    uy = np.linspace(-1.0, 1.0, height) if height > 1 else np.zeros(1)
    ux = np.linspace(-1.0, 1.0, width) if width > 1 else np.zeros(1)
    r2 = uy[:, None] ** 2 + ux[None, :] ** 2
    return np.exp(-r2 / (2.0 * sigma_rel**2))


def background_scale(img, strength: float, sigma_rel: float = 0.5) -> np.ndarray:
    """Brighten (strength > 0) or darken (< 0) pixels toward the image border.

    The per-pixel factor is ``1 + strength * (1 - g)`` with ``g`` the centered
    Gaussian, so the exact center is never changed.
    """
    img = check_image(img)
    if not -1.0 <= strength <= 1.0:
        raise InvalidConfig(f"strength must lie in [-1, 1], got {strength}")
    factor = 1.0 + strength * (1.0 - gaussian_falloff(img.shape[0], img.shape[1], sigma_rel))
    if img.ndim == 3:
        factor = factor[:, :, None]
    return round_clamp(factor * img.astype(np.float64))


def masked_brightness(img, mask, factor: float) -> np.ndarray:
    img = check_image(img)
    if factor < 0:
        raise InvalidConfig(f"brightness factor must be >= 0, got {factor}")
    inside = check_mask(mask, img.shape)
    out = img.copy()
    out[inside] = round_clamp(factor * img[inside].astype(np.float64))
    return out


@dataclass
class OperatorSpec:
    """One intervention operator and its fixed parameters.

    The swept parameter (alpha, strength or factor) is not stored on the operator;
    :func:`generate_stack` supplies it.
    """

    kind: str
    patch: np.ndarray | None = None
    mask: np.ndarray | None = None
    offset: tuple = (0, 0)
    sigma_rel: float = 0.5

    def __post_init__(self):
        if self.kind not in IDENTITY:
            raise InvalidConfig(f"unknown operator {self.kind!r}")
        if self.kind == "patch_blend" and (self.patch is None or self.mask is None):
            raise InvalidConfig("patch_blend needs a patch and a mask")
        if self.kind == "fg_brightness" and self.mask is None:
            raise InvalidConfig("fg_brightness needs a mask")
        if self.sigma_rel <= 0:
            raise InvalidConfig("sigma_rel must be positive")

    @property
    def legal_range(self):
        return {"patch_blend": (0.0, 1.0), "background_gauss": (-1.0, 1.0), "fg_brightness": (0.0, np.inf)}[self.kind]

    def describe(self) -> str:
        if self.kind == "patch_blend":
            return f"patch_blend(offset={tuple(int(v) for v in self.offset)})"
        if self.kind == "background_gauss":
            return f"background_gauss(sigma_rel={self.sigma_rel!r})"
        return "fg_brightness"

    def apply(self, img, value: float) -> np.ndarray:
        if self.kind == "patch_blend":
            return blend_patch(img, self.patch, self.mask, value, self.offset)
        if self.kind == "background_gauss":
            return background_scale(img, value, self.sigma_rel)
        return masked_brightness(img, self.mask, value)


@dataclass(eq=False)
class ImageStack:
    values: np.ndarray
    images: list
    operator: str
    source: str = ""
    paths: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size != len(self.images):
            raise GeometryError("one property value per image is required")
        if self.values.size == 0:
            raise GeometryError("empty stack")
        if np.any(np.diff(self.values) <= 0):
            raise OrderError("stack property values must be strictly increasing")
        shapes = {np.asarray(im).shape for im in self.images}
        if len(shapes) != 1:
            raise GeometryError(f"stack images differ in shape: {sorted(shapes)}")
        self.images = [check_image(im) for im in self.images]

    def __len__(self):
        return len(self.images)

    def __iter__(self):
        return iter(zip(self.values.tolist(), self.images))

    def equals(self, other: "ImageStack") -> bool:
        return (
            self.operator == other.operator
            and self.source == other.source
            and np.array_equal(self.values, other.values)
            and all(np.array_equal(a, b) and a.dtype == b.dtype for a, b in zip(self.images, other.images))
        )


def generate_stack(base, spec: OperatorSpec, steps: int, lo: float, hi: float, source: str = "") -> ImageStack:
    """Apply ``spec`` at ``steps`` equidistant parameter values from ``lo`` to ``hi``."""
    base = check_image(base)
    if steps < 2:
        raise InvalidConfig("a stack needs at least 2 steps")
    legal_lo, legal_hi = spec.legal_range
    if not (legal_lo <= lo < hi <= legal_hi):
        raise InvalidConfig(f"range [{lo}, {hi}] is not an increasing subrange of [{legal_lo}, {legal_hi}]")
    values = np.linspace(lo, hi, steps)
    images = [spec.apply(base, float(v)) for v in values]
    return ImageStack(values, images, spec.describe(), source)


def read_png(path) -> np.ndarray:
    with PILImage.open(path) as im:
        if im.mode not in ("L", "RGB", "RGBA"):
            im = im.convert("RGBA" if "A" in im.mode else "RGB")
        return np.array(im, dtype=np.uint8)


def write_png(path, img) -> None:
    img = check_image(img)
    PILImage.fromarray(img).save(path, format="PNG")


def write_stack(stack: ImageStack, outdir, prefix: str = "step") -> str:
    """Write one PNG per entry plus ``manifest.json``; returns the manifest path.

    Entry paths in the manifest are relative to the manifest's directory.
    """
    os.makedirs(outdir, exist_ok=True)
    entries = []
    width = max(3, len(str(len(stack) - 1)))
    paths = []
    for i, (p, img) in enumerate(stack):
        name = f"{prefix}_{i:0{width}d}.png"
        write_png(os.path.join(outdir, name), img)
        entries.append({"p": float(p), "path": name})
        paths.append(os.path.abspath(os.path.join(outdir, name)))
    manifest = {"operator": stack.operator, "source": stack.source, "entries": entries}
    path = os.path.join(outdir, "manifest.json")
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    os.replace(tmp, path)
    stack.paths = paths
    return path


def read_stack(manifest_path) -> ImageStack:
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest is not valid JSON: {exc.msg}", exc.lineno) from None
    if not isinstance(manifest, dict) or not isinstance(manifest.get("entries"), list):
        raise FormatError("manifest needs an 'entries' list")
    root = os.path.dirname(os.path.abspath(manifest_path))
    values, images, paths = [], [], []
    for entry in manifest["entries"]:
        try:
            p, rel = float(entry["p"]), str(entry["path"])
        except (KeyError, TypeError, ValueError):
            raise FormatError(f"malformed manifest entry {entry!r}") from None
        full = rel if os.path.isabs(rel) else os.path.join(root, rel)
        values.append(p)
        images.append(read_png(full))
        paths.append(os.path.abspath(full))
    stack = ImageStack(values, images, str(manifest.get("operator", "")), str(manifest.get("source", "")))
    stack.paths = paths
    return stack
