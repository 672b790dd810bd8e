"""Getting model outputs for intervention stacks.

Three adapters share one contract: ``evaluate(stack)`` returns a
``(len(stack), n_outputs)`` float array and ``output_names`` labels the
columns. :func:`eval_stack` turns one column into an
:class:`~propeffect.series.InterventionSeries`.

The toy classifier is a two-feature logistic model over 32x32 gray scenes
showing a disk or a square. Its output is the probability of ``disk``.
"""
import csv
import json
import math
import os
import subprocess
import tempfile
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import (
    EvalError,
    FeatureError,
    FormatError,
    InvalidConfig,
    OrderError,
    PropEffectError,
    ShapeMismatch,
)
from .intervene import ImageStack, check_image, write_png
from .series import InterventionSeries

SCENE_SIZE = 32
BACKGROUND = 128
BIASES = ("none", "dark_disk", "dark_square")
FEATURES = ("bbox_fill_ratio", "mean_fg_intensity")
LABELS = ("square", "disk")  # index = class id


# ---------------------------------------------------------------- series CSV


def load_series_csv(path, selector: str = "output") -> InterventionSeries:
    """Read a ``property,<output columns...>`` CSV into a series.

    ``selector`` names the output column to use.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError("empty file", 1)
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "property":
        raise FormatError("first column must be 'property'", 1)
    if selector not in header[1:]:
        raise FormatError(f"no column {selector!r} in header {header}", 1)
    col = header.index(selector)
    grid, outputs = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise FormatError(f"expected {len(header)} fields, got {len(row)}", lineno)
        try:
            p, y = float(row[0]), float(row[col])
        except ValueError:
            raise FormatError(f"cannot parse {row[0]!r} / {row[col]!r} as numbers", lineno) from None
        if not (math.isfinite(p) and math.isfinite(y)):
            raise FormatError("non-finite value", lineno)
        if grid and p <= grid[-1]:
            raise OrderError(f"line {lineno}: property {p!r} does not increase (previous {grid[-1]!r})")
        grid.append(p)
        outputs.append(y)
    if not grid:
        raise FormatError("no data rows", 2)
    return InterventionSeries(grid, outputs, selector)


def write_series_csv(series: InterventionSeries, path, extra: dict | None = None) -> None:
    """Write ``property,<label>`` (plus optional extra output columns)."""
    columns = {series.output_label: series.outputs}
    columns.update(extra or {})
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["property", *columns])
        for i, p in enumerate(series.grid):
            w.writerow([repr(float(p)), *(repr(float(c[i])) for c in columns.values())])
    os.replace(tmp, path)


# ---------------------------------------------------------------- adapters


class ModelAdapter:
    kind = "abstract"
    output_names: tuple = ()

    def evaluate(self, stack: ImageStack) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind}


class CsvAdapter(ModelAdapter):
    """Outputs computed elsewhere, one CSV row per stack entry; images are ignored."""

    kind = "csv_precomputed"

    def __init__(self, path):
        self.path = str(path)
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
        if not rows or rows[0][0].strip() != "property":
            raise FormatError("first column must be 'property'", 1)
        self.output_names = tuple(h.strip() for h in rows[0][1:])
        try:
            self.table = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=np.float64)
        except ValueError as exc:
            raise FormatError(str(exc)) from None

    def evaluate(self, stack):
        if self.table.shape[0] != len(stack):
            raise ShapeMismatch(f"{self.table.shape[0]} precomputed rows for a stack of {len(stack)}")
        return self.table.copy()

    def describe(self):
        return {"kind": self.kind, "path": self.path}


class CommandAdapter(ModelAdapter):
    """Run an external model process once per stack.

    Protocol: one absolute image path per line on the child's stdin; the
    child prints one line of space-separated floats per path, in order, and
    exits with status 0.
    """

    kind = "external_command"

    def __init__(self, argv, output_names=None, timeout: float | None = 600):
        self.argv = list(argv) if not isinstance(argv, str) else [argv]
        self.output_names = tuple(output_names or ())
        self.timeout = timeout

    def evaluate(self, stack):
        with tempfile.TemporaryDirectory(prefix="propeffect-") as tmp:
            paths = list(stack.paths) if len(stack.paths) == len(stack) else []
            if not paths:
                for i, img in enumerate(stack.images):
                    p = os.path.join(tmp, f"entry_{i:04d}.png")
                    write_png(p, img)
                    paths.append(p)
            request = "".join(os.path.abspath(p) + "\n" for p in paths)
            try:
                proc = subprocess.run(
                    self.argv, input=request, capture_output=True, text=True, timeout=self.timeout
                )
            except (OSError, subprocess.TimeoutExpired) as exc:
                raise EvalError(f"could not run {self.argv}: {exc}", 0) from None
        lines = proc.stdout.splitlines()
        rows = []
        for i in range(len(stack)):
            if i >= len(lines):
                raise EvalError("model process ended before answering", i)
            try:
                row = [float(tok) for tok in lines[i].split()]
            except ValueError:
                raise EvalError(f"non-numeric answer {lines[i]!r}", i) from None
            if not row or not all(math.isfinite(v) for v in row):
                raise EvalError(f"empty or non-finite answer {lines[i]!r}", i)
            if rows and len(row) != len(rows[0]):
                raise EvalError(f"answer has {len(row)} values, expected {len(rows[0])}", i)
            rows.append(row)
        if proc.returncode != 0:
            raise EvalError(f"model process exited with status {proc.returncode}: {proc.stderr.strip()[:200]}")
        out = np.array(rows, dtype=np.float64)
        if not self.output_names:
            self.output_names = tuple(f"output_{j}" for j in range(out.shape[1]))
        return out

    def describe(self):
        return {"kind": self.kind, "argv": self.argv}


class ToyAdapter(ModelAdapter):
    """Built-in toy classifier; columns are ``disk`` and ``square`` probabilities.

    With ``mask`` set, features are measured on that region instead of a
    binarized foreground.
    """

    kind = "toy"
    output_names = ("disk", "square")

    def __init__(self, classifier: "ToyClassifier", mask=None):
        self.classifier = classifier
        self.mask = None if mask is None else np.asarray(mask)

    def evaluate(self, stack):
        out = np.empty((len(stack), 2))
        for i, img in enumerate(stack.images):
            try:
                p = self.classifier.predict_image(img, self.mask)
            except PropEffectError as exc:
                raise EvalError(f"{exc.kind}: {exc}", i) from None
            out[i] = (p, 1.0 - p)
        return out

    def describe(self):
        return {"kind": self.kind, "masked": self.mask is not None}


def eval_stack(adapter: ModelAdapter, stack: ImageStack, selector=0) -> InterventionSeries:
    """Evaluate every stack entry and keep one output component.

    ``selector`` is a column index or one of ``adapter.output_names``.
    """
    if len(stack) == 0:
        raise InvalidConfig("empty stack")
    out = np.asarray(adapter.evaluate(stack), dtype=np.float64)
    if out.ndim != 2 or out.shape[0] != len(stack):
        raise ShapeMismatch(f"adapter returned shape {out.shape} for {len(stack)} entries")
    names = tuple(adapter.output_names)
    if isinstance(selector, str):
        if selector not in names:
            raise InvalidConfig(f"unknown output {selector!r}; adapter provides {names}")
        j = names.index(selector)
    else:
        j = int(selector)
        if not 0 <= j < out.shape[1]:
            raise InvalidConfig(f"output index {j} out of range for {out.shape[1]} outputs")
    label = names[j] if j < len(names) else f"output_{j}"
    bad = np.flatnonzero(~np.isfinite(out[:, j]))
    if bad.size:
        raise EvalError("non-finite model output", int(bad[0]))
    return InterventionSeries(stack.values, out[:, j], label)


# ---------------------------------------------------------------- toy scenes


@dataclass(eq=False)
class SyntheticScene:
    image: np.ndarray
    label: str
    fg_mask: np.ndarray
    fg_brightness: int


def _brightness_range(bias: str, label: str):
    if bias == "none":
        return 10, 245
    dark = (bias == "dark_disk") == (label == "disk")
    return (10, 80) if dark else (175, 245)


def draw_scene(label: str, brightness: int, rng: np.random.Generator, noise: float = 4.0) -> SyntheticScene:
    """One 32x32 scene: noisy mid-gray background with a roughly centered shape."""
    n = SCENE_SIZE
    cy, cx = (n - 1) / 2 + rng.integers(-2, 3, size=2)
    yy, xx = np.mgrid[0:n, 0:n]
    if label == "disk":
        r = rng.uniform(8.0, 11.0)
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    elif label == "square":
        h = rng.uniform(7.0, 10.0)
        mask = (np.abs(yy - cy) <= h) & (np.abs(xx - cx) <= h)
    else:
        raise InvalidConfig(f"unknown shape {label!r}")
    img = BACKGROUND + noise * rng.standard_normal((n, n))
    img[mask] = brightness + noise * rng.standard_normal(int(mask.sum()))
    return SyntheticScene(
        np.clip(np.rint(img), 0, 255).astype(np.uint8), label, mask.astype(np.uint8) * 255, int(brightness)
    )


def synth_dataset(bias: str, n: int, seed: int) -> list:
    """``n/2`` disks and ``n/2`` squares whose brightness follows ``bias``."""
    if bias not in BIASES:
        raise InvalidConfig(f"bias must be one of {BIASES}, got {bias!r}")
    if n < 2 or n % 2:
        raise InvalidConfig("n must be an even number >= 2")
    rng = np.random.default_rng(seed)
    labels = ["disk", "square"] * (n // 2)
    scenes = []
    for label in labels:
        lo, hi = _brightness_range(bias, label)
        scenes.append(draw_scene(label, int(rng.integers(lo, hi + 1)), rng))
    return scenes


def foreground(image, mask=None) -> np.ndarray:
    """Boolean foreground: the given mask, or pixels deviating > 3 sigma from the background.

    Background statistics come from the 2-pixel image border; the largest
    connected component of the deviating pixels is kept.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3:
        img = img[..., :3].mean(axis=2)
    if mask is not None:
        m = np.asarray(mask)
        if m.shape != img.shape:
            raise FeatureError(f"mask shape {m.shape} does not match image {img.shape}")
        return m != 0
    border = np.concatenate([img[:2].ravel(), img[-2:].ravel(), img[2:-2, :2].ravel(), img[2:-2, -2:].ravel()])
    mu, sigma = border.mean(), max(border.std(), 1.0)
    candidate = np.abs(img - mu) > 3.0 * sigma
    labels, count = ndimage.label(candidate)
    if count == 0:
        return candidate
    sizes = ndimage.sum_labels(candidate, labels, index=np.arange(1, count + 1))
    return labels == (1 + int(np.argmax(sizes)))


def extract_features(image, mask=None) -> np.ndarray:
    """``[bbox_fill_ratio, mean_fg_intensity / 255]`` of the foreground."""
    img = np.asarray(image)
    fg = foreground(img, mask)
    if not fg.any():
        raise FeatureError("no foreground found")
    rows, cols = np.flatnonzero(fg.any(axis=1)), np.flatnonzero(fg.any(axis=0))
    area = (rows[-1] - rows[0] + 1) * (cols[-1] - cols[0] + 1)
    gray = img.astype(np.float64)
    if gray.ndim == 3:
        gray = gray[..., :3].mean(axis=2)
    return np.array([fg.sum() / area, gray[fg].mean() / 255.0])


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z)))


@dataclass
class ToyClassifier:
    weights: np.ndarray
    bias: float = 0.0
    feature_spec: str = ",".join(FEATURES)
    train_accuracy: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)

    def predict_proba(self, features) -> np.ndarray:
        """Probability of ``disk`` for each feature row."""
        return _sigmoid(np.asarray(features, dtype=np.float64) @ self.weights + self.bias)

    def predict_image(self, image, mask=None) -> float:
        check_image(image)
        return float(self.predict_proba(extract_features(image, mask)))

    def to_json(self) -> str:
        return json.dumps(
            {"weights": self.weights.tolist(), "bias": float(self.bias), "feature_spec": self.feature_spec}
        )

    @classmethod
    def from_json(cls, text: str) -> "ToyClassifier":
        try:
            d = json.loads(text)
            return cls(np.array(d["weights"], dtype=np.float64), float(d["bias"]), str(d["feature_spec"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"invalid toy classifier JSON: {exc}") from None

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "ToyClassifier":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def scene_features(scenes) -> tuple:
    X = np.array([extract_features(s.image, s.fg_mask) for s in scenes])
    y = np.array([LABELS.index(s.label) for s in scenes], dtype=np.float64)
    return X, y


def train_toy(dataset, epochs: int = 500, lr: float = 0.5, seed: int = 0) -> ToyClassifier:
    """Full-batch gradient descent on mean cross-entropy, starting from zeros.

    Features are measured on each scene's own mask. The procedure has no
    random component; ``seed`` is recorded for provenance only.
    """
    if not dataset:
        raise InvalidConfig("empty training set")
    X, y = scene_features(dataset)
    if np.unique(y).size < 2:
        raise InvalidConfig("training set must contain both classes")
    w = np.zeros(X.shape[1])
    b = 0.0
    for _ in range(int(epochs)):
        err = _sigmoid(X @ w + b) - y
        w = w - lr * (X.T @ err) / y.size
        b = b - lr * err.mean()
    acc = float(np.mean((_sigmoid(X @ w + b) >= 0.5) == (y == 1)))
    return ToyClassifier(w, float(b), train_accuracy=acc, meta={"epochs": int(epochs), "lr": lr, "seed": seed})
