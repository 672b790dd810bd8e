"""End-to-end toy bias study.

Three toy classifiers are trained on scenes where shape brightness is
unrelated to the label (``none``) or tied to it (``dark_disk``,
``dark_square``). Held-out bright scenes are then darkened step by step
(foreground brightness) or re-lit toward the border (background), and each
model's response is scored, tested and checked for decision flips.
"""
from dataclasses import asdict, dataclass, field

import numpy as np

from .bench import FlipRecord, flip_benchmark
from .intervene import OperatorSpec, generate_stack
from .model import BIASES, ToyAdapter, draw_scene, eval_stack, synth_dataset, train_toy
from .score import detect_flips, expected_gradient_magnitude, summarize
from .stattest import TestConfig


@dataclass(frozen=True)
class DemoConfig:
    seed: int = 0
    train_n: int = 200
    epochs: int = 2000
    lr: float = 0.5
    heldout: int = 10
    bench_scenes: int = 40
    steps: int = 11
    fg_range: tuple = (0.2, 1.0)
    bg_range: tuple = (-0.5, 0.5)
    # kernel ~flat over the subject, so the edit stays in the background
    sigma_rel: float = 1.0
    K: int = 10000
    delta: float = 0.01
    threshold: float = 0.5
    bench_rounds: int = 10
    bench_frac: float = 0.8


@dataclass
class DemoResult:
    config: dict
    models: dict = field(default_factory=dict)
    table: list = field(default_factory=list)
    curves: dict = field(default_factory=dict)
    records: list = field(default_factory=list)
    bench: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _child_seeds(seed: int, count: int) -> list:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(count)]


def _heldout_scenes(n: int, seed: int, lo: int, hi: int) -> list:
    rng = np.random.default_rng(seed)
    labels = ["disk", "square"] * (n // 2) + ["disk"] * (n % 2)
    return [draw_scene(label, int(rng.integers(lo, hi + 1)), rng) for label in labels]


def sweep(model, scene, kind: str, cfg: DemoConfig):
    """Series of ``P(disk)`` for one scene under one operator sweep."""
    if kind == "fg_brightness":
        spec, (lo, hi) = OperatorSpec("fg_brightness", mask=scene.fg_mask), cfg.fg_range
    else:
        spec, (lo, hi) = OperatorSpec("background_gauss", sigma_rel=cfg.sigma_rel), cfg.bg_range
    stack = generate_stack(scene.image, spec, cfg.steps, lo, hi)
    return eval_stack(ToyAdapter(model, scene.fg_mask), stack, "disk")


def run_demo(cfg: DemoConfig = DemoConfig()) -> DemoResult:
    train_seeds = _child_seeds(cfg.seed, 6)
    models = {
        bias: train_toy(synth_dataset(bias, cfg.train_n, s), cfg.epochs, cfg.lr, s)
        for bias, s in zip(BIASES, train_seeds)
    }
    # bright shapes: darkening them contradicts both biased brightness rules
    heldout = _heldout_scenes(cfg.heldout, train_seeds[3], 175, 245)
    bench_scenes = _heldout_scenes(cfg.bench_scenes, train_seeds[4], 10, 245)
    test_seed = train_seeds[5]

    result = DemoResult(config=asdict(cfg))
    result.curves = {
        kind: [{"label": s.label, "fg_brightness": s.fg_brightness} for s in heldout]
        for kind in ("fg_brightness", "background_gauss")
    }
    for bias, model in models.items():
        entry = {
            "weights": model.weights.tolist(),
            "bias": model.bias,
            "feature_spec": model.feature_spec,
            "train_accuracy": model.train_accuracy,
        }
        for kind in ("fg_brightness", "background_gauss"):
            reports = []
            for i, scene in enumerate(heldout):
                series = sweep(model, scene, kind, cfg)
                tcfg = TestConfig(K=cfg.K, delta=cfg.delta, seed=test_seed)
                rep = summarize(series, tcfg, cfg.threshold).to_dict()
                rep["scene"] = i
                rep["outputs"] = series.outputs.tolist()
                reports.append(rep)
                result.curves[kind][i].setdefault("property", series.grid.tolist())
                result.curves[kind][i][f"output_{bias}"] = series.outputs.tolist()
            entry[kind] = {
                "reports": reports,
                "mean_score": float(np.mean([r["score"] for r in reports])),
                "scenes_flipped": int(sum(r["flips"] > 0 for r in reports)),
                "scenes_significant": int(sum(r["significant"] for r in reports)),
            }
        result.models[bias] = entry
        result.table.append({
            "model": bias,
            "fg_score": entry["fg_brightness"]["mean_score"],
            "fg_flipped": entry["fg_brightness"]["scenes_flipped"],
            "fg_significant": entry["fg_brightness"]["scenes_significant"],
            "bg_score": entry["background_gauss"]["mean_score"],
            "bg_flipped": entry["background_gauss"]["scenes_flipped"],
            "bg_significant": entry["background_gauss"]["scenes_significant"],
        })
        for scene in bench_scenes:
            series = sweep(model, scene, "fg_brightness", cfg)
            flips, _ = detect_flips(series.outputs, cfg.threshold)
            result.records.append({
                "model": bias,
                "score": expected_gradient_magnitude(series),
                "flipped": flips > 0,
            })

    records = [FlipRecord(r["score"], r["flipped"]) for r in result.records]
    bench = flip_benchmark(records, cfg.bench_rounds, cfg.bench_frac, cfg.seed)
    full = flip_benchmark(records, 1, 1.0, cfg.seed)
    result.bench = {"resampled": bench.to_dict(), "full": full.to_dict()}
    return result
