"""Flip-prediction benchmark.

Each record pairs an impact score with whether the intervention actually
flipped the model's decision. A method is judged by how well a single score
cutoff separates flipping from non-flipping interventions.
"""
import csv
import math
import statistics
from dataclasses import asdict, dataclass

import numpy as np

from .errors import FormatError, InvalidConfig, ShapeMismatch


@dataclass(frozen=True)
class FlipRecord:
    score: float
    flipped: bool

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise InvalidConfig(f"record score must be finite, got {self.score!r}")


@dataclass
class BenchResult:
    mean_accuracy: float
    std_accuracy: float
    per_round: list
    rounds: int
    frac: float
    seed: int

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_round"] = [{"threshold": t, "accuracy": a} for t, a in self.per_round]
        return d


def _arrays(records):
    scores = np.array([r.score for r in records], dtype=np.float64)
    flipped = np.array([bool(r.flipped) for r in records])
    return scores, flipped


def optimal_threshold(records) -> tuple:
    """Best cutoff for "predict flip iff score >= threshold".

    Candidates are the midpoints between consecutive distinct scores plus a
    sentinel below the minimum and one above the maximum. Ties go to the
    smallest threshold. Returns ``(threshold, accuracy)``.
    """
    if not records:
        raise InvalidConfig("no records")
    scores, flipped = _arrays(records)
    u = np.unique(scores)
    candidates = np.concatenate([[u[0] - 1.0], (u[:-1] + u[1:]) / 2.0, [u[-1] + 1.0]])
    pred = scores[None, :] >= candidates[:, None]
    acc = (pred == flipped[None, :]).mean(axis=1)
    best = int(np.argmax(acc))  # first maximum = smallest threshold
    return float(candidates[best]), float(acc[best])


def flip_benchmark(records, rounds: int = 10, frac: float = 0.8, seed: int = 0) -> BenchResult:
    """Optimal-threshold accuracy over ``rounds`` subsamples drawn without replacement.

    Round ``r`` draws ``ceil(frac * n)`` records using a generator seeded with
    ``SeedSequence(seed, spawn_key=(r,))``.
    """
    records = list(records)
    n = len(records)
    if rounds < 1:
        raise InvalidConfig("rounds must be >= 1")
    if not 0.0 < frac <= 1.0:
        raise InvalidConfig(f"frac must lie in (0, 1], got {frac}")
    m = math.ceil(frac * n)
    if m < 2:
        raise InvalidConfig(f"subsample of {m} records is too small")
    per_round = []
    for r in range(rounds):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(r,))))
        pick = np.sort(rng.choice(n, size=m, replace=False))
        per_round.append(optimal_threshold([records[i] for i in pick]))
    accs = [a for _, a in per_round]
    return BenchResult(
        mean_accuracy=statistics.fmean(accs),
        std_accuracy=statistics.pstdev(accs),
        per_round=per_round,
        rounds=rounds,
        frac=frac,
        seed=int(seed),
    )


def explanation_shift(map_before, map_after) -> float:
    """Mean squared difference between two attribution maps."""
    a = np.asarray(map_before, dtype=np.float64)
    b = np.asarray(map_after, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"maps differ in shape: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ShapeMismatch("empty maps")
    return float(np.mean((a - b) ** 2))


def read_records_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0][:2]] != ["score", "flipped"]:
        raise FormatError("header must start with 'score,flipped'", 1)
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            score = float(row[0])
            flag = row[1].strip()
        except (ValueError, IndexError):
            raise FormatError(f"malformed row {row!r}", lineno) from None
        if flag not in ("0", "1"):
            raise FormatError(f"flipped must be 0 or 1, got {flag!r}", lineno)
        if not math.isfinite(score) or score < 0:
            raise FormatError(f"score must be finite and nonnegative, got {row[0]!r}", lineno)
        out.append(FlipRecord(score, flag == "1"))
    return out


def write_records_csv(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["score", "flipped"])
        for r in records:
            w.writerow([repr(float(r.score)), int(bool(r.flipped))])
