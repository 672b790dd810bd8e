"""Shuffle (permutation) significance test for intervention series.

The outputs are permuted while the property grid stays fixed, the test
statistic is recomputed for each shuffle, and the original statistic is
located within that null distribution.

Randomness
----------
Permutations are generated in fixed-size chunks. Chunk ``c`` draws from a
PCG64 generator seeded with ``SeedSequence(seed, spawn_key=(c,))``, so the
permutation with index ``i`` is a function of ``(seed, i)`` only. Serial and
threaded runs therefore produce bit-identical results.
"""
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import InvalidConfig
from .findiff import DiffScheme, gradient_stencil
from .series import InterventionSeries, require_scoreable

CHUNK = 1024
SIDES = ("two_sided", "upper", "lower")
STATISTICS = ("expected_gradient_magnitude", "pearson_abs")
# permuted statistics this close (relative) to the original count as ties
TIE_RTOL = 1e-10


@dataclass(frozen=True)
class TestConfig:
    K: int = 10000
    delta: float = 0.01
    side: str = "two_sided"
    seed: int = 0
    statistic: str = "expected_gradient_magnitude"
    scheme: DiffScheme = field(default_factory=DiffScheme)
    smoothed: bool = False
    workers: int = 1

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not isinstance(self.K, (int, np.integer)) or self.K < 1:
            raise InvalidConfig(f"K must be a positive integer, got {self.K!r}")
        if not 0.0 < self.delta < 1.0:
            raise InvalidConfig(f"delta must lie in (0, 1), got {self.delta!r}")
        if self.side not in SIDES:
            raise InvalidConfig(f"side must be one of {SIDES}, got {self.side!r}")
        if self.statistic not in STATISTICS:
            raise InvalidConfig(f"statistic must be one of {STATISTICS}, got {self.statistic!r}")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise InvalidConfig(f"seed must be a nonnegative integer, got {self.seed!r}")
        if self.workers < 1:
            raise InvalidConfig("workers must be >= 1")


@dataclass(frozen=True, eq=False)
class NullSample:
    original_stat: float
    permuted_stats: np.ndarray
    p_value: float
    p_upper: float
    p_lower: float
    side: str
    degenerate: bool = False
    warning: str | None = None

    @property
    def K(self) -> int:
        return int(self.permuted_stats.size)

    def significant(self, delta: float) -> bool:
        return self.p_value < delta


def permutation_block(seed: int, chunk: int, n: int, count: int) -> np.ndarray:
    """Rows of uniformly random permutations of ``range(n)`` for one chunk."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(chunk),))
    rng = np.random.Generator(np.random.PCG64(ss))
    base = np.broadcast_to(np.arange(n, dtype=np.int64), (count, n))
    return rng.permuted(base, axis=1)


def seeded_permutations(seed: int, n: int, K: int) -> np.ndarray:
    blocks = [
        permutation_block(seed, c, n, min(CHUNK, K - c * CHUNK))
        for c in range(math.ceil(K / CHUNK))
    ]
    return np.concatenate(blocks, axis=0)


def all_permutations(n: int) -> np.ndarray:
    """Every permutation of ``range(n)`` in lexicographic order (n! rows)."""
    return np.array(list(itertools.permutations(range(n))), dtype=np.int64).reshape(-1, n)


def _statistic(series: InterventionSeries, cfg: TestConfig, kernels):
    """Return ``f(perms) -> stats`` for the configured statistic."""
    y = np.ascontiguousarray(series.outputs)
    if cfg.statistic == "expected_gradient_magnitude":
        idx, w = gradient_stencil(series.grid, cfg.scheme)
        return lambda perms: kernels.perm_mean_abs_gradient(y, perms, idx, w)

    xc = series.grid - series.grid.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc)) * math.sqrt(float(yc @ yc))

    def abs_pearson(perms):
        return np.abs(yc[perms] @ xc) / denom

    return abs_pearson


def p_values(original: float, permuted: np.ndarray, smoothed: bool = False):
    """Upper-tail, lower-tail and two-sided p-values for ``original``."""
    permuted = np.asarray(permuted, dtype=np.float64)
    K = permuted.size
    tie = np.abs(permuted - original) <= TIE_RTOL * np.maximum(np.abs(permuted), abs(original))
    n_upper = int(np.count_nonzero((permuted > original) | tie))
    n_lower = int(np.count_nonzero((permuted < original) | tie))
    if smoothed:
        p_upper, p_lower = (n_upper + 1) / (K + 1), (n_lower + 1) / (K + 1)
    else:
        p_upper, p_lower = n_upper / K, n_lower / K
    return p_upper, p_lower, min(1.0, 2.0 * min(p_upper, p_lower))


def permutation_test(
    series: InterventionSeries,
    cfg: TestConfig = TestConfig(),
    permutations=None,
    backend: str | None = None,
) -> NullSample:
    """Shuffle test of ``series`` under ``cfg``.

    ``permutations`` optionally replaces the seeded shuffles with an explicit
    ``(K, n)`` index array, e.g. :func:`all_permutations` for an exhaustive
    test; ``cfg.K`` is then ignored.
    """
    require_scoreable(series)
    kernels = _backend.get(backend)
    n = len(series)
    y = series.outputs

    if np.all(y == y[0]):
        # every shuffle reproduces the original series
        K = cfg.K if permutations is None else len(permutations)
        orig = 0.0 if cfg.statistic == "expected_gradient_magnitude" else math.nan
        return NullSample(orig, np.full(K, orig), 1.0, 1.0, 1.0, cfg.side)

    stat = _statistic(series, cfg, kernels)
    original = float(stat(np.arange(n, dtype=np.int64)[None, :])[0])

    if permutations is not None:
        perms = np.ascontiguousarray(permutations, dtype=np.int64)
        if perms.ndim != 2 or perms.shape[1] != n or perms.shape[0] < 1:
            raise InvalidConfig(f"permutations must have shape (K, {n})")
        permuted = stat(perms)
    else:
        sizes = [min(CHUNK, cfg.K - c * CHUNK) for c in range(math.ceil(cfg.K / CHUNK))]

        def run(chunk):
            return stat(permutation_block(cfg.seed, chunk, n, sizes[chunk]))

        if cfg.workers > 1 and len(sizes) > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                parts = list(pool.map(run, range(len(sizes))))
        else:
            parts = [run(c) for c in range(len(sizes))]
        permuted = np.concatenate(parts)

    p_upper, p_lower, p_two = p_values(original, permuted, cfg.smoothed)
    p = {"two_sided": p_two, "upper": p_upper, "lower": p_lower}[cfg.side]
    if n < 3:
        return NullSample(
            original, permuted, 1.0, p_upper, p_lower, cfg.side,
            degenerate=True,
            warning=f"only {n} observations; permutation test is degenerate, p set to 1",
        )
    return NullSample(original, permuted, p, p_upper, p_lower, cfg.side)


def null_distribution(series, cfg: TestConfig = TestConfig(), permutations=None, backend=None) -> NullSample:
    """Same as :func:`permutation_test`; the returned sample always holds all K statistics."""
    sample = permutation_test(series, cfg, permutations, backend)
    expected = cfg.K if permutations is None else len(permutations)
    assert sample.permuted_stats.size == expected
    return sample


def write_null_csv(sample: NullSample, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("stat\n")
        for v in sample.permuted_stats:
            fh.write(f"{float(v)!r}\n")


def read_null_csv(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "stat":
            raise InvalidConfig(f"expected header 'stat', got {header!r}")
        return np.array([float(line) for line in fh if line.strip()])


def example_functions(kind: str, n: int = 101, seed: int = 0) -> InterventionSeries:
    """Synthetic benchmark series on an equidistant grid over [-1, 1]."""
    if n < 3:
        raise InvalidConfig("example functions need n >= 3")
    x = np.linspace(-1.0, 1.0, n)
    if kind == "noise":
        y = np.random.default_rng(seed).standard_normal(n)
    elif kind == "sinus":
        y = np.sin(2 * np.pi * x)
    elif kind == "parabola":
        y = x**2
    elif kind == "step":
        y = (x >= 0).astype(np.float64)
    elif kind == "zigzag":
        y = (np.arange(n) % 2).astype(np.float64)
    else:
        raise InvalidConfig(f"unknown example function {kind!r}")
    return InterventionSeries(x, y, kind)
