"""Benchmark sweeps over synthetic matrices and convolution kernels.

A sweep expands a parameter grid, draws ``repetitions`` Gaussian instances
per grid point and runs every requested method on each instance. Rows are
emitted in grid order whatever the completion order of the worker pool, so
the value columns are reproducible for a fixed seed.
"""

import csv
import io
import itertools
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .conv import (
    ConvKernel,
    conv_power_iteration,
    exact_conv_spectrum,
    gram_conv,
    gram_conv_subsampled,
)
from .dense import gram_naive, gram_rescaled, power_iteration, svd_exact
from .errors import FormatError

SCHEMA = "lipgram-bench/1"
DEFAULT_ITERS = {"gram": 5, "gram_sub": 5, "naive": 5, "power": 100, "power_zero": 100, "power_circular": 100}
MATRIX_METHODS = ("gram", "naive", "power", "svd")
CONV_METHODS = ("gram", "gram_sub", "exact", "power_zero", "power_circular")
GRID_KEYS = {"matrix": ("rows", "cols"), "conv": ("c_in", "c_out", "n", "k")}
COLUMNS = [
    "row", "point", "rep", "c_in", "c_out", "n", "k", "rows", "cols", "method",
    "iters", "value", "reference", "diff", "ratio", "abs_ratio", "seconds",
]


def worker_count():
    """Pool size from ``LIP4_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("LIP4_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise FormatError(f"LIP4_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise FormatError("LIP4_THREADS must be >= 0")
    return n or os.cpu_count() or 1


def parse_method(label, kind):
    """Split ``"gram:12"`` into ``("gram", 12)``."""
    name, _, iters = label.partition(":")
    known = MATRIX_METHODS if kind == "matrix" else CONV_METHODS
    if name not in known:
        raise FormatError(f"unknown {kind} method {name!r}; choose from {known}")
    if iters:
        try:
            return name, int(iters)
        except ValueError:
            raise FormatError(f"bad iteration count in {label!r}") from None
    return name, None


@dataclass
class BenchConfig:
    kind: str
    methods: list
    reference: str
    grid: dict
    repetitions: int = 1
    seed: int = 0
    iters: dict = field(default_factory=dict)
    n0: int = None
    output: str = None
    format: str = "csv"

    def __post_init__(self):
        if self.kind not in GRID_KEYS:
            raise FormatError(f"kind must be one of {tuple(GRID_KEYS)}, got {self.kind!r}")
        if not self.methods:
            raise FormatError("methods must be non-empty")
        for label in self.methods:
            parse_method(label, self.kind)
        if self.reference not in self.methods:
            raise FormatError(f"reference method {self.reference!r} is not in the method set")
        if self.repetitions < 1:
            raise FormatError("repetitions must be >= 1")
        if self.format not in ("csv", "json"):
            raise FormatError(f"format must be csv or json, got {self.format!r}")
        grid = dict(self.grid)
        if self.kind == "conv" and "c" in grid:
            c = grid.pop("c")
            grid.setdefault("c_in", c)
            grid.setdefault("c_out", c)
        expected = set(GRID_KEYS[self.kind])
        if set(grid) != expected:
            raise FormatError(f"{self.kind} grid needs exactly {sorted(expected)}, got {sorted(grid)}")
        for key, values in grid.items():
            if not isinstance(values, list) or not values:
                raise FormatError(f"grid entry {key!r} must be a non-empty list")
        self.grid = grid

    @classmethod
    def from_dict(cls, doc):
        allowed = {"kind", "methods", "reference", "grid", "repetitions", "seed", "iters", "n0", "output", "format"}
        extra = set(doc) - allowed
        if extra:
            raise FormatError(f"unknown config fields {sorted(extra)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise FormatError(f"bad bench config: {exc}") from exc

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def points(self):
        keys = GRID_KEYS[self.kind]
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.grid[k] for k in keys))]

    def iterations(self, label):
        name, explicit = parse_method(label, self.kind)
        if explicit is not None:
            return explicit
        return int(self.iters.get(name, DEFAULT_ITERS.get(name, 0)))


def _instance(config, point_index, rep, point):
    rng = np.random.default_rng([config.seed, point_index, rep])
    if config.kind == "matrix":
        return rng.standard_normal((point["rows"], point["cols"]))
    shape = (point["c_out"], point["c_in"], point["k"], point["k"])
    return ConvKernel(rng.standard_normal(shape), point["n"])


def _run_method(config, name, iters, data, pi_seed):
    if config.kind == "matrix":
        if name == "gram":
            return gram_rescaled(data, iters).value
        if name == "naive":
            return gram_naive(data, iters).value
        if name == "power":
            return power_iteration(data, iters, pi_seed).value
        return svd_exact(data).value
    if name == "gram":
        return gram_conv(data, iters).value
    if name == "gram_sub":
        if config.n0 is None:
            raise FormatError("method gram_sub needs n0 in the config")
        return gram_conv_subsampled(data, config.n0, iters).value
    if name == "exact":
        return exact_conv_spectrum(data).value
    padding = "zero" if name == "power_zero" else "circular"
    return conv_power_iteration(ConvKernel(data.filter, data.n, padding), iters, pi_seed).value


def _run_instance(config, point_index, rep, point):
    data = _instance(config, point_index, rep, point)
    pi_seed = int(np.random.default_rng([config.seed, point_index, rep, 1]).integers(2**31))
    results = {}
    for label in config.methods:
        name, _ = parse_method(label, config.kind)
        iters = config.iterations(label)
        start = time.perf_counter()
        value = _run_method(config, name, iters, data, pi_seed)
        results[label] = (iters, value, time.perf_counter() - start)
    ref = results[config.reference][1]
    rows = []
    for label in config.methods:
        iters, value, seconds = results[label]
        ratio = value / ref - 1.0 if ref else float("nan")
        row = {"row": "sample", "point": point_index, "rep": rep, "method": label,
               "iters": iters, "value": value, "reference": ref, "diff": value - ref,
               "ratio": ratio, "abs_ratio": abs(ratio), "seconds": seconds}
        row.update(point)
        rows.append(row)
    return rows


def _aggregate(rows, config):
    out = []
    for index, point in enumerate(config.points()):
        for label in config.methods:
            group = [r for r in rows if r["point"] == index and r["method"] == label]
            for stat, fn in (("mean", np.mean), ("std", np.std)):
                agg = {"row": stat, "point": index, "rep": "", "method": label,
                       "iters": group[0]["iters"]}
                agg.update(point)
                for col in ("value", "reference", "diff", "ratio", "abs_ratio", "seconds"):
                    agg[col] = float(fn([r[col] for r in group]))
                out.append(agg)
    return out


def run_bench(config, workers=None):
    """Run the sweep and return the list of sample rows followed by aggregates."""
    tasks = [
        (i, rep, point)
        for i, point in enumerate(config.points())
        for rep in range(config.repetitions)
    ]
    workers = workers or worker_count()
    if workers == 1:
        chunks = [_run_instance(config, *task) for task in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda task: _run_instance(config, *task), tasks))
    rows = [row for chunk in chunks for row in chunk]
    return rows + _aggregate(rows, config)


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    return "" if value is None else str(value)


def to_csv(rows):
    buf = io.StringIO()
    buf.write(f"# {SCHEMA}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([_cell(row.get(col)) for col in COLUMNS])
    return buf.getvalue()


def to_json(rows):
    return json.dumps({"schema": SCHEMA, "columns": COLUMNS,
                       "rows": [{c: row.get(c) for c in COLUMNS} for row in rows]}, indent=1)
