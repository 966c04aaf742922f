"""Monte Carlo comparison of GP surrogates on repeated random splits.

Each replicate draws one train/test partition from ``(seed, rep)`` and every
method sees that same partition.  Results are written as long-format CSV:
``rmse.csv`` (``rep,method,rmse``), ``nhat_hist.csv``
(``rep,method,bin,count``) for neighborhood-searching methods and
``summary.csv`` / ``wins.csv`` from `summarize`.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .datagen import GenSpec, generate, load_csv
from .gp import Dataset, global_gp_predict
from .local import LagpConfig, OlagpConfig, batch_predict
from .modular import MjgpConfig, build_feature, predict_augmented

METHODS = ("globalgp", "lagp", "olagp", "mjgp-global", "mjgp-lagp", "mjgp-olagp")
NHAT_BINS = (
    (12, 20), (21, 40), (41, 60), (61, 80),
    (81, 100), (101, 120), (121, 140), (141, 160),
)


def rmse(truth, pred) -> float:
    """Root mean squared difference of two equal-length vectors."""
    truth = np.asarray(truth, dtype=float).ravel()
    pred = np.asarray(pred, dtype=float).ravel()
    if truth.size != pred.size:
        raise ValueError(f"length mismatch: {truth.size} vs {pred.size}")
    if truth.size == 0:
        raise ValueError("rmse of empty vectors")
    return float(np.sqrt(np.mean((truth - pred) ** 2)))


def bin_label(lo: int, hi: int) -> str:
    return f"{lo}-{hi}"


def nhat_histogram(nhat, bins=NHAT_BINS) -> np.ndarray:
    """Counts of ``nhat`` in each closed bin ``[lo, hi]``."""
    nhat = np.asarray(nhat).ravel()
    return np.array([np.count_nonzero((nhat >= lo) & (nhat <= hi)) for lo, hi in bins])


def trace_consistent(nhat, se_star, trace, n_min: int, n_max: int) -> np.ndarray:
    """Per point: ``nhat`` in range and its SE no larger than any evaluated size."""
    nhat = np.asarray(nhat)
    in_range = (nhat >= n_min) & (nhat <= n_max)
    finite = np.where(np.isfinite(trace), trace, np.inf)
    return in_range & np.all(se_star[:, None] <= finite, axis=1)


@dataclass(frozen=True)
class McConfig:
    """Benchmark settings.

    ``dataset`` is a `GenSpec`, a CSV path or a `Dataset`.  ``rep_ids``
    restricts the run to selected replicates (each is reproducible on its
    own because its split depends only on ``(seed, rep)``).
    """

    dataset: object
    methods: tuple = ("lagp", "olagp", "mjgp-olagp")
    reps: int = 10
    train_frac: float = 0.9
    seed: int = 0
    out_dir: str | None = None
    lagp_n: int = 50
    n_min: int = 12
    n_max: int = 160
    classifier: str = "gp"
    workers: int = 1
    global_starts: int = 1
    external_pred: str | None = None
    rep_ids: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.methods:
            raise ValueError("methods must be nonempty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        if len(set(self.methods)) != len(self.methods):
            raise ValueError("methods must be distinct")
        if not 0.0 < self.train_frac < 1.0:
            raise ValueError("train_frac must lie strictly between 0 and 1")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        OlagpConfig(self.n_min, self.n_max)
        LagpConfig(self.lagp_n)
        if self.rep_ids is not None:
            ids = tuple(int(r) for r in self.rep_ids)
            if not ids or any(r < 0 or r >= self.reps for r in ids):
                raise ValueError(f"rep_ids must lie in [0, {self.reps})")
            object.__setattr__(self, "rep_ids", ids)

    @property
    def rep_list(self) -> tuple:
        return self.rep_ids if self.rep_ids is not None else tuple(range(self.reps))


@dataclass
class McResult:
    """Per replicate and method RMSEs plus neighborhood diagnostics.

    ``rmse`` has one row per replicate in ``reps`` and one column per entry
    of ``methods``; a method that failed outright holds NaN and a message in
    ``failures``.  ``point_failures`` counts test points that failed inside
    otherwise successful runs (those points are left out of the RMSE).
    """

    methods: tuple
    reps: tuple
    rmse: np.ndarray
    split_seeds: list
    test_idx: list
    nhat: dict = field(default_factory=dict)
    nhat_hist: dict = field(default_factory=dict)
    trace_ok: dict = field(default_factory=dict)
    traces: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    point_failures: dict = field(default_factory=dict)
    seconds: np.ndarray | None = None

    def column(self, method: str) -> np.ndarray:
        return self.rmse[:, self.methods.index(method)]

    def rows(self):
        for i, rep in enumerate(self.reps):
            for j, m in enumerate(self.methods):
                yield rep, m, self.rmse[i, j]


def load_dataset(spec) -> Dataset:
    if isinstance(spec, Dataset):
        return spec
    if isinstance(spec, GenSpec):
        return generate(spec)
    if isinstance(spec, (str, os.PathLike)):
        return load_csv(spec)
    raise TypeError(f"cannot build a dataset from {type(spec).__name__}")


def split_indices(N: int, train_frac: float, seed: int, rep: int):
    """Random train/test partition derived from ``(seed, rep)`` only."""
    n_train = int(round(train_frac * N))
    if not 1 <= n_train < N:
        raise ValueError(f"train_frac={train_frac} leaves an empty side with N={N}")
    perm = np.random.default_rng([seed, rep]).permutation(N)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def read_external(path, N: int) -> dict:
    """External predictions: column ``pred`` and optional ``rep``.

    Without ``rep`` there must be one row per dataset row (indexed like the
    dataset).  With ``rep``, each replicate's rows are predictions at its
    test points in ascending row order.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "pred" not in reader.fieldnames:
            raise ValueError(f"{path}: needs a 'pred' column")
        has_rep = "rep" in reader.fieldnames
        out: dict = {}
        for lineno, row in enumerate(reader, start=2):
            try:
                key = int(row["rep"]) if has_rep else None
                out.setdefault(key, []).append(float(row["pred"]))
            except (TypeError, ValueError):
                raise ValueError(f"{path}:{lineno}: malformed row") from None
    out = {k: np.array(v) for k, v in out.items()}
    if not has_rep and out.get(None, np.zeros(0)).size != N:
        raise ValueError(f"{path}: expected {N} predictions, one per dataset row")
    return out


def _local_cfg(method: str, cfg: McConfig):
    if method.endswith("olagp"):
        return OlagpConfig(cfg.n_min, cfg.n_max)
    if method.endswith("lagp"):
        return LagpConfig(cfg.lagp_n)
    return "global"


def _run_method(method, train, test, cfg: McConfig, split_seed, feature_cache):
    if method == "globalgp":
        return global_gp_predict(train, test.X, n_starts=cfg.global_starts, seed=split_seed)
    if method in ("lagp", "olagp"):
        return batch_predict(test.X, train, _local_cfg(method, cfg), workers=cfg.workers)
    mcfg = MjgpConfig(
        gp=_local_cfg(method, cfg),
        classifier=cfg.classifier,
        seed=split_seed,
        global_starts=cfg.global_starts,
    )
    if "feature" not in feature_cache:
        feature_cache["feature"] = build_feature(train, mcfg, test.X)
    return predict_augmented(train, test.X, feature_cache["feature"], mcfg, workers=cfg.workers)


def run_mc(cfg: McConfig, progress=None) -> McResult:
    """Run every method on every replicate's split.

    ``progress``, if given, is called as ``progress(rep, method, rmse)``.
    """
    data = load_dataset(cfg.dataset)
    external = read_external(cfg.external_pred, data.N) if cfg.external_pred else None
    methods = cfg.methods + (("external",) if external is not None else ())
    reps = cfg.rep_list
    res = McResult(
        methods=methods,
        reps=reps,
        rmse=np.full((len(reps), len(methods)), np.nan),
        split_seeds=[],
        test_idx=[],
        seconds=np.zeros((len(reps), len(methods))),
    )
    for i, rep in enumerate(reps):
        split_seed = int(np.random.SeedSequence([cfg.seed, rep]).generate_state(1)[0])
        tr, te = split_indices(data.N, cfg.train_frac, cfg.seed, rep)
        res.split_seeds.append(split_seed)
        res.test_idx.append(te)
        train, test = data.subset(tr), data.subset(te)
        feature_cache: dict = {}
        for j, method in enumerate(methods):
            t0 = time.perf_counter()
            try:
                if method == "external":
                    pred = external[None][te] if None in external else external[rep]
                    if pred.size != te.size:
                        raise ValueError(f"rep {rep}: {pred.size} external predictions "
                                         f"for {te.size} test points")
                    out = None
                else:
                    with threadpool_limits(limits=1):
                        out = _run_method(method, train, test, cfg, split_seed, feature_cache)
                    pred = out.mean
            except Exception as exc:  # record and keep going
                res.failures[(rep, method)] = f"{type(exc).__name__}: {exc}"
                res.seconds[i, j] = time.perf_counter() - t0
                continue
            res.seconds[i, j] = time.perf_counter() - t0
            ok = np.isfinite(pred)
            if not ok.all():
                res.point_failures[(rep, method)] = int((~ok).sum())
            if ok.any():
                res.rmse[i, j] = rmse(test.Y[ok], pred[ok])
            if out is not None and out.nhat is not None:
                good = ok & (out.nhat > 0)
                res.nhat[(rep, method)] = out.nhat
                res.nhat_hist[(rep, method)] = nhat_histogram(out.nhat[good])
                res.traces[(rep, method)] = out.trace
                res.trace_ok[(rep, method)] = bool(np.all(trace_consistent(
                    out.nhat[good], out.se_star[good], out.trace[good], cfg.n_min, cfg.n_max
                )))
            if progress is not None:
                progress(rep, method, res.rmse[i, j])
    if cfg.out_dir:
        write_results(res, cfg.out_dir)
    return res


def write_results(res: McResult, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "rmse.csv"), "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["rep", "method", "rmse"])
        for rep, m, v in res.rows():
            out.writerow([rep, m, repr(float(v))])
    if res.nhat_hist:
        with open(os.path.join(out_dir, "nhat_hist.csv"), "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["rep", "method", "bin", "count"])
            for rep in res.reps:
                for m in res.methods:
                    counts = res.nhat_hist.get((rep, m))
                    if counts is None:
                        continue
                    for (lo, hi), c in zip(NHAT_BINS, counts):
                        out.writerow([rep, m, bin_label(lo, hi), int(c)])
    if res.failures:
        with open(os.path.join(out_dir, "failures.csv"), "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["rep", "method", "message"])
            for (rep, m), msg in sorted(res.failures.items()):
                out.writerow([rep, m, msg])
    summarize(res).to_csv(out_dir)


@dataclass(frozen=True)
class Summary:
    """Per-method RMSE quantiles and win counts.

    ``best`` counts replicates where a method has the strictly lowest RMSE;
    ``pair_wins[(a, b)]`` counts replicates where ``a`` beats ``b``.
    """

    rows: list
    pair_wins: dict

    def to_csv(self, out_dir) -> None:
        os.makedirs(out_dir, exist_ok=True)
        keys = ["method", "reps", "median", "q1", "q3", "mean", "best"]
        with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
            out = csv.DictWriter(fh, fieldnames=keys)
            out.writeheader()
            for r in self.rows:
                out.writerow(r)
        with open(os.path.join(out_dir, "wins.csv"), "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["method", "versus", "wins"])
            for (a, b), w in self.pair_wins.items():
                out.writerow([a, b, w])

    def format(self) -> str:
        lines = [f"{'method':<12} {'reps':>4} {'median':>9} {'q1':>9} {'q3':>9} {'best':>5}"]
        for r in self.rows:
            lines.append(
                f"{r['method']:<12} {r['reps']:>4} {r['median']:>9.5f} "
                f"{r['q1']:>9.5f} {r['q3']:>9.5f} {r['best']:>5}"
            )
        return "\n".join(lines)


def per_rep_winner(res: McResult) -> list:
    """Method with the lowest RMSE per replicate (None when tied or all NaN)."""
    out = []
    for row in res.rmse:
        vals = np.where(np.isfinite(row), row, np.inf)
        k = int(np.argmin(vals))
        unique = np.count_nonzero(vals == vals[k]) == 1 and np.isfinite(vals[k])
        out.append(res.methods[k] if unique else None)
    return out


def summarize(res: McResult) -> Summary:
    if res.rmse.size == 0:
        raise ValueError("empty result")
    winners = per_rep_winner(res)
    rows = []
    for j, m in enumerate(res.methods):
        col = res.rmse[:, j]
        col = col[np.isfinite(col)]
        q1, med, q3 = np.quantile(col, [0.25, 0.5, 0.75]) if col.size else (np.nan,) * 3
        rows.append({
            "method": m,
            "reps": int(col.size),
            "median": float(med),
            "q1": float(q1),
            "q3": float(q3),
            "mean": float(col.mean()) if col.size else float("nan"),
            "best": winners.count(m),
        })
    pair = {}
    for a, ma in enumerate(res.methods):
        for b, mb in enumerate(res.methods):
            if a != b:
                pair[(ma, mb)] = int(np.sum(res.rmse[:, a] < res.rmse[:, b]))
    return Summary(rows=rows, pair_wins=pair)
