"""Synthetic jump surfaces, designs and CSV I/O.

Surfaces
--------
``onedim``       sin(x) on [0, 100], raised by 10 on ``50 <= x < 70``.
``phantom``      two GP levels over a composite-ellipse mask on [-0.5, 0.5]^2.
``star``         two GP levels over a five-pointed star mask on [0, 1]^2.
``michalewicz``  Michalewicz function with its flat region lifted by 0.5.

Masked surfaces draw each level as one multivariate normal realization with
a constant mean and squared-exponential covariance over that level's inputs,
then min-max scale the responses into [0, 1].
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import qmc

from .gp import Dataset
from .kernel import FactorizationError, Hyperparams, cov_matrix, factorize

GENERATORS = ("onedim", "phantom", "star", "michalewicz")


def lhs(n: int, d: int, seed=None) -> np.ndarray:
    """Latin hypercube sample of ``n`` points in ``[0, 1]^d``."""
    if n < 1 or d < 1:
        raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    return qmc.LatinHypercube(d=d, seed=np.random.default_rng(seed)).random(n)


def grid(side: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Evenly spaced ``side x side`` grid, first coordinate varying fastest."""
    g = np.linspace(lo, hi, side)
    x1, x2 = np.meshgrid(g, g)
    return np.column_stack([x1.ravel(), x2.ravel()])


# -- 1-d jump example -------------------------------------------------------


def onedim_truth(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.sin(x) + np.where((x >= 50) & (x < 70), 10.0, 0.0)


def gen_onedim(n_train: int = 100, seed=None):
    """LHS design on [0, 100] with the 1-d jump response; returns ``(data, truth)``."""
    if n_train < 2:
        raise ValueError("need at least 2 training points")
    X = 100.0 * lhs(n_train, 1, seed)
    return Dataset(X, onedim_truth(X[:, 0])), onedim_truth


# -- membership masks --------------------------------------------------------


@dataclass(frozen=True)
class MembershipMask:
    """Assigns each 2-d input to level 1 or 2.

    Either ``predicate`` (vectorized, returns True for level 2) or a raster
    ``cells`` with extent ``(xmin, xmax, ymin, ymax)``; raster row 0 is the
    top (``ymax``) edge.
    """

    predicate: object = None
    cells: np.ndarray | None = None
    extent: tuple = (0.0, 1.0, 0.0, 1.0)
    name: str = "mask"

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.predicate is not None:
            inside = np.asarray(self.predicate(X[:, 0], X[:, 1]), dtype=bool)
            return np.where(inside, 2, 1)
        rows, cols = self.cells.shape
        xmin, xmax, ymin, ymax = self.extent
        c = np.floor((X[:, 0] - xmin) / (xmax - xmin) * cols).astype(int)
        r = np.floor((ymax - X[:, 1]) / (ymax - ymin) * rows).astype(int)
        return self.cells[np.clip(r, 0, rows - 1), np.clip(c, 0, cols - 1)]

    @classmethod
    def from_file(cls, path) -> "MembershipMask":
        """Read a raster: ``rows cols xmin xmax ymin ymax`` then rows of 1/2 digits."""
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        if not lines:
            raise ValueError(f"{path}: empty mask file")
        head = lines[0].split()
        if len(head) != 6:
            raise ValueError(f"{path}:1: expected 'rows cols xmin xmax ymin ymax'")
        rows, cols = int(head[0]), int(head[1])
        extent = tuple(float(v) for v in head[2:])
        body = lines[1:]
        if len(body) != rows:
            raise ValueError(f"{path}: expected {rows} raster rows, found {len(body)}")
        cells = np.empty((rows, cols), dtype=int)
        for i, ln in enumerate(body):
            digits = ln.replace(" ", "")
            if len(digits) != cols or set(digits) - {"1", "2"}:
                raise ValueError(f"{path}:{i + 2}: expected {cols} digits in {{1, 2}}")
            cells[i] = [int(ch) for ch in digits]
        return cls(cells=cells, extent=extent, name=str(path))


def _in_ellipse(x, y, cx, cy, a, b, angle):
    t = math.radians(angle)
    u = (x - cx) * math.cos(t) + (y - cy) * math.sin(t)
    v = -(x - cx) * math.sin(t) + (y - cy) * math.cos(t)
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


# (cx, cy, a, b, angle in degrees, level); painted in order
PHANTOM_ELLIPSES = (
    (0.00, 0.00, 0.36, 0.44, 0.0, 2),
    (0.00, -0.015, 0.28, 0.36, 0.0, 1),
    (0.10, 0.04, 0.07, 0.17, -18.0, 2),
    (-0.11, 0.04, 0.09, 0.21, 18.0, 2),
    (0.00, 0.26, 0.10, 0.06, 0.0, 2),
    (0.00, -0.23, 0.13, 0.05, 0.0, 2),
)


def mask_phantom() -> MembershipMask:
    """Head-phantom style composite of ellipses on [-0.5, 0.5]^2."""

    def inside(x, y):
        level = np.ones(np.shape(x), dtype=int)
        for cx, cy, a, b, ang, lev in PHANTOM_ELLIPSES:
            level = np.where(_in_ellipse(x, y, cx, cy, a, b, ang), lev, level)
        return level == 2

    return MembershipMask(predicate=inside, extent=(-0.5, 0.5, -0.5, 0.5), name="phantom")


def star_polygon(center=(0.5, 0.5), r_outer=0.4, points=5) -> np.ndarray:
    """Vertices of a regular star, first tip pointing up."""
    r_inner = r_outer * math.sin(math.radians(18)) / math.sin(math.radians(54))
    angles = np.pi / 2 + np.arange(2 * points) * np.pi / points
    radii = np.where(np.arange(2 * points) % 2 == 0, r_outer, r_inner)
    return np.column_stack(
        [center[0] + radii * np.cos(angles), center[1] + radii * np.sin(angles)]
    )


def _point_in_polygon(x, y, poly) -> np.ndarray:
    """Even-odd rule, vectorized over points."""
    inside = np.zeros(np.shape(x), dtype=bool)
    xj, yj = poly[-1]
    for xi, yi in poly:
        crosses = (yi > y) != (yj > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = (xj - xi) * (y - yi) / (yj - yi) + xi
        inside ^= crosses & (x < xint)
        xj, yj = xi, yi
    return inside


def mask_star() -> MembershipMask:
    """Regular five-pointed star centred in [0, 1]^2."""
    poly = star_polygon()
    return MembershipMask(
        predicate=lambda x, y: _point_in_polygon(x, y, poly),
        extent=(0.0, 1.0, 0.0, 1.0),
        name="star",
    )


# -- masked GP surfaces -------------------------------------------------------


@dataclass(frozen=True)
class GenSpec:
    """Settings for one synthetic dataset.

    ``size`` is the grid side for masked surfaces and the design size
    otherwise.
    """

    name: str
    size: int
    seed: int = 0
    domain: tuple = (0.0, 1.0)
    means: tuple = (0.0, 0.0)
    tau2: float = 1.0
    theta: tuple = (0.1, 0.1)
    d: int = 1
    m: int = 10

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("size must be positive")


PHANTOM = GenSpec("phantom", 61, domain=(-0.5, 0.5), means=(27.0, 0.0), tau2=9.0,
                  theta=(0.1, 0.1), d=2)
STAR = GenSpec("star", 61, domain=(0.0, 1.0), means=(-10.0, 10.0), tau2=3.0,
               theta=(0.01, 0.01), d=2)
MICHALEWICZ = GenSpec("michalewicz", 5000, d=4, m=10)
ONEDIM = GenSpec("onedim", 100)

DEFAULT_SPECS = {"phantom": PHANTOM, "star": STAR, "michalewicz": MICHALEWICZ,
                 "onedim": ONEDIM}


def default_spec(name: str, **overrides) -> GenSpec:
    if name not in DEFAULT_SPECS:
        raise ValueError(f"unknown dataset {name!r}; choose from {GENERATORS}")
    return replace(DEFAULT_SPECS[name], **overrides)


def _mvn_draw(X, mean, hyp: Hyperparams, rng, retries: int = 3) -> np.ndarray:
    for attempt in range(retries + 1):
        try:
            f = factorize(cov_matrix(X, hyp))
            break
        except FactorizationError:
            if attempt == retries:
                raise
            hyp = Hyperparams(hyp.tau2, hyp.theta, hyp.g * 10)
    return mean + f.chol @ rng.standard_normal(X.shape[0])


def gen_masked_surface(spec: GenSpec, mask: MembershipMask) -> Dataset:
    """Grid surface with one GP realization per mask level, scaled to [0, 1].

    Each level uses an independent random substream of ``spec.seed``.
    """
    X = grid(spec.size, *spec.domain)
    level = mask(X)
    hyp = Hyperparams(spec.tau2, spec.theta)
    streams = np.random.SeedSequence(spec.seed).spawn(2)
    Y = np.empty(X.shape[0])
    for j, ss in enumerate(streams):
        idx = np.flatnonzero(level == j + 1)
        if idx.size:
            Y[idx] = _mvn_draw(X[idx], spec.means[j], hyp, np.random.default_rng(ss))
    lo, hi = Y.min(), Y.max()
    Y = (Y - lo) / (hi - lo) if hi > lo else np.zeros_like(Y)
    return Dataset(X, Y)


def gen_phantom(size: int = 61, seed: int = 0, **overrides) -> Dataset:
    return gen_masked_surface(replace(PHANTOM, size=size, seed=seed, **overrides), mask_phantom())


def gen_star(size: int = 61, seed: int = 0, **overrides) -> Dataset:
    return gen_masked_surface(replace(STAR, size=size, seed=seed, **overrides), mask_star())


# -- Michalewicz --------------------------------------------------------------


def michalewicz(x, m: int = 10) -> np.ndarray:
    """``-sum_i sin(x_i) sin(i x_i^2 / pi)^(2m)`` for ``x`` in ``[0, pi]^d``.

    Accepts a single point or a matrix of points (rows).
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    i = np.arange(1, x.shape[1] + 1)
    f = -np.sum(np.sin(x) * np.sin(i * x**2 / np.pi) ** (2 * m), axis=1)
    return f[0] if single else f


def modified_michalewicz(u, m: int = 10) -> np.ndarray:
    """Jump version on coded inputs ``u`` in ``[0, 1]^d``: lift ``f > -0.01`` by 0.5."""
    f = michalewicz(np.pi * np.asarray(u, dtype=float), m)
    return np.where(f <= -0.01, f, f + 0.5)


def gen_michalewicz(n: int = 5000, seed=None, d: int = 4, m: int = 10) -> Dataset:
    X = lhs(n, d, seed)
    return Dataset(X, modified_michalewicz(X, m))


def generate(spec: GenSpec, mask: MembershipMask | None = None) -> Dataset:
    """Dataset for any `GenSpec`; ``mask`` overrides the built-in mask."""
    if spec.name == "onedim":
        return gen_onedim(spec.size, spec.seed)[0]
    if spec.name == "michalewicz":
        return gen_michalewicz(spec.size, spec.seed, spec.d, spec.m)
    if spec.name in ("phantom", "star"):
        if mask is None:
            mask = mask_phantom() if spec.name == "phantom" else mask_star()
        return gen_masked_surface(spec, mask)
    raise ValueError(f"unknown dataset {spec.name!r}; choose from {GENERATORS}")


# -- CSV ------------------------------------------------------------------------


def save_csv(path, data: Dataset) -> None:
    """Header ``x1,...,xd,y`` followed by one row per observation."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow([f"x{k + 1}" for k in range(data.d)] + ["y"])
        for x, y in zip(data.X, data.Y):
            out.writerow([repr(float(v)) for v in x] + [repr(float(y))])


def load_csv(path) -> Dataset:
    """Read a dataset written by `save_csv` (last column is the response)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        width = len(header)
        if width < 2:
            raise ValueError(f"{path}:1: need at least one input column and y")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                raise ValueError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric field") from None
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    arr = np.array(rows)
    return Dataset(arr[:, :-1], arr[:, -1])


def load_inputs(path) -> np.ndarray:
    """Test inputs from a CSV with header ``x1,...,xd`` (a trailing ``y`` is dropped)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        keep = len(header) - 1 if header and header[-1] == "y" else len(header)
        if keep < 1:
            raise ValueError(f"{path}:1: no input columns")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row[:keep]]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric field") from None
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.array(rows)
