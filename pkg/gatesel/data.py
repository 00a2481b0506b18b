"""
Datasets, hyperspectral cubes and the preprocessing steps applied before
feature selection: min-max scaling, channel centering, stratified splitting
and SMOTE rebalancing.
"""

import functools
import json
import logging
import os
from dataclasses import dataclass
from typing import ClassVar, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from sklearn.neighbors import NearestNeighbors

from .errors import ConfigError, DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Row-major feature matrix with dense integer class labels.

    Attributes:
        X: n x P matrix of finite reals.
        Z: n labels in {0..C-1}; every class occurs at least once.
        feature_names: P column names.
        class_names: original spelling of each dense label (the relabeling map).
    """

    X: np.ndarray
    Z: np.ndarray
    feature_names: Tuple[str, ...]
    class_names: Tuple[str, ...]

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        Z = np.asarray(self.Z)
        if X.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got shape {X.shape}")
        if Z.ndim != 1 or Z.shape[0] != X.shape[0]:
            raise DataError(f"label vector of shape {Z.shape} does not match {X.shape[0]} rows")
        if Z.size and not np.issubdtype(Z.dtype, np.integer):
            raise DataError("labels must be integers; relabel at load time")
        Z = Z.astype(np.int64)
        if not np.all(np.isfinite(X)):
            raise DataError("feature matrix contains non-finite values")
        if len(self.feature_names) != X.shape[1]:
            raise DataError(f"{len(self.feature_names)} feature names for {X.shape[1]} columns")
        n_classes = len(self.class_names)
        if n_classes == 0 or X.shape[0] == 0:
            raise DataError("dataset is empty")
        if Z.min() < 0 or Z.max() >= n_classes:
            raise DataError(f"labels must lie in 0..{n_classes - 1}")
        missing = np.setdiff1d(np.arange(n_classes), Z)
        if missing.size:
            names = [self.class_names[i] for i in missing]
            raise DataError(f"classes without rows: {names}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "feature_names", tuple(str(f) for f in self.feature_names))
        object.__setattr__(self, "class_names", tuple(str(c) for c in self.class_names))

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    def class_sizes(self) -> np.ndarray:
        return np.bincount(self.Z, minlength=self.class_count)

    def onehot(self) -> np.ndarray:
        return np.eye(self.class_count)[self.Z]

    def take(self, rows: Sequence[int]) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.X[rows], self.Z[rows], self.feature_names, self.class_names)

    def select_columns(self, cols: Sequence[int]) -> "Dataset":
        cols = np.asarray(cols, dtype=np.int64)
        names = tuple(self.feature_names[c] for c in cols)
        return Dataset(self.X[:, cols], self.Z, names, self.class_names)

    def with_features(self, X: np.ndarray) -> "Dataset":
        return Dataset(X, self.Z, self.feature_names, self.class_names)


@dataclass(frozen=True, eq=False)
class HsiCube:
    """H x W x P hyperspectral scene with a ground-truth grid (0 = unknown)."""

    UNKNOWN: ClassVar[int] = 0

    pixels: np.ndarray
    labels: np.ndarray
    band_names: Tuple[str, ...] = ()

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        labels = np.asarray(self.labels)
        if pixels.ndim != 3:
            raise DataError(f"cube must be H x W x P, got shape {pixels.shape}")
        if labels.shape != pixels.shape[:2]:
            raise DataError(f"label grid {labels.shape} does not match cube {pixels.shape[:2]}")
        if pixels.shape[2] == 0:
            raise DataError("cube has no bands")
        if not np.all(np.isfinite(pixels)):
            raise DataError("cube contains non-finite values")
        if np.any(labels < 0):
            raise DataError("negative ground-truth labels")
        names = self.band_names or tuple(f"band_{j}" for j in range(pixels.shape[2]))
        if len(names) != pixels.shape[2]:
            raise DataError(f"{len(names)} band names for {pixels.shape[2]} bands")
        object.__setattr__(self, "pixels", pixels)
        object.__setattr__(self, "labels", labels.astype(np.int64))
        object.__setattr__(self, "band_names", tuple(str(b) for b in names))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def band_count(self) -> int:
        return self.pixels.shape[2]

    def annotated_mask(self) -> np.ndarray:
        return self.labels != self.UNKNOWN

    def flat_pixels(self) -> np.ndarray:
        return self.pixels.reshape(-1, self.band_count)

    def with_pixels(self, pixels: np.ndarray) -> "HsiCube":
        return HsiCube(pixels, self.labels, self.band_names)

    def to_dataset(self) -> Tuple[Dataset, np.ndarray]:
        """Return the annotated pixels (raster order) and their flat indices."""
        flat_idx = np.flatnonzero(self.annotated_mask().ravel())
        if flat_idx.size == 0:
            raise DataError("cube has no annotated pixels")
        raw = self.labels.ravel()[flat_idx]
        classes = np.unique(raw)
        Z = np.searchsorted(classes, raw)
        dataset = Dataset(
            self.flat_pixels()[flat_idx],
            Z,
            self.band_names,
            tuple(str(c) for c in classes),
        )
        return dataset, flat_idx


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.1
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")


def load_delimited(path: str, label_column: Union[str, int] = -1, delimiter: str = ",",
                   header: bool = True) -> Dataset:
    """
    Load a delimited text table into a Dataset.

    Args:
        path: file to read.
        label_column: column name, or integer position (negative counts from the end).
        delimiter: field separator, e.g. "," or "\\t".
        header: whether the first row holds column names.

    Returns:
        Dataset with file row order preserved and labels relabeled to 0..C-1
        in sorted order of their original values.
    """
    if not os.path.exists(path):
        raise DataError(f"data file not found: {path}")
    try:
        frame = pd.read_csv(path, sep=delimiter, header=0 if header else None)
    except pd.errors.EmptyDataError as exc:
        raise DataError(f"{path} is empty") from exc
    if frame.empty:
        raise DataError(f"{path} has no data rows")

    if isinstance(label_column, (int, np.integer)):
        try:
            label_key = frame.columns[label_column]
        except IndexError as exc:
            raise DataError(f"label column {label_column} out of range for {frame.shape[1]} columns") from exc
    else:
        if label_column not in frame.columns:
            raise DataError(f"label column {label_column!r} not in {list(frame.columns)}")
        label_key = label_column

    raw_labels = frame[label_key]
    features = frame.drop(columns=[label_key])
    try:
        X = features.apply(pd.to_numeric, errors="raise").to_numpy(dtype=np.float64)
    except (ValueError, TypeError) as exc:
        raise DataError(f"non-numeric cell in {path}: {exc}") from exc
    if not np.all(np.isfinite(X)):
        bad = np.argwhere(~np.isfinite(X))[0]
        raise DataError(f"non-finite value in {path} at row {bad[0]}, column {bad[1]}")

    values = raw_labels.to_numpy()
    try:
        classes = sorted(set(values.tolist()))
    except TypeError:
        classes = sorted(set(values.tolist()), key=str)
    index = {label: i for i, label in enumerate(classes)}
    Z = np.array([index[v] for v in values.tolist()], dtype=np.int64)

    if header:
        names = tuple(str(c) for c in features.columns)
    else:
        names = tuple(f"x{c}" for c in features.columns)
    dataset = Dataset(X, Z, names, tuple(str(c) for c in classes))
    logger.info("Loaded %s: n=%d P=%d C=%d", path, dataset.n_rows, dataset.n_features, dataset.class_count)
    return dataset


def load_cube(descriptor_path: str) -> HsiCube:
    """
    Load a hyperspectral cube described by a JSON sidecar.

    Descriptor keys: height, width, bands, data, labels and optionally
    dtype, labels_dtype, format ("binary" or "delimited"), interleave
    ("bip" or "bsq"), delimiter and band_names. Paths are relative to the
    descriptor.
    """
    if not os.path.exists(descriptor_path):
        raise DataError(f"cube descriptor not found: {descriptor_path}")
    with open(descriptor_path, "r") as fh:
        desc = json.load(fh)
    try:
        H, W, P = int(desc["height"]), int(desc["width"]), int(desc["bands"])
        data_path = desc["data"]
        labels_path = desc["labels"]
    except KeyError as exc:
        raise DataError(f"cube descriptor misses key {exc}") from exc

    base = os.path.dirname(os.path.abspath(descriptor_path))
    data_path = os.path.join(base, data_path)
    labels_path = os.path.join(base, labels_path)
    for p in (data_path, labels_path):
        if not os.path.exists(p):
            raise DataError(f"cube file not found: {p}")

    fmt = desc.get("format", "binary")
    if fmt == "binary":
        raw = np.fromfile(data_path, dtype=np.dtype(desc.get("dtype", "float32")))
        if raw.size != H * W * P:
            raise DataError(f"{data_path} holds {raw.size} values, expected {H * W * P}")
        interleave = desc.get("interleave", "bip")
        if interleave == "bip":
            pixels = raw.reshape(H, W, P)
        elif interleave == "bsq":
            pixels = raw.reshape(P, H, W).transpose(1, 2, 0)
        else:
            raise DataError(f"unknown interleave {interleave!r}")
        labels = np.fromfile(labels_path, dtype=np.dtype(desc.get("labels_dtype", "int32")))
    elif fmt == "delimited":
        sep = desc.get("delimiter", ",")
        matrix = pd.read_csv(data_path, sep=sep, header=None).to_numpy(dtype=np.float64)
        if matrix.shape != (H * W, P):
            raise DataError(f"{data_path} has shape {matrix.shape}, expected {(H * W, P)}")
        pixels = matrix.reshape(H, W, P)
        labels = pd.read_csv(labels_path, sep=sep, header=None).to_numpy()
    else:
        raise DataError(f"unknown cube format {fmt!r}")

    if labels.size != H * W:
        raise DataError(f"{labels_path} holds {labels.size} labels, expected {H * W}")
    cube = HsiCube(pixels, labels.reshape(H, W), tuple(desc.get("band_names", ())))
    logger.info("Loaded cube %s: %dx%dx%d, %d annotated pixels",
                descriptor_path, H, W, P, int(cube.annotated_mask().sum()))
    return cube


@functools.singledispatch
def minmax_scale(data):
    """Scale to [0, 1]: per feature for a Dataset, over the whole cube for an HsiCube."""
    raise TypeError(f"cannot scale {type(data).__name__}")


@minmax_scale.register
def _(data: Dataset) -> Dataset:
    X = data.X
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    constant = span == 0
    if np.any(constant):
        names = [data.feature_names[j] for j in np.flatnonzero(constant)]
        logger.warning("Constant features mapped to zero by min-max scaling: %s", names)
    scaled = np.where(constant, 0.0, (X - lo) / np.where(constant, 1.0, span))
    return data.with_features(scaled)


@minmax_scale.register
def _(data: HsiCube) -> HsiCube:
    lo = data.pixels.min()
    span = data.pixels.max() - lo
    if span == 0:
        logger.warning("Constant cube mapped to zero by min-max scaling")
        return data.with_pixels(np.zeros_like(data.pixels))
    return data.with_pixels((data.pixels - lo) / span)


def mean_center_channels(cube: HsiCube) -> HsiCube:
    """Subtract each band's mean over all pixels of the scene."""
    means = cube.flat_pixels().mean(axis=0)
    return cube.with_pixels(cube.pixels - means)


def standardize(data: Dataset) -> Dataset:
    """Per-feature z-scoring; constant features become zero."""
    mu = data.X.mean(axis=0)
    sd = data.X.std(axis=0)
    constant = sd == 0
    return data.with_features(np.where(constant, 0.0, (data.X - mu) / np.where(constant, 1.0, sd)))


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def stratified_split_indices(data: Dataset, spec: SplitSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Return sorted (train_idx, test_idx); deterministic for a fixed seed."""
    rng = np.random.default_rng(spec.seed)
    n = data.n_rows
    if spec.stratified:
        chosen = []
        for c in range(data.class_count):
            members = np.flatnonzero(data.Z == c)
            if members.size < 2:
                raise DataError(
                    f"class {data.class_names[c]!r} has {members.size} row(s); cannot stratify"
                )
            n_test = min(max(_round_half_up(spec.test_fraction * members.size), 1), members.size - 1)
            chosen.append(rng.permutation(members)[:n_test])
        test_idx = np.sort(np.concatenate(chosen))
    else:
        if n < 2:
            raise DataError("need at least two rows to split")
        n_test = min(max(_round_half_up(spec.test_fraction * n), 1), n - 1)
        test_idx = np.sort(rng.permutation(n)[:n_test])
    train_idx = np.setdiff1d(np.arange(n), test_idx)
    return train_idx, test_idx


def stratified_split(data: Dataset, spec: SplitSpec) -> Tuple[Dataset, Dataset]:
    train_idx, test_idx = stratified_split_indices(data, spec)
    return data.take(train_idx), data.take(test_idx)


def _smote_samples(X: np.ndarray, n_new: int, k: int, rng: np.random.Generator) -> np.ndarray:
    m = X.shape[0]
    _, idx = NearestNeighbors(n_neighbors=k + 1).fit(X).kneighbors(X)
    # duplicates can push the query row out of position 0
    neighbours = np.array([row[row != i][:k] for i, row in enumerate(idx)])
    base = rng.integers(0, m, size=n_new)
    partner = neighbours[base, rng.integers(0, k, size=n_new)]
    gap = rng.random(n_new)[:, None]
    return X[base] + gap * (X[partner] - X[base])


def smote_oversample(data: Dataset, per_class_target: int, k: int = 5, seed: int = 0) -> Dataset:
    """
    Bring every class to exactly ``per_class_target`` rows.

    Classes at or above the target are subsampled without replacement.
    Smaller classes keep all their rows and receive synthetic rows
    x_i + u * (x_nn - x_i), u in [0, 1), with x_nn one of the k nearest
    same-class neighbours of x_i.
    """
    if per_class_target < 1:
        raise ConfigError(f"per_class_target must be >= 1, got {per_class_target}")
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    rng = np.random.default_rng(seed)
    blocks = []
    for c in range(data.class_count):
        members = np.flatnonzero(data.Z == c)
        if members.size >= per_class_target:
            rows = np.sort(rng.choice(members, size=per_class_target, replace=False))
            block = data.X[rows]
        else:
            if members.size < 2:
                raise DataError(
                    f"class {data.class_names[c]!r} has a single row; SMOTE needs a neighbour"
                )
            own = data.X[members]
            synthetic = _smote_samples(own, per_class_target - members.size,
                                       min(k, members.size - 1), rng)
            block = np.vstack([own, synthetic])
            logger.debug("Class %s: %d synthetic rows", data.class_names[c], synthetic.shape[0])
        blocks.append(block)
    X = np.vstack(blocks)
    Z = np.repeat(np.arange(data.class_count), per_class_target)
    return Dataset(X, Z, data.feature_names, data.class_names)
