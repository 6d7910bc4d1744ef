"""File formats and normalization: headerless CSV datasets, plain-text model
files, and the [0, 1] min-max normalization applied to real-world data.

All floating-point values are written with 17 significant digits so
save/load round-trips are value-exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import DataError, DataSet, MixtureModel

FMT = "%.17g"


def _fmt(v: float) -> str:
    return FMT % v


def load_csv(path) -> DataSet:
    """Load a headerless numeric CSV (one point per row, '.' decimals).

    Rejects empty files, ragged rows, and non-numeric or non-finite tokens,
    naming the offending row and column (1-based).
    """
    path = Path(path)
    rows: list[list[float]] = []
    width: int | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line and width is None:
                continue
            tokens = line.split(",")
            if width is None:
                width = len(tokens)
            elif len(tokens) != width:
                raise DataError(
                    f"{path}: row {i} has {len(tokens)} fields, expected {width}"
                )
            parsed = []
            for j, tok in enumerate(tokens, start=1):
                try:
                    v = float(tok)
                except ValueError:
                    raise DataError(
                        f"{path}: row {i}, column {j}: bad token {tok!r}"
                    ) from None
                if not np.isfinite(v):
                    raise DataError(f"{path}: row {i}, column {j}: non-finite value")
                parsed.append(v)
            rows.append(parsed)
    if not rows:
        raise DataError(f"{path}: empty file")
    return DataSet(np.array(rows, dtype=np.float64))


def save_csv(data: DataSet, path) -> None:
    np.savetxt(path, data.points, fmt=FMT, delimiter=",", newline="\n")


def save_model(model: MixtureModel, path) -> None:
    """Plain-text model file: `gmm K D`, then per component a weight line, a
    mean line, and D covariance rows."""
    lines = [f"gmm {model.k} {model.d}"]
    for k in range(model.k):
        lines.append(f"w {_fmt(model.weights[k])}")
        lines.append("mu " + " ".join(_fmt(v) for v in model.means[k]))
        for row in model.covariances[k]:
            lines.append("sigma " + " ".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path) -> MixtureModel:
    path = Path(path)
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty model file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "gmm":
        raise DataError(f"{path}: expected header 'gmm <K> <D>', got {lines[0]!r}")
    try:
        k, d = int(head[1]), int(head[2])
    except ValueError:
        raise DataError(f"{path}: bad header {lines[0]!r}") from None
    expected = 1 + k * (2 + d)
    if len(lines) != expected:
        raise DataError(f"{path}: expected {expected} lines, got {len(lines)}")
    weights = np.empty(k)
    means = np.empty((k, d))
    covs = np.empty((k, d, d))
    pos = 1
    try:
        for c in range(k):
            tag, *vals = lines[pos].split()
            if tag != "w" or len(vals) != 1:
                raise DataError(f"{path}: line {pos + 1}: expected 'w <value>'")
            weights[c] = float(vals[0])
            pos += 1
            tag, *vals = lines[pos].split()
            if tag != "mu" or len(vals) != d:
                raise DataError(f"{path}: line {pos + 1}: expected 'mu' with {d} values")
            means[c] = [float(v) for v in vals]
            pos += 1
            for i in range(d):
                tag, *vals = lines[pos].split()
                if tag != "sigma" or len(vals) != d:
                    raise DataError(
                        f"{path}: line {pos + 1}: expected 'sigma' with {d} values"
                    )
                covs[c, i] = [float(v) for v in vals]
                pos += 1
    except ValueError:
        raise DataError(f"{path}: line {pos + 1}: bad numeric value") from None
    return MixtureModel(weights, means, covs)


@dataclass(frozen=True)
class NormalizationRecord:
    """Per-coordinate affine transform applied by normalize.

    x' = (x - offset) / scale.  Coordinates with zero original spread are
    mapped to constant 0, flagged in `degenerate`, and keep scale 1 so
    denormalization still recovers the original constant.
    """

    offset: np.ndarray
    scale: np.ndarray
    degenerate: np.ndarray

    def denormalize(self, data: DataSet) -> DataSet:
        return DataSet(data.points * self.scale + self.offset)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(_fmt(v) for v in self.offset) + "\n")
            fh.write(",".join(_fmt(v) for v in self.scale) + "\n")


def normalize(data: DataSet) -> tuple[DataSet, NormalizationRecord]:
    """Translate and scale each coordinate to fit [0, 1].

    Zero-spread coordinates are kept (as constant 0) and flagged rather than
    dropped, so D and every downstream bound stay unchanged.
    """
    lo = data.points.min(axis=0)
    hi = data.points.max(axis=0)
    spread = hi - lo
    degenerate = spread == 0.0
    scale = np.where(degenerate, 1.0, spread)
    points = (data.points - lo) / scale
    record = NormalizationRecord(offset=lo, scale=scale, degenerate=degenerate)
    return DataSet(points), record
