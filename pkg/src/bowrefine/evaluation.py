"""Desk-scale evaluation: chi-squared kernel, kernel ridge scoring and MAP."""
from __future__ import annotations

import json
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg

from .core import as_array
from .errors import NoPositives

CHI2_EPS = 1e-12
_CHUNK_ELEMS = 4_000_000


@dataclass(frozen=True)
class LabelMatrix:
    values: np.ndarray
    class_names: Sequence[str] = ()

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise ValueError("label matrix must be 2-D")
        if not np.all((v == 0) | (v == 1)):
            raise ValueError("labels must be binary")
        v = v.astype(np.int8)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        names = tuple(self.class_names) or tuple(f"c{j}" for j in range(v.shape[1]))
        if len(names) != v.shape[1]:
            raise ValueError(f"{len(names)} class names for {v.shape[1]} classes")
        object.__setattr__(self, "class_names", tuple(str(s) for s in names))

    @property
    def n_classes(self) -> int:
        return self.values.shape[1]

    def rows(self, idx) -> "LabelMatrix":
        return LabelMatrix(self.values[idx], self.class_names)


@dataclass
class EvalReport:
    per_class_ap: Dict[str, float]
    map: float
    wall_time_seconds: Dict[str, float] = field(default_factory=dict)
    skipped_classes: List[str] = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("class,ap\n")
            for name, ap in self.per_class_ap.items():
                fh.write(f"{name},{ap!r}\n")
            fh.write(f"MAP,{self.map!r}\n")


def _l1_normalize(X):
    X = as_array(X)
    s = X.sum(axis=1)
    return X * np.divide(1.0, s, out=np.zeros_like(s), where=s > 0)[:, None]


def chi2_distance(X1, X2=None, normalize: bool = True) -> np.ndarray:
    """Pairwise ``sum_d (x_d - y_d)^2 / (x_d + y_d + eps)`` between rows."""
    A = _l1_normalize(X1) if normalize else as_array(X1)
    B = A if X2 is None else (_l1_normalize(X2) if normalize else as_array(X2))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"column counts differ: {A.shape[1]} vs {B.shape[1]}")
    out = np.empty((A.shape[0], B.shape[0]))
    step = max(1, _CHUNK_ELEMS // max(1, B.shape[0] * B.shape[1]))
    for start in range(0, A.shape[0], step):
        a = A[start:start + step, None, :]
        out[start:start + step] = ((a - B[None]) ** 2 / (a + B[None] + CHI2_EPS)).sum(axis=2)
    if X2 is None:
        out = (out + out.T) / 2
        np.fill_diagonal(out, 0.0)
    return out


def auto_gamma(D_self: np.ndarray) -> float:
    """Inverse mean off-diagonal chi-squared distance."""
    n = D_self.shape[0]
    if n < 2:
        return 1.0
    mean = D_self[np.triu_indices(n, 1)].mean()
    return 1.0 / mean if mean > 0 else 1.0


def chi2_kernel(X1, X2=None, gamma="auto"):
    """Exponentiated chi-squared kernel ``exp(-gamma * chi2(x, y))`` on L1-normalized rows.

    ``gamma="auto"`` uses the inverse mean pairwise distance among the rows
    of ``X1``. Returns ``(K, gamma)``.
    """
    D11 = chi2_distance(X1) if (X2 is None or gamma == "auto") else None
    if gamma == "auto":
        gamma = auto_gamma(D11)
    D = D11 if X2 is None else chi2_distance(X1, X2)
    return np.exp(-gamma * D), float(gamma)


def krr_classify(K_train: np.ndarray, K_cross: np.ndarray, labels, ridge: float = 0.1) -> np.ndarray:
    """One-vs-rest kernel ridge scores ``K_cross (K_train + ridge I)^-1 Y``."""
    if not ridge > 0:
        raise ValueError("ridge must be positive")
    Yl = labels.values if isinstance(labels, LabelMatrix) else np.asarray(labels)
    Yl = np.asarray(Yl, dtype=float)
    n = K_train.shape[0]
    if K_cross.shape[1] != n or Yl.shape[0] != n:
        raise ValueError("kernel and label shapes disagree")
    c = scipy.linalg.cho_factor(K_train + ridge * np.eye(n))
    return K_cross @ scipy.linalg.cho_solve(c, Yl)


def average_precision(scores, relevance) -> float:
    """Non-interpolated average precision; ties in score go to the smaller index."""
    scores = np.asarray(scores, dtype=float)
    rel = np.asarray(relevance).astype(bool)
    if scores.shape != rel.shape:
        raise ValueError("scores and relevance differ in length")
    if not rel.any():
        raise NoPositives("no relevant items")
    order = np.argsort(-scores, kind="stable")
    hits = rel[order]
    ranks = np.flatnonzero(hits) + 1
    precision = np.arange(1, ranks.size + 1) / ranks
    return float(precision.mean())


def mean_average_precision(scores: np.ndarray, labels, wall_time: Optional[dict] = None) -> EvalReport:
    """Per-class AP over the columns of ``scores``; classes without positives are skipped."""
    if isinstance(labels, LabelMatrix):
        names, Yl = labels.class_names, labels.values
    else:
        Yl = np.asarray(labels)
        names = tuple(f"c{j}" for j in range(Yl.shape[1]))
    per_class, skipped = {}, []
    for j, name in enumerate(names):
        try:
            per_class[name] = average_precision(scores[:, j], Yl[:, j])
        except NoPositives:
            skipped.append(name)
    if not per_class:
        raise NoPositives("no class has a positive test item")
    if skipped:
        warnings.warn(f"classes without test positives skipped: {', '.join(skipped)}", stacklevel=2)
    return EvalReport(
        per_class_ap=per_class,
        map=float(np.mean(list(per_class.values()))),
        wall_time_seconds=dict(wall_time or {}),
        skipped_classes=skipped,
    )


def evaluate_model(X, labels: LabelMatrix, train_idx, test_idx, ridge: float = 0.1) -> EvalReport:
    """Chi-squared kernel ridge classification of the test rows; MAP on the test labels."""
    X = as_array(X)
    t0 = time.perf_counter()
    K_train, gamma = chi2_kernel(X[train_idx])
    K_cross, _ = chi2_kernel(X[test_idx], X[train_idx], gamma=gamma)
    t1 = time.perf_counter()
    scores = krr_classify(K_train, K_cross, labels.rows(train_idx), ridge)
    t2 = time.perf_counter()
    report = mean_average_precision(scores, labels.rows(test_idx))
    t3 = time.perf_counter()
    report.wall_time_seconds = {"kernel": t1 - t0, "classify": t2 - t1, "score": t3 - t2, "total": t3 - t0}
    return report
