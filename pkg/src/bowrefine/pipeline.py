"""File-based pipeline stages: synth, refine, reduce, eval.

Each stage reads its inputs from disk, writes its outputs plus a JSON
manifest to ``out_dir`` and returns the manifest. A manifest records the
stage, the config hash, package versions, input/output files and shapes.
Wall-clock timings live under the ``wall_time_seconds`` key so that
reruns can be compared with that key stripped.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import platform
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from . import __version__
from .core import linear_kernel
from .errors import ConfigError
from .evaluation import LabelMatrix, evaluate_model
from .graph import GRAPH_KINDS, build_graph
from .io import read_bow, read_dense_csv, write_bow, write_dense_csv, write_mtx
from .reduce import VARIANTS, reduce_bow, semantic_spectral_clustering
from .refine import MODES, RefineConfig, refine
from .synth import SynthConfig, synth_dataset

logger = logging.getLogger(__name__)

Y_FILE = "Y.csv"
T_FILE = "T.csv"
LABELS_FILE = "labels.csv"
SPLIT_FILE = "split.csv"
GRAPH_FILE = "graph.mtx"
REFINED_FILE = "F_star.csv"
MEMBERSHIP_FILE = "U.csv"
REDUCED_FILE = "Y_star.csv"
EIGEN_FILE = "eigenvalues.csv"
CURVES_FILE = "curves.csv"
STAGES = ("synth", "refine", "reduce", "eval")


@dataclass
class PipelineConfig:
    """Every knob of a run. Paths left as ``None`` default to files in ``out_dir``."""

    out_dir: str = "run"
    y_path: Optional[str] = None
    t_path: Optional[str] = None
    labels_path: Optional[str] = None
    split_path: Optional[str] = None
    refined_path: Optional[str] = None
    synth: dict = field(default_factory=dict)
    graph: str = "ssr"
    k: int = 20
    alpha: float = 0.995
    tol: float = 1e-6
    max_iters: int = 1000
    mode: str = "iterative"
    variant: str = "ssc2"
    K: int = 100
    seed: int = 0
    ridge: float = 0.1
    n_jobs: int = 1
    normalize_tags: bool = True
    normalize_visual: bool = False

    def __post_init__(self):
        if self.graph not in GRAPH_KINDS:
            raise ConfigError(f"graph must be one of {GRAPH_KINDS}, got {self.graph!r}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        if not self.ridge > 0:
            raise ConfigError("ridge must be positive")
        if self.n_jobs < 1:
            raise ConfigError("n_jobs must be >= 1")
        # validate the nested configs eagerly
        self.refine_config()
        self.synth_config()

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return asdict(self)

    def identity(self) -> dict:
        """Config without ``out_dir``: what determines the outputs, not where they go."""
        d = self.to_dict()
        del d["out_dir"]
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.identity(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def refine_config(self) -> RefineConfig:
        return RefineConfig(alpha=self.alpha, tol=self.tol, max_iterations=self.max_iters, mode=self.mode)

    def synth_config(self) -> SynthConfig:
        try:
            return SynthConfig(**{"seed": self.seed, **self.synth})
        except TypeError as exc:
            raise ConfigError(f"bad synth config: {exc}") from exc

    def path(self, attr: str, default: str) -> Path:
        value = getattr(self, attr)
        return Path(value) if value else Path(self.out_dir) / default


def versions() -> dict:
    return {
        "bowrefine": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _manifest(cfg: PipelineConfig, stage: str, **extra) -> dict:
    return {"stage": stage, "config_hash": cfg.config_hash(), "config": cfg.identity(),
            "versions": versions(), **extra}


def _rel(cfg: PipelineConfig, *paths: Path) -> list:
    """Input paths as recorded in manifests, relative to ``out_dir`` when inside it."""
    out = Path(cfg.out_dir).resolve()
    rel = []
    for p in paths:
        try:
            rel.append(str(Path(p).resolve().relative_to(out)))
        except ValueError:
            rel.append(str(p))
    return rel


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _require(*paths: Path) -> None:
    missing = [str(p) for p in paths if not p.is_file()]
    if missing:
        raise FileNotFoundError(f"missing input files: {', '.join(missing)}")


def _prepare_out(cfg: PipelineConfig) -> Path:
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    probe = out / ".write_probe"
    try:
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc
    return out


def write_labels(path, labels: LabelMatrix) -> None:
    write_dense_csv(path, labels.values, labels.class_names)


def read_labels(path) -> LabelMatrix:
    values, header = read_dense_csv(path)
    return LabelMatrix(values.astype(np.int8), header)


def write_split(path, train_idx, test_idx) -> None:
    rows = sorted([(int(i), "train") for i in train_idx] + [(int(i), "test") for i in test_idx])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["image", "split"])
        w.writerows(rows)


def read_split(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    bad = {r["split"] for r in rows} - {"train", "test"}
    if bad:
        raise ValueError(f"{path}: unknown split values {sorted(bad)}")
    train = np.array([int(r["image"]) for r in rows if r["split"] == "train"], dtype=int)
    test = np.array([int(r["image"]) for r in rows if r["split"] == "test"], dtype=int)
    return train, test


def write_membership(path, U, feature_ids) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature_id", "cluster_id"])
        w.writerows(zip(feature_ids, (int(c) for c in U.labels)))


def read_membership(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [r["feature_id"] for r in rows], np.array([int(r["cluster_id"]) for r in rows])


def run_synth(cfg: PipelineConfig) -> dict:
    scfg = cfg.synth_config()
    out = _prepare_out(cfg)
    Y, T, labels, (train, test) = synth_dataset(scfg)
    write_bow(out / Y_FILE, Y)
    write_bow(out / T_FILE, T)
    write_labels(out / LABELS_FILE, labels)
    write_split(out / SPLIT_FILE, train, test)
    manifest = _manifest(cfg, "synth", synth=scfg.to_dict(),
                         outputs={Y_FILE: list(Y.shape), T_FILE: list(T.shape),
                                  LABELS_FILE: list(labels.values.shape), SPLIT_FILE: [len(train), len(test)]})
    _write_json(out / "synth_manifest.json", manifest)
    return manifest


def run_refine(cfg: PipelineConfig) -> dict:
    y_path, t_path = cfg.path("y_path", Y_FILE), cfg.path("t_path", T_FILE)
    _require(y_path, t_path)
    rcfg = cfg.refine_config()
    out = _prepare_out(cfg)
    Y, T = read_bow(y_path), read_bow(t_path)
    t0 = time.perf_counter()
    A = linear_kernel(T, row_normalize=cfg.normalize_tags)
    extra = {}
    if cfg.graph != "knn":
        extra["n_jobs"] = cfg.n_jobs
    if cfg.graph == "ssr":
        extra["normalize_rows"] = cfg.normalize_visual
    W = build_graph(cfg.graph, A, cfg.k, Y=Y if cfg.graph == "ssr" else None, **extra)
    t1 = time.perf_counter()
    F = refine(Y, W, rcfg)
    t2 = time.perf_counter()
    write_mtx(out / GRAPH_FILE, W)
    write_bow(out / REFINED_FILE, F)
    manifest = _manifest(cfg, "refine", inputs=_rel(cfg, y_path, t_path),
                         outputs={REFINED_FILE: list(F.shape), GRAPH_FILE: [W.shape[0], int(W.nnz)]},
                         wall_time_seconds={"graph": t1 - t0, "refine": t2 - t1})
    _write_json(out / "refine_manifest.json", manifest)
    logger.info("refine: %s graph with %d edges, %.2fs", cfg.graph, W.nnz // 2, t2 - t0)
    return manifest


def run_reduce(cfg: PipelineConfig) -> dict:
    f_path = cfg.path("refined_path", REFINED_FILE)
    t_path = cfg.path("t_path", T_FILE)
    if cfg.variant == "ssc2" and not t_path.is_file():
        raise ConfigError(f"ssc2 needs the textual BOW for its affinity matrix; {t_path} not found")
    _require(f_path)
    out = _prepare_out(cfg)
    F = read_bow(f_path)
    A = linear_kernel(read_bow(t_path), row_normalize=cfg.normalize_tags) if cfg.variant == "ssc2" else None
    t0 = time.perf_counter()
    U, emb = semantic_spectral_clustering(F, cfg.K, cfg.variant, A, seed=cfg.seed)
    Ystar = reduce_bow(F, U)
    t1 = time.perf_counter()
    write_membership(out / MEMBERSHIP_FILE, U, F.feature_ids)
    write_bow(out / REDUCED_FILE, Ystar)
    write_dense_csv(out / EIGEN_FILE, emb.eigenvalues[:, None], ["eigenvalue"])
    manifest = _manifest(cfg, "reduce", inputs=_rel(cfg, f_path, *([t_path] if A is not None else [])),
                         outputs={REDUCED_FILE: list(Ystar.shape), MEMBERSHIP_FILE: [F.shape[1]],
                                  EIGEN_FILE: [cfg.K]},
                         cluster_sizes=U.cluster_sizes.tolist(), n_trivial=emb.n_trivial,
                         wall_time_seconds={"reduce": t1 - t0})
    _write_json(out / "reduce_manifest.json", manifest)
    return manifest


def run_eval(cfg: PipelineConfig) -> dict:
    """Evaluate every available model: original, refined and reduced."""
    out = Path(cfg.out_dir)
    labels_path, split_path = cfg.path("labels_path", LABELS_FILE), cfg.path("split_path", SPLIT_FILE)
    models = {"original": cfg.path("y_path", Y_FILE),
              "refined": cfg.path("refined_path", REFINED_FILE),
              "reduced": out / REDUCED_FILE}
    _require(labels_path, split_path)
    models = {name: p for name, p in models.items() if p.is_file()}
    if not models:
        raise FileNotFoundError("no model files to evaluate")
    out = _prepare_out(cfg)
    labels = read_labels(labels_path)
    train, test = read_split(split_path)
    reports, curves = {}, []
    for name, p in models.items():
        X = read_bow(p)
        if X.shape[0] != labels.values.shape[0]:
            raise ValueError(f"{p} has {X.shape[0]} rows but labels have {labels.values.shape[0]}")
        rep = evaluate_model(X, labels, train, test, ridge=cfg.ridge)
        reports[name] = rep.to_dict()
        curves.append((name, X.shape[1], rep.map, rep.wall_time_seconds["total"]))
        rep.write_csv(out / f"eval_{name}.csv")
    with open(out / CURVES_FILE, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stage", "K", "map", "seconds"])
        w.writerows((s, k, repr(m), repr(t)) for s, k, m, t in curves)
    manifest = _manifest(cfg, "eval", inputs=_rel(cfg, *models.values()), reports=reports,
                         map={name: r["map"] for name, r in reports.items()})
    _write_json(out / "eval_report.json", manifest)
    return manifest


RUNNERS = {"synth": run_synth, "refine": run_refine, "reduce": run_reduce, "eval": run_eval}


def run_pipeline(cfg: PipelineConfig) -> dict:
    return {stage: RUNNERS[stage](cfg) for stage in STAGES}
