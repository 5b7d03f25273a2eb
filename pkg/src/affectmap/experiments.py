"""Evaluation protocols: cross-validation, significance, ablation,
cross-lingual transfer, and reliability comparison.

Every model training inside a protocol draws its seed deterministically
from (base seed, dataset id, direction, spec name, fold index), so runs
are reproducible cell by cell no matter how work is scheduled, and every
spec sees identical train/test splits, which is what licenses the paired
t-tests between specs.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    ContractError,
    DegenerateInputError,
)
from .lexicon import AlignedLexicon, concat, project
from .models import (
    BoostedEnsemble,
    FfnnConfig,
    FfnnModel,
    KnnModel,
    LinearModel,
)
from .stats import ReliabilityRecord, format_stars, paired_t_test, pearson

__all__ = [
    "derive_seed",
    "FoldSplit",
    "make_folds",
    "ModelSpec",
    "CvResult",
    "cross_validate",
    "EvalReport",
    "AblationReport",
    "directions_for",
    "run_monolingual",
    "run_ablation",
    "run_crosslingual",
    "compare_to_shr",
    "write_report_json",
    "write_report_table",
]

_DIMENSIONAL = frozenset(("valence", "arousal", "dominance"))


def derive_seed(base: int, *parts) -> int:
    """Stable 63-bit seed from a base seed and any hashable labels."""
    h = hashlib.blake2s(digest_size=8)
    h.update(str(int(base)).encode("utf-8"))
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest(), "little") % (2**63)


@dataclass(frozen=True)
class FoldSplit:
    """Partition of 0..n-1 into folds whose sizes differ by at most 1."""

    n_items: int
    k_folds: int
    seed: int
    assignment: tuple[int, ...]

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.assignment) == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.assignment) != fold)


def make_folds(n: int, k: int = 10, seed: int = 0) -> FoldSplit:
    """Shuffle indices, deal them into k contiguous blocks; the remainder
    goes one extra item per fold starting from fold 0."""
    if k < 2:
        raise ContractError(f"need at least 2 folds, got {k}")
    if k > n:
        raise ContractError(f"cannot split {n} items into {k} folds")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    base, remainder = divmod(n, k)
    assignment = np.empty(n, dtype=np.int64)
    start = 0
    for fold in range(k):
        size = base + (1 if fold < remainder else 0)
        assignment[order[start : start + size]] = fold
        start += size
    return FoldSplit(n_items=n, k_folds=k, seed=seed, assignment=tuple(int(a) for a in assignment))


@dataclass
class ModelSpec:
    """A named, buildable model configuration.

    kind is one of lr, knn, ffnn, boosted. params go to the model
    constructor; any "seed" inside them is ignored because protocol code
    derives per-cell seeds itself. An optional word -> feature-vector map
    replaces the source-side ratings as model input (the embedding
    baseline).
    """

    name: str
    kind: str
    params: dict = field(default_factory=dict)
    features: Mapping | None = None

    _KINDS = ("lr", "knn", "ffnn", "boosted")

    def __post_init__(self):
        aliases = {"linear": "lr", "wei": "boosted"}
        self.kind = aliases.get(self.kind, self.kind)
        if self.kind not in self._KINDS:
            raise ConfigurationError(
                f"unknown model kind {self.kind!r}; expected one of {self._KINDS}"
            )

    def build(self, seed: int = 0):
        params = dict(self.params)
        params.pop("seed", None)
        if self.kind == "lr":
            if params:
                raise ConfigurationError(f"lr takes no parameters, got {params}")
            return LinearModel()
        if self.kind == "knn":
            return KnnModel(**params)
        if self.kind == "ffnn":
            if "hidden_sizes" in params:
                params["hidden_sizes"] = tuple(params["hidden_sizes"])
            return FfnnModel(FfnnConfig(**params, seed=seed))
        stages = params.pop("stages", 10)
        base = params.pop("base", None)
        if params:
            raise ConfigurationError(f"unknown boosted parameters: {params}")
        base_config = None
        if base is not None:
            base = dict(base)
            if "hidden_sizes" in base:
                base["hidden_sizes"] = tuple(base["hidden_sizes"])
            base_config = FfnnConfig(**base)
        return BoostedEnsemble(stages=stages, base_config=base_config, seed=seed)


def _feature_matrix(features: Mapping, words) -> np.ndarray:
    missing = [w for w in words if w not in features]
    if missing:
        raise ConfigurationError(
            f"{len(missing)} dataset words have no feature vector "
            f"(first few: {missing[:3]})"
        )
    return np.array([features[w] for w in words], dtype=np.float64)


def _inputs(spec: ModelSpec, data: AlignedLexicon) -> np.ndarray:
    if spec.features is not None:
        return _feature_matrix(spec.features, data.words)
    return data.source_matrix


@dataclass
class CvResult:
    """Per-fold per-variable correlations plus pooled-prediction ones."""

    fold_r: np.ndarray  # (k_folds, n_variables), NaN where degenerate
    degenerate_cells: list[tuple[int, int]]
    pooled_r: np.ndarray  # (n_variables,), NaN where degenerate

    def per_variable_mean(self) -> np.ndarray:
        out = np.full(self.fold_r.shape[1], np.nan)
        for v in range(self.fold_r.shape[1]):
            col = self.fold_r[:, v]
            good = col[~np.isnan(col)]
            if good.size:
                out[v] = good.mean()
        return out


def cross_validate(
    spec: ModelSpec,
    data: AlignedLexicon,
    folds: FoldSplit,
    *,
    base_seed: int = 0,
    dataset_id: str = "",
    direction: str = "",
) -> CvResult:
    """k-fold evaluation of one spec on one aligned dataset.

    Reusing one FoldSplit across specs gives every model identical
    train/test splits. Folds where a correlation is undefined (constant
    predictions, or a fold too small to correlate) are recorded as
    degenerate and left out of the means rather than imputed.
    """
    if folds.n_items != len(data):
        raise ContractError(
            f"fold split covers {folds.n_items} items but dataset has {len(data)}"
        )
    S = _inputs(spec, data)
    T = data.target_matrix
    k, n_vars = folds.k_folds, T.shape[1]
    fold_r = np.full((k, n_vars), np.nan)
    degenerate: list[tuple[int, int]] = []
    pooled_pred = np.empty_like(T)
    for fold in range(k):
        test_idx = folds.test_indices(fold)
        train_idx = folds.train_indices(fold)
        seed = derive_seed(base_seed, dataset_id, direction, spec.name, fold)
        model = spec.build(seed)
        model.fit_arrays(S[train_idx], T[train_idx])
        pred = model.predict(S[test_idx])
        pooled_pred[test_idx] = pred
        for v in range(n_vars):
            try:
                fold_r[fold, v] = pearson(pred[:, v], T[test_idx, v])
            except (DegenerateInputError, ContractError):
                degenerate.append((fold, v))
    pooled = np.full(n_vars, np.nan)
    for v in range(n_vars):
        try:
            pooled[v] = pearson(pooled_pred[:, v], T[:, v])
        except DegenerateInputError:
            pass
    return CvResult(fold_r=fold_r, degenerate_cells=degenerate, pooled_r=pooled)


def _nan_to_none(x):
    v = float(x)
    return None if np.isnan(v) else v


@dataclass
class EvalReport:
    """One dataset x direction x model evaluation."""

    dataset_id: str
    direction: str
    model: str
    variables: tuple[str, ...]
    fold_r: np.ndarray
    per_variable_r: np.ndarray
    format_average_r: float
    pooled_per_variable_r: np.ndarray
    pooled_format_average_r: float
    degenerate_cells: list[tuple[int, int]]
    n_items: int
    k_folds: int
    seed: int
    n_train: int | None = None
    best: bool = False
    significance: dict | None = None
    shr_flags: dict[str, str] | None = None

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "direction": self.direction,
            "model": self.model,
            "variables": list(self.variables),
            "fold_r": [[_nan_to_none(x) for x in row] for row in self.fold_r],
            "per_variable_r": {
                v: _nan_to_none(x)
                for v, x in zip(self.variables, self.per_variable_r)
            },
            "format_average_r": _nan_to_none(self.format_average_r),
            "pooled_per_variable_r": {
                v: _nan_to_none(x)
                for v, x in zip(self.variables, self.pooled_per_variable_r)
            },
            "pooled_format_average_r": _nan_to_none(self.pooled_format_average_r),
            "degenerate_cells": [list(c) for c in self.degenerate_cells],
            "n_items": self.n_items,
            "k_folds": self.k_folds,
            "seed": self.seed,
            "n_train": self.n_train,
            "best": self.best,
            "significance": self.significance,
            "shr_flags": self.shr_flags,
        }


def _report_from_cv(
    spec, dataset_id, direction, data, cv: CvResult, seed, k_folds
) -> EvalReport:
    per_var = cv.per_variable_mean()
    fmt_avg = float(per_var.mean()) if per_var.size else float("nan")
    pooled_avg = float(cv.pooled_r.mean()) if cv.pooled_r.size else float("nan")
    return EvalReport(
        dataset_id=dataset_id,
        direction=direction,
        model=spec.name,
        variables=data.target_format.variables,
        fold_r=cv.fold_r,
        per_variable_r=per_var,
        format_average_r=fmt_avg,
        pooled_per_variable_r=cv.pooled_r,
        pooled_format_average_r=pooled_avg,
        degenerate_cells=cv.degenerate_cells,
        n_items=len(data),
        k_folds=k_folds,
        seed=seed,
    )


def directions_for(data: AlignedLexicon) -> list[tuple[str, AlignedLexicon]]:
    """Both orientations of an aligned dataset, labeled.

    When exactly one side carries dimensional variables (valence,
    arousal, dominance) the labels are cat2dim/dim2cat; otherwise the
    neutral src2tgt/tgt2src.
    """
    src_dim = any(v in _DIMENSIONAL for v in data.source_format.variables)
    tgt_dim = any(v in _DIMENSIONAL for v in data.target_format.variables)
    if src_dim != tgt_dim:
        dim2cat = data if src_dim else data.swapped()
        return [("cat2dim", dim2cat.swapped()), ("dim2cat", dim2cat)]
    return [("src2tgt", data), ("tgt2src", data.swapped())]


def _as_dataset_map(datasets) -> dict[str, AlignedLexicon]:
    if isinstance(datasets, Mapping):
        return dict(datasets)
    return {f"d{i}": d for i, d in enumerate(datasets)}


def _content_key(data: AlignedLexicon) -> str:
    """Digest of words and matrices; fold splits are seeded from this so
    identical datasets get identical splits whatever they are called."""
    h = hashlib.blake2s(digest_size=8)
    for w in data.words:
        h.update(w.encode("utf-8"))
        h.update(b"\x00")
    h.update(np.ascontiguousarray(data.source_matrix).tobytes())
    h.update(np.ascontiguousarray(data.target_matrix).tobytes())
    return h.hexdigest()


def _fold_average_series(report: EvalReport) -> np.ndarray:
    """Per-fold format-average r, the series the significance test runs on."""
    return report.fold_r.mean(axis=1)


def _attach_significance(reports: list[EvalReport]) -> None:
    """Mark the best spec per (dataset, direction) and test it against the
    runner-up on their per-fold format-average series."""
    if not reports:
        return
    ranked = sorted(
        reports,
        key=lambda r: (-(r.format_average_r if not np.isnan(r.format_average_r) else -np.inf)),
    )
    best = ranked[0]
    best.best = True
    if len(ranked) < 2:
        return
    second = ranked[1]
    a = _fold_average_series(best)
    b = _fold_average_series(second)
    ok = ~(np.isnan(a) | np.isnan(b))
    try:
        if ok.sum() < 2:
            raise DegenerateInputError("fewer than 2 comparable folds")
        t, p, stars = paired_t_test(a[ok], b[ok])
        best.significance = {
            "versus": second.model,
            "t": float(t),
            "p": float(p),
            "stars": int(stars),
        }
    except DegenerateInputError:
        best.significance = {"versus": second.model, "result": "n.s."}


def run_monolingual(
    datasets,
    specs: Sequence[ModelSpec],
    seed: int,
    *,
    k_folds: int = 10,
    reliability: Sequence[ReliabilityRecord] | None = None,
    jobs: int = 1,
) -> list[EvalReport]:
    """Cross-validated comparison of specs on every dataset and direction.

    One fold split per dataset is shared by every spec and direction.
    The best spec per (dataset, direction) cell gets a paired t-test
    against the second best; reliability records, when given, add
    per-variable above/below flags.
    """
    data_map = _as_dataset_map(datasets)
    if not data_map:
        raise ContractError("no datasets given")
    if not specs:
        raise ContractError("no model specs given")
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigurationError(f"duplicate spec names: {names}")
    cells = []
    for ds_id, data in data_map.items():
        folds = make_folds(len(data), k_folds, derive_seed(seed, _content_key(data), "folds"))
        for direction, oriented in directions_for(data):
            for spec in specs:
                cells.append((ds_id, direction, oriented, spec, folds))

    def _run(cell):
        ds_id, direction, oriented, spec, folds = cell
        cv = cross_validate(
            spec, oriented, folds, base_seed=seed, dataset_id=ds_id, direction=direction
        )
        return _report_from_cv(spec, ds_id, direction, oriented, cv, seed, k_folds)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run, cells))
    else:
        reports = [_run(c) for c in cells]

    by_cell: dict[tuple[str, str], list[EvalReport]] = {}
    for report in reports:
        by_cell.setdefault((report.dataset_id, report.direction), []).append(report)
    for group in by_cell.values():
        _attach_significance(group)
    if reliability is not None:
        reports = [compare_to_shr(r, reliability) for r in reports]
    return reports


@dataclass
class AblationReport:
    """Average correlation drop from leaving out each source variable."""

    direction: str
    source_variables: tuple[str, ...]
    drops: dict[str, float]
    per_dataset_drops: dict[str, dict[str, float]]
    full_average_r: dict[str, float]
    seed: int
    k_folds: int

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "source_variables": list(self.source_variables),
            "drops": self.drops,
            "per_dataset_drops": self.per_dataset_drops,
            "full_average_r": self.full_average_r,
            "seed": self.seed,
            "k_folds": self.k_folds,
        }


def run_ablation(datasets, direction: str, seed: int, *, k_folds: int = 10) -> AblationReport:
    """Leave-one-source-variable-out comparison with the linear model.

    The linear model is used because it has no hyperparameters to
    confound the comparison. Full and ablated runs share identical fold
    splits per dataset; the drop is full minus ablated format-average r,
    averaged over datasets.
    """
    data_map = _as_dataset_map(datasets)
    if not data_map:
        raise ContractError("no datasets given")
    spec = ModelSpec("lr", "lr")
    oriented_map: dict[str, AlignedLexicon] = {}
    for ds_id, data in data_map.items():
        options = dict(directions_for(data))
        if direction not in options:
            raise ConfigurationError(
                f"dataset {ds_id!r} has no direction {direction!r}; "
                f"available: {sorted(options)}"
            )
        oriented_map[ds_id] = options[direction]
    source_vars = None
    for ds_id, oriented in oriented_map.items():
        if source_vars is None:
            source_vars = oriented.source_format.variables
        elif oriented.source_format.variables != source_vars:
            raise ConfigurationError(
                "datasets disagree on source variables: "
                f"{oriented.source_format.variables} vs {source_vars}"
            )
    per_dataset: dict[str, dict[str, float]] = {}
    full_scores: dict[str, float] = {}
    for ds_id, oriented in oriented_map.items():
        folds = make_folds(len(oriented), k_folds, derive_seed(seed, _content_key(oriented), "folds"))
        cv_full = cross_validate(
            spec, oriented, folds, base_seed=seed, dataset_id=ds_id, direction=direction
        )
        full_avg = float(cv_full.per_variable_mean().mean())
        full_scores[ds_id] = full_avg
        drops = {}
        for var in source_vars:
            keep = [v for v in source_vars if v != var]
            ablated = project(oriented, keep, side="source")
            cv_abl = cross_validate(
                spec,
                ablated,
                folds,
                base_seed=seed,
                dataset_id=ds_id,
                direction=f"{direction}/without-{var}",
            )
            drops[var] = full_avg - float(cv_abl.per_variable_mean().mean())
        per_dataset[ds_id] = drops
    averaged = {
        var: float(np.mean([per_dataset[ds][var] for ds in per_dataset]))
        for var in source_vars
    }
    return AblationReport(
        direction=direction,
        source_variables=source_vars,
        drops=averaged,
        per_dataset_drops=per_dataset,
        full_average_r=full_scores,
        seed=seed,
        k_folds=k_folds,
    )


def _without_dominance(data: AlignedLexicon) -> AlignedLexicon:
    for side in ("source", "target"):
        fmt = data.source_format if side == "source" else data.target_format
        if "dominance" in fmt.variables:
            keep = [v for v in fmt.variables if v != "dominance"]
            data = project(data, keep, side=side)
    return data


def run_crosslingual(datasets, spec: ModelSpec, seed: int) -> list[EvalReport]:
    """Train on all other-language data, evaluate on each dataset whole.

    Dominance is excluded throughout (several source languages lack it),
    and there is no cross-validation: one training run, one evaluation
    per dataset and direction. Training rows keep their language tags and
    are asserted to never match the evaluation language.
    """
    data_map = _as_dataset_map(datasets)
    languages = {d.language for d in data_map.values()}
    if len(languages) < 2:
        raise ConfigurationError(
            f"cross-lingual transfer needs at least 2 languages, got {sorted(languages)}"
        )
    reports = []
    for ds_id, data in data_map.items():
        others = {
            other_id: other
            for other_id, other in data_map.items()
            if other.language != data.language
        }
        if not others:
            raise ConfigurationError(
                f"no out-of-language training data for {ds_id!r} ({data.language!r})"
            )
        for direction, oriented in directions_for(data):
            eval_data = _without_dominance(oriented)
            train_parts = []
            for other_id, other in others.items():
                options = dict(directions_for(other))
                if direction not in options:
                    raise ConfigurationError(
                        f"dataset {other_id!r} has no direction {direction!r}"
                    )
                train_parts.append(_without_dominance(options[direction]))
            train = concat(train_parts)
            if any(lang == data.language for lang in train.row_languages):
                raise ContractError(
                    "training rows leaked from the evaluation language "
                    f"{data.language!r}"
                )
            cell_seed = derive_seed(seed, ds_id, direction, spec.name, 0)
            model = spec.build(cell_seed)
            model.fit_arrays(_inputs(spec, train), train.target_matrix)
            pred = model.predict(_inputs(spec, eval_data))
            n_vars = eval_data.target_format.size
            fold_r = np.full((1, n_vars), np.nan)
            degenerate = []
            for v in range(n_vars):
                try:
                    fold_r[0, v] = pearson(pred[:, v], eval_data.target_matrix[:, v])
                except DegenerateInputError:
                    degenerate.append((0, v))
            cv = CvResult(fold_r=fold_r, degenerate_cells=degenerate, pooled_r=fold_r[0].copy())
            report = _report_from_cv(spec, ds_id, direction, eval_data, cv, seed, 0)
            report.n_train = len(train)
            reports.append(report)
    return reports


def compare_to_shr(
    report: EvalReport, records: Sequence[ReliabilityRecord]
) -> EvalReport:
    """Flag each variable above/below the normalized human reliability.

    "above" requires strictly exceeding the normalized r; ties are
    "below". Variables without a record for this dataset are
    "unreported".
    """
    by_variable = {}
    for rec in records:
        if rec.dataset_id == report.dataset_id:
            if rec.normalized_r is None:
                raise ContractError(
                    f"record {rec.dataset_id}/{rec.variable} is not normalized"
                )
            by_variable[rec.variable] = rec.normalized_r
    flags = {}
    for var, r in zip(report.variables, report.per_variable_r):
        if var not in by_variable:
            flags[var] = "unreported"
        elif not np.isnan(r) and float(r) > by_variable[var]:
            flags[var] = "above"
        else:
            flags[var] = "below"
    return replace(report, shr_flags=flags)


def write_report_json(reports: Sequence[EvalReport], dest, *, meta: dict | None = None) -> None:
    """One structured document per run; byte-reproducible for fixed inputs."""
    doc = {
        "meta": meta or {},
        "reports": [r.to_dict() for r in reports],
    }
    payload = json.dumps(doc, sort_keys=True, indent=2, allow_nan=False).encode("utf-8")
    if hasattr(dest, "write"):
        dest.write(payload)
    else:
        Path(dest).write_bytes(payload)


def _table_cell(report: EvalReport) -> str:
    if np.isnan(report.format_average_r):
        cell = "n/a"
    else:
        cell = f"{report.format_average_r:.3f}"
    if report.significance and "stars" in report.significance:
        cell += format_stars(report.significance["stars"])
    elif report.significance and report.significance.get("result") == "n.s.":
        cell += " n.s."
    if report.best:
        cell = f"[{cell}]"
    return cell


def write_report_table(reports: Sequence[EvalReport], dest) -> None:
    """Human-readable TSV: one row per dataset x direction, one column
    per model, best cell bracketed, stars appended."""
    models = []
    for r in reports:
        if r.model not in models:
            models.append(r.model)
    rows: dict[tuple[str, str], dict[str, EvalReport]] = {}
    order: list[tuple[str, str]] = []
    n_items: dict[tuple[str, str], int] = {}
    for r in reports:
        key = (r.dataset_id, r.direction)
        if key not in rows:
            rows[key] = {}
            order.append(key)
            n_items[key] = r.n_items
        rows[key][r.model] = r
    lines = ["\t".join(["dataset", "direction", "items", *models])]
    for key in order:
        ds, direction = key
        cells = [
            _table_cell(rows[key][m]) if m in rows[key] else ""
            for m in models
        ]
        lines.append("\t".join([ds, direction, str(n_items[key]), *cells]))
    payload = ("\n".join(lines) + "\n").encode("utf-8")
    if hasattr(dest, "write"):
        dest.write(payload)
    else:
        Path(dest).write_bytes(payload)
