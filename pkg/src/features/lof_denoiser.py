"""
Per-class LOF filtering of candidate patches.

Each class's candidate features form one cloud. Clouds larger than the cap
are subsampled (seeded) first; candidates whose LOF score exceeds theta are
dropped as noise. Classes are scored independently, in parallel when
threads allow, and results are collected in class order.
"""

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from src.features.candidates import CandidateSet
from src.features.lof import lof_scores
from src.utils.constants import DENOISE_REPORT_MAGIC
from src.utils.helpers import make_rng
from src.utils.logger import get_logger
from src.utils.validators import DataError, DataFormatError, ValidationError, validate_count

logger = get_logger("lof")


@dataclass
class LofParams:
    """Neighbour count, keep threshold, per-class cap and the cap's seed."""
    k: int = 20
    theta: float = 1.5
    cap_per_class: int = 2000
    seed: int = 0

    def validate(self) -> "LofParams":
        validate_count(self.k, "lof.k", minimum=1)
        if self.theta < 1.0:
            raise ValidationError(f"lof.theta must be at least 1, got {self.theta}")
        if self.cap_per_class < self.k + 1:
            raise ValidationError(f"lof.cap_per_class must be at least k + 1 = {self.k + 1}, got {self.cap_per_class}")
        return self


@dataclass
class DenoiseRow:
    """Outcome for one class. kept + dropped == capped_count."""
    class_ordinal: int
    input_count: int
    capped_count: int
    kept: int
    dropped: int
    theta: float
    k: int
    passthrough: bool = False
    score_median: float = float("nan")
    score_p90: float = float("nan")
    score_max: float = float("nan")

    @property
    def capped(self) -> bool:
        return self.capped_count < self.input_count


@dataclass
class DenoiseReport:
    rows: List[DenoiseRow] = field(default_factory=list)

    @property
    def kept_counts(self) -> List[int]:
        """Normal patches per class (S_i)."""
        return [r.kept for r in self.rows]

    def to_frame(self) -> pd.DataFrame:
        columns = ["class", "input_count", "capped_count", "kept", "dropped", "theta", "k",
                   "passthrough", "score_median", "score_p90", "score_max"]
        records = []
        for row in self.rows:
            record = asdict(row)
            record["class"] = record.pop("class_ordinal")
            record["passthrough"] = int(record["passthrough"])
            records.append(record)
        return pd.DataFrame(records, columns=columns)


def filter_class(
    candidates: CandidateSet, params: LofParams, class_ordinal: int = 0
) -> Tuple[CandidateSet, DenoiseRow]:
    """
    LOF-filter one class's candidates.

    Args:
        candidates: Candidates of a single class
        params: k, theta, cap, seed
        class_ordinal: Class the candidates belong to (seeds the cap draw)

    Returns:
        (kept candidates in input order, report row)
    """
    params.validate()
    input_count = len(candidates)
    if input_count > params.cap_per_class:
        rng = make_rng(params.seed, "lof-cap", class_ordinal)
        picked = np.sort(rng.choice(input_count, size=params.cap_per_class, replace=False))
        candidates = candidates.subset(picked)
        logger.info(f"Class {class_ordinal}: capped {input_count} candidates to {params.cap_per_class}")

    n = len(candidates)
    if n <= params.k:
        logger.warning(f"Class {class_ordinal}: {n} candidates <= k={params.k}, passing through unfiltered")
        return candidates, DenoiseRow(class_ordinal, input_count, n, n, 0, params.theta, params.k, passthrough=True)

    scores = lof_scores(candidates.features, params.k)
    keep = np.flatnonzero(scores <= params.theta)
    finite = scores[np.isfinite(scores)]
    summary = (
        (float(np.median(finite)), float(np.percentile(finite, 90)), float(finite.max()))
        if finite.size else (float("nan"),) * 3
    )
    row = DenoiseRow(
        class_ordinal=class_ordinal,
        input_count=input_count,
        capped_count=n,
        kept=int(keep.size),
        dropped=int(n - keep.size),
        theta=params.theta,
        k=params.k,
        score_median=summary[0],
        score_p90=summary[1],
        score_max=summary[2],
    )
    logger.debug(f"Class {class_ordinal}: kept {row.kept}/{n} (median LOF {row.score_median:.3f})")
    return candidates.subset(keep), row


def denoise(
    candidates: CandidateSet,
    params: LofParams,
    n_classes: int,
    threads: Optional[int] = None,
) -> Tuple[CandidateSet, DenoiseReport]:
    """
    Filter every class and reassemble the kept candidates in class order.

    Args:
        threads: Worker cap; None or 1 scores classes sequentially
    """
    params.validate()
    per_class = [candidates.of_class(c) for c in range(n_classes)]
    n_jobs = 1 if not threads else max(1, min(threads, n_classes))
    results = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(filter_class)(per_class[c], params, c) for c in range(n_classes)
    )
    kept = CandidateSet.concat([r[0] for r in results])
    report = DenoiseReport([r[1] for r in results])
    logger.info(f"LOF kept {len(kept)}/{len(candidates)} candidates; per class {report.kept_counts}")
    return kept, report


def write_denoise_report(report: DenoiseReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = report.to_frame().to_csv(index=False, lineterminator="\n", float_format="%.17g")
    path.write_text(f"{DENOISE_REPORT_MAGIC}\n{body}", encoding="utf-8")
    return path


def read_denoise_report(path: Union[str, Path]) -> DenoiseReport:
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        first = f.readline().strip()
    if first != DENOISE_REPORT_MAGIC:
        raise DataFormatError(f"expected '{DENOISE_REPORT_MAGIC}', got {first!r}", line=1, path=path)
    try:
        frame = pd.read_csv(path, skiprows=1, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataFormatError(f"cannot parse report: {e}", path=path) from e
    rows = []
    for rec in frame.to_dict(orient="records"):
        try:
            rows.append(DenoiseRow(
                class_ordinal=int(rec["class"]),
                input_count=int(rec["input_count"]),
                capped_count=int(rec["capped_count"]),
                kept=int(rec["kept"]),
                dropped=int(rec["dropped"]),
                theta=float(rec["theta"]),
                k=int(rec["k"]),
                passthrough=bool(rec["passthrough"]),
                score_median=float(rec["score_median"]),
                score_p90=float(rec["score_p90"]),
                score_max=float(rec["score_max"]),
            ))
        except KeyError as e:
            raise DataError(f"{path}: report lacks column {e}") from e
    return DenoiseReport(rows)
