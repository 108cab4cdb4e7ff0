"""Run manifests, per-check results and the consolidated verification report."""
import csv
import hashlib
import json
import logging
import math
import platform
import sys
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from errors import ManifestError

logger = logging.getLogger(__name__)

LIBRARY_VERSION = "0.1.0"
SIGNIFICANT_DIGITS = 12

Number = Union[bool, int, float, str, None]


def format_number(x: Any) -> Any:
    """Floats to 12 significant digits, Fractions as "num/den", everything else as is."""
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, float):
        if not math.isfinite(x):
            return str(x)
        return float(f"{x:.{SIGNIFICANT_DIGITS}g}")
    return x


def normalise(value: Any) -> Any:
    """Apply format_number through nested dicts, lists and tuples."""
    if isinstance(value, dict):
        return {str(k): normalise(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [normalise(v) for v in value]
    if hasattr(value, "item") and callable(value.item):
        # numpy scalar
        return format_number(value.item())
    return format_number(value)


def canonical_json(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def stable_hash(value: Any) -> str:
    return hashlib.sha256(canonical_json(value).encode("utf-8")).hexdigest()


class CheckResult(BaseModel):
    """One verified claim: computed value against target, with its tolerance."""

    name: str
    claim: str = ""
    target: Number = None
    printed: Number = None
    value: Number = None
    tolerance: Optional[float] = None
    residual: Optional[float] = None
    passed: bool
    evidence: str = "exact"
    notes: List[str] = Field(default_factory=list)

    @field_validator("target", "printed", "value", "tolerance", "residual", mode="before")
    @classmethod
    def _format(cls, v: Any) -> Any:
        return normalise(v)

    @model_validator(mode="after")
    def _pass_matches_tolerance(self) -> "CheckResult":
        numeric = all(
            isinstance(x, (int, float)) and not isinstance(x, bool)
            for x in (self.value, self.target)
        )
        if numeric and self.tolerance is not None:
            within = abs(float(self.value) - float(self.target)) <= self.tolerance
            if within != self.passed:
                raise ValueError(
                    f"check {self.name}: passed={self.passed} but |value - target| "
                    f"{'<=' if within else '>'} tolerance"
                )
        return self


def check(
    name: str,
    value: Any,
    target: Any,
    tolerance: Optional[float] = None,
    claim: str = "",
    printed: Any = None,
    evidence: str = "exact",
    notes: Sequence[str] = (),
    passed: Optional[bool] = None,
) -> CheckResult:
    """Build a CheckResult, deciding pass/fail from value, target and tolerance.

    Without a tolerance the formatted value must equal the formatted target, unless
    ``passed`` is given: then the comparison is the caller's (e.g. a strict inequality).
    """
    v, t = normalise(value), normalise(target)
    residual = None
    if isinstance(value, (int, float, Fraction)) and isinstance(target, (int, float, Fraction)):
        residual = abs(float(value) - float(target))
    if tolerance is not None:
        passed = residual is not None and abs(float(v) - float(t)) <= tolerance
    elif passed is None:
        passed = v == t
    return CheckResult(
        name=name,
        claim=claim,
        target=t,
        printed=printed,
        value=v,
        tolerance=tolerance,
        residual=residual,
        passed=passed,
        evidence=evidence,
        notes=list(notes),
    )


class Timing(BaseModel):
    started_at: str
    finished_at: Optional[str] = None
    elapsed_seconds: Optional[float] = None


class RunManifest(BaseModel):
    """Everything one CLI invocation computed; ``timing`` is outside the determinism hash."""

    command: List[str]
    subcommand: str
    seed: int
    version: str = LIBRARY_VERSION
    options: Dict[str, Any] = Field(default_factory=dict)
    checks: List[CheckResult] = Field(default_factory=list)
    results: Dict[str, Any] = Field(default_factory=dict)
    environment: str = Field(
        default_factory=lambda: f"python {sys.version.split()[0]} on {platform.system()}"
    )
    timing: Optional[Timing] = None
    determinism_hash: str = ""

    @field_validator("results", mode="before")
    @classmethod
    def _format_results(cls, v: Any) -> Any:
        return normalise(v)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def compute_hash(self) -> str:
        body = self.model_dump(mode="json", exclude={"timing", "determinism_hash"})
        return stable_hash(body)

    def seal(self, started: datetime) -> "RunManifest":
        finished = datetime.now(timezone.utc)
        self.timing = Timing(
            started_at=started.isoformat(),
            finished_at=finished.isoformat(),
            elapsed_seconds=(finished - started).total_seconds(),
        )
        self.determinism_hash = self.compute_hash()
        return self

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2) + "\n", encoding="utf-8")
        logger.debug(f"Wrote manifest {path}")
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunManifest":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ManifestError(f"cannot read manifest {path}: {e}") from e
        try:
            return cls.model_validate_json(text)
        except ValidationError as e:
            raise ManifestError(f"{path} is not a run manifest: {e.error_count()} errors") from e


class ReportEntry(BaseModel):
    source: str
    name: str
    claim: str
    printed: Number = None
    target: Number = None
    computed: Number = None
    residual: Optional[float] = None
    passed: bool
    evidence: str
    notes: List[str] = Field(default_factory=list)


class Report(BaseModel):
    """Every check from a set of manifests, in the order the manifests were given."""

    manifests: List[str]
    entries: List[ReportEntry]
    discrepancies: List[ReportEntry] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def render_text(self) -> str:
        lines = [f"{'status':6}  {'check':44}  {'computed':>22}  {'target':>22}  evidence"]
        for e in self.entries:
            lines.append(
                f"{'PASS' if e.passed else 'FAIL':6}  {e.source + ':' + e.name:44}  "
                f"{str(e.computed):>22}  {str(e.target):>22}  {e.evidence}"
            )
        if self.discrepancies:
            lines.append("")
            lines.append("Printed values that differ from computed values:")
            for e in self.discrepancies:
                lines.append(f"  {e.source}:{e.name}: printed {e.printed}, computed {e.computed}")
                lines.extend(f"    {note}" for note in e.notes)
        passed = sum(e.passed for e in self.entries)
        lines.append("")
        lines.append(f"{passed}/{len(self.entries)} checks passed")
        return "\n".join(lines)


def consolidate(paths: Sequence[Union[str, Path]]) -> Report:
    if not paths:
        raise ManifestError("no manifests given")
    entries = []
    for path in paths:
        manifest = RunManifest.load(path)
        if manifest.determinism_hash and manifest.determinism_hash != manifest.compute_hash():
            logger.warning(f"{path}: determinism hash does not match its contents")
        for c in manifest.checks:
            entries.append(
                ReportEntry(
                    source=manifest.subcommand,
                    name=c.name,
                    claim=c.claim,
                    printed=c.printed,
                    target=c.target,
                    computed=c.value,
                    residual=c.residual,
                    passed=c.passed,
                    evidence=c.evidence,
                    notes=c.notes,
                )
            )
    discrepancies = [
        e for e in entries if e.printed is not None and e.printed != e.computed and e.notes
    ]
    return Report(manifests=[str(p) for p in paths], entries=entries, discrepancies=discrepancies)


def write_csv(
    path: Union[str, Path], columns: Sequence[str], rows: Iterable[Sequence[Any]]
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(["" if v is None else normalise(v) for v in row])
    logger.debug(f"Wrote table {path}")
    return path
