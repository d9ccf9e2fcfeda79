"""End-to-end run: load, analyze, scan, plan, generate, export."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import InputOutputError, OutputInvalid, ParseError, ScalerError
from .generate import ExportSummary, export_instance
from .intervals import IntervalPlan, build_plan, effective_fixed_domain, merge_clusters
from .mappings import detect_fixed_domain, extract_preclusters, precluster_diagnostics, read_mappings
from .schema import ColumnRef, read_schema
from .stats import scan_instance, venn_profile
from .validate import Violation, validate_output

log = logging.getLogger(__name__)

PLAN_FILE = "_plan.txt"


@dataclass
class RunConfig:
    schema_path: Path
    data_dir: Path
    out_dir: Path
    scale: Fraction
    mappings_path: Path | None = None
    seed: int | None = None
    parallelism: int = 1
    fixed_overrides: list[str] = field(default_factory=list)
    report_only: bool = False
    validate: bool = False

    def __post_init__(self):
        self.scale = Fraction(str(self.scale)) if not isinstance(self.scale, Fraction) else self.scale
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.parallelism < 1:
            raise ValueError("parallelism must be at least 1")


@dataclass
class RunResult:
    exit_code: int
    plan: IntervalPlan | None = None
    summary: ExportSummary | None = None
    violations: list[Violation] = field(default_factory=list)
    failed_phase: str | None = None
    error: Exception | None = None


class PhaseFailure(Exception):
    def __init__(self, phase, error):
        self.phase, self.error = phase, error
        super().__init__(f"[{phase}] {error}")


class _Phase:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        log.info("phase %s: start", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is None:
            log.info("phase %s: done", self.name)
            return False
        if isinstance(exc, ScalerError):
            raise PhaseFailure(self.name, exc) from exc
        return False


def plan_from_config(config: RunConfig) -> IntervalPlan:
    with _Phase("load"):
        try:
            schema = read_schema(config.schema_path)
        except OSError as exc:
            raise ParseError(f"cannot read schema: {exc}", source=str(config.schema_path)) from exc
        assertions = read_mappings(config.mappings_path, schema) if config.mappings_path else []

    with _Phase("analyze"):
        fixed = detect_fixed_domain(assertions, schema)
        for text in config.fixed_overrides:
            try:
                ref = ColumnRef.parse(text)
            except ValueError as exc:
                raise ParseError(str(exc)) from exc
            if not schema.has_column(ref):
                raise ParseError(f"--fixed names unknown column {ref}")
            fixed.add(ref)
        fixed = effective_fixed_domain(schema, fixed)
        preclusters = extract_preclusters(assertions, schema)
        clusters = merge_clusters(preclusters, schema)
        notes = precluster_diagnostics(assertions, preclusters, schema)
        for note in notes:
            log.info("diagnostic: %s", note)

    with _Phase("scan"):
        stats = scan_instance(schema, config.data_dir, fixed, config.parallelism)
        venns = {cc.columns: venn_profile(cc.columns, config.data_dir, schema) for cc in clusters}

    with _Phase("plan"):
        return build_plan(schema, stats, config.scale, fixed, clusters, venns, notes)


def run(config: RunConfig) -> RunResult:
    """Execute the pipeline; failures are reported through the result's exit code."""
    try:
        plan = plan_from_config(config)
        out = Path(config.out_dir)
        with _Phase("report"):
            try:
                out.mkdir(parents=True, exist_ok=True)
                (out / PLAN_FILE).write_text(plan.report(), encoding="utf-8")
            except OSError as exc:
                raise InputOutputError(f"cannot write plan report: {exc}") from exc
        if config.report_only:
            return RunResult(0, plan)
        with _Phase("export"):
            summary = export_instance(plan.schema, plan, out, config.parallelism, config.seed)
        result = RunResult(0, plan, summary)
        if config.validate:
            with _Phase("validate"):
                result.violations = validate_output(plan.schema, out, plan)
                if result.violations:
                    for v in result.violations:
                        log.error("violation: %s", v)
                    raise OutputInvalid(f"{len(result.violations)} violations in exported instance")
        return result
    except PhaseFailure as failure:
        log.error("%s", failure)
        return RunResult(failure.error.exit_code, failed_phase=failure.phase, error=failure.error)
