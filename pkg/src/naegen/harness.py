"""Campaign protocol: class prefiltering, initialization filtering, batched
optimization runs, and fooling-rate accounting.

A campaign walks the same pipeline a single run does, just many times with
derived seeds: filter classes the classifier cannot handle, collect latents
whose unperturbed generations are correctly classified, then optimize each
(class, latent) pair and reduce the records into a report.  The fooling rate
counts runs with any adversarial step; the strict and relaxed success rates
additionally need an oracle verdict and stay pending until one arrives.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import torch

from .errors import (
    CampaignAborted,
    InvalidConfig,
    LatentSearchExhausted,
    NoViableClasses,
    PendingReview,
)
from .interfaces import Backend, Oracle, class_index_for
from .optimizer import (
    OptimizationConfig,
    OptimizationTrace,
    is_success_relaxed,
    is_success_strict,
    run_optimization,
)
from .preprocess import preprocess_for_classifier
from .seeds import derive_seed, draw_latent
from .tokens import resolve_class_tokens
from .traces import canonical_json, save_trace, write_json
from .types import AttackSpec, LatentVector

REPORT_SCHEMA_VERSION = 1
CAMPAIGN_SCHEMA_VERSION = 1

DEFAULT_PROMPT_TEMPLATE = "a high-quality image of a {}"

#: Modes a campaign can drive.  ood_to_id needs a per-prompt target class and
#: has no initialization-purity notion, so it stays a single-run affair.
CAMPAIGN_MODES = ("untargeted", "targeted", "id_to_ood")

LATENT_SEARCH_CAP_FACTOR = 100


@dataclass(frozen=True)
class ClassAccuracy:
    """Prefilter outcome for one class."""

    class_name: str
    class_index: int
    accuracy: float
    kept: bool


@dataclass(frozen=True)
class PreparedLatents:
    """Seeded latents whose unperturbed generations classify correctly."""

    class_name: str
    class_index: int
    latents: tuple[LatentVector, ...]
    rejections: int

    @property
    def draws(self) -> int:
        return len(self.latents) + self.rejections


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one optimization run inside a campaign."""

    run_id: str
    class_name: str
    class_index: Optional[int]
    latent_seed: int
    variable_choice: str
    classifier_fooled: bool
    first_adversarial_step: Optional[int]
    strict_success: Optional[bool]
    relaxed_success: Optional[bool]
    failure: Optional[str]
    trace_ref: Optional[str] = None
    trace: Optional[OptimizationTrace] = field(default=None, compare=False)

    def to_row(self) -> dict:
        return {
            "run_id": self.run_id,
            "class_name": self.class_name,
            "class_index": self.class_index,
            "latent_seed": self.latent_seed,
            "variable_choice": self.variable_choice,
            "classifier_fooled": self.classifier_fooled,
            "first_adversarial_step": self.first_adversarial_step,
            "strict_success": self.strict_success,
            "relaxed_success": self.relaxed_success,
            "failure": self.failure,
            "trace_ref": self.trace_ref,
        }


@dataclass(frozen=True)
class CampaignReport:
    """Aggregated campaign accounting.

    ``fooling_rate`` is successes (any adversarial step) over total runs.
    ``strict_rate`` and ``relaxed_rate`` are computed over runs whose oracle
    status is resolved; ``pending_reviews`` counts the rest.
    """

    backend: str
    variable_choice: str
    total_runs: int
    fooled_runs: int
    fooling_rate: float
    mean_first_adversarial_step: Optional[float]
    failed_runs: int
    pending_reviews: int
    strict_successes: int
    relaxed_successes: int
    strict_rate: Optional[float]
    relaxed_rate: Optional[float]
    per_class: dict[str, dict]

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "backend": self.backend,
            "variable_choice": self.variable_choice,
            "total_runs": self.total_runs,
            "fooled_runs": self.fooled_runs,
            "fooling_rate": self.fooling_rate,
            "mean_first_adversarial_step": self.mean_first_adversarial_step,
            "failed_runs": self.failed_runs,
            "pending_reviews": self.pending_reviews,
            "strict_successes": self.strict_successes,
            "relaxed_successes": self.relaxed_successes,
            "strict_rate": self.strict_rate,
            "relaxed_rate": self.relaxed_rate,
            "per_class": self.per_class,
        }

    def to_json_bytes(self) -> bytes:
        return (canonical_json(self.to_dict()) + "\n").encode("utf-8")


def _predicted_class(backend: Backend, text, z: LatentVector, *,
                     guidance_scale: float, sampling_steps: int) -> int:
    image = backend.generator.generate(z, text, guidance_scale=guidance_scale,
                                       sampling_steps=sampling_steps)
    logits = backend.classifier.logits(
        preprocess_for_classifier(image, backend.classifier))
    return int(torch.argmax(logits))


def prefilter_classes(backend: Backend, classes: list[str],
                      samples_per_class: int, accuracy_threshold: float,
                      seed: int, *,
                      prompt_template: str = DEFAULT_PROMPT_TEMPLATE,
                      guidance_scale: float = 7.5,
                      sampling_steps: int = 5) -> list[ClassAccuracy]:
    """Measure per-class accuracy on seeded generations and drop weak classes.

    Keeps a class when its accuracy is >= accuracy_threshold.  Raises
    NoViableClasses when nothing survives.
    """
    if not 0.0 <= accuracy_threshold <= 1.0:
        raise InvalidConfig(
            f"accuracy_threshold must be within [0, 1], got {accuracy_threshold}")
    if samples_per_class < 1:
        raise InvalidConfig("samples_per_class must be at least 1")
    results = []
    with torch.no_grad():
        for name in classes:
            index = class_index_for(backend.classifier, name)
            if index is None:
                raise InvalidConfig(f"class {name!r} is not in the classifier's label set")
            text = backend.encoder.encode(
                resolve_class_tokens(prompt_template.format(name), name, backend.encoder))
            hits = 0
            for i in range(samples_per_class):
                z = draw_latent(backend.generator.latent_dim,
                                derive_seed(seed, "prefilter", name, i))
                hits += _predicted_class(backend, text, z,
                                         guidance_scale=guidance_scale,
                                         sampling_steps=sampling_steps) == index
            accuracy = hits / samples_per_class
            results.append(ClassAccuracy(class_name=name, class_index=index,
                                         accuracy=accuracy,
                                         kept=accuracy >= accuracy_threshold))
    if not any(r.kept for r in results):
        raise NoViableClasses(
            f"no class reached accuracy {accuracy_threshold} "
            f"(best {max(r.accuracy for r in results):.3f})")
    return results


def prepare_latents(backend: Backend, class_name: str, count: int, seed: int, *,
                    prompt_template: str = DEFAULT_PROMPT_TEMPLATE,
                    guidance_scale: float = 7.5,
                    sampling_steps: int = 5) -> PreparedLatents:
    """Draw seeded latents until `count` initial generations classify correctly.

    Rejected draws are counted, not reused.  Gives up after 100 * count draws
    so a hopeless class cannot spin forever.
    """
    if count < 1:
        raise InvalidConfig("count must be at least 1")
    index = class_index_for(backend.classifier, class_name)
    if index is None:
        raise InvalidConfig(f"class {class_name!r} is not in the classifier's label set")
    text = backend.encoder.encode(
        resolve_class_tokens(prompt_template.format(class_name), class_name,
                             backend.encoder))
    cap = LATENT_SEARCH_CAP_FACTOR * count
    accepted: list[LatentVector] = []
    rejections = 0
    with torch.no_grad():
        for attempt in range(cap):
            z = draw_latent(backend.generator.latent_dim,
                            derive_seed(seed, "init", class_name, attempt))
            if _predicted_class(backend, text, z, guidance_scale=guidance_scale,
                                sampling_steps=sampling_steps) == index:
                accepted.append(z)
                if len(accepted) == count:
                    break
            else:
                rejections += 1
    if len(accepted) < count:
        raise LatentSearchExhausted(
            f"class {class_name!r}: {len(accepted)} of {count} latents accepted "
            f"after {cap} draws")
    return PreparedLatents(class_name=class_name, class_index=index,
                           latents=tuple(accepted), rejections=rejections)


def _attack_for_class(mode: str, class_name: str, class_index: int,
                      num_classes: int, prompt_template: str,
                      regularizer_metric: str, reg_weight: float) -> AttackSpec:
    prompt = prompt_template.format(class_name)
    if mode == "untargeted":
        label = class_index
    elif mode == "targeted":
        # Rotate to the next class index; any fixed scheme works, this one
        # guarantees label != ground truth for every class.
        label = (class_index + 1) % num_classes
    elif mode == "id_to_ood":
        label = None
    else:
        raise InvalidConfig(
            f"campaign mode must be one of {CAMPAIGN_MODES}, got {mode!r}")
    return AttackSpec(mode=mode, label=label, prompt=prompt,
                      class_keyword=class_name,
                      regularizer_metric=regularizer_metric,
                      reg_weight=reg_weight)


def _judge_record(trace: OptimizationTrace, oracle: Optional[Oracle],
                  run_id: str) -> tuple[Optional[bool], Optional[bool]]:
    label = None
    candidate = trace.first_adversarial_record()
    if oracle is not None and candidate is not None:
        label = oracle.label(f"{run_id}:{candidate.step}",
                             expected_class=trace.expected_class,
                             predicted_class=candidate.predicted_class,
                             image=candidate.image)
    try:
        return is_success_strict(trace, label), is_success_relaxed(trace, label)
    except PendingReview:
        return None, None


def run_campaign(backend: Backend, prepared: list[PreparedLatents],
                 config: OptimizationConfig, *,
                 mode: str = "untargeted",
                 prompt_template: str = DEFAULT_PROMPT_TEMPLATE,
                 regularizer_metric: str = "euclidean",
                 reg_weight: float = 0.0,
                 oracle: Optional[Oracle] = None,
                 workers: int = 1,
                 out_dir: Optional[Path] = None) -> tuple[list[RunRecord], CampaignReport]:
    """Optimize every prepared (class, latent) pair and reduce to a report.

    Individual run failures (recorded in the trace) do not stop the campaign;
    if more than half of all runs fail, raises CampaignAborted.  With out_dir
    set, writes campaign.json, per-run trace directories, report.json and
    report.csv.
    """
    if not prepared:
        raise InvalidConfig("no prepared latents given")
    if workers < 1:
        raise InvalidConfig("workers must be at least 1")
    num_classes = backend.classifier.num_classes
    jobs = []
    for batch in prepared:
        attack = _attack_for_class(mode, batch.class_name, batch.class_index,
                                   num_classes, prompt_template,
                                   regularizer_metric, reg_weight)
        for j, z in enumerate(batch.latents):
            run_id = f"{batch.class_name}_{j:03d}"
            run_config = replace(config, seed=z.seed)
            jobs.append((run_id, batch, attack, run_config, z))

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_json(out_dir / "campaign.json", {
            "schema_version": CAMPAIGN_SCHEMA_VERSION,
            "backend": backend.name,
            "mode": mode,
            "prompt_template": prompt_template,
            "regularizer_metric": regularizer_metric,
            "reg_weight": reg_weight,
            "config": {
                "learning_rate": config.learning_rate,
                "steps": config.steps,
                "variable_choice": config.variable_choice,
                "guidance_scale": config.guidance_scale,
                "sampling_steps": config.sampling_steps,
                "seed": config.seed,
            },
            "classes": {
                batch.class_name: {
                    "class_index": batch.class_index,
                    "latent_seeds": [z.seed for z in batch.latents],
                    "rejections": batch.rejections,
                }
                for batch in prepared
            },
        })

    def execute(job):
        run_id, batch, attack, run_config, z = job
        trace = run_optimization(attack, run_config, backend.generator,
                                 backend.encoder, backend.classifier, z)
        return run_id, batch, trace

    if workers == 1:
        outcomes = [execute(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(execute, jobs))

    records = []
    for run_id, batch, trace in sorted(outcomes, key=lambda o: o[0]):
        trace_ref = None
        if out_dir is not None:
            trace_ref = f"runs/{run_id}"
            save_trace(trace, out_dir / "runs" / run_id)
        strict, relaxed = _judge_record(trace, oracle, run_id)
        records.append(RunRecord(
            run_id=run_id,
            class_name=batch.class_name,
            class_index=batch.class_index,
            latent_seed=trace.latent.seed,
            variable_choice=config.variable_choice,
            classifier_fooled=trace.classifier_fooled,
            first_adversarial_step=trace.first_adversarial_step,
            strict_success=strict,
            relaxed_success=relaxed,
            failure=trace.failure,
            trace_ref=trace_ref,
            trace=trace,
        ))

    failed = sum(r.failure is not None for r in records)
    if failed * 2 > len(records):
        raise CampaignAborted(
            f"{failed} of {len(records)} runs failed; aborting")

    report = build_report(records, backend_name=backend.name,
                          variable_choice=config.variable_choice)
    if out_dir is not None:
        (out_dir / "report.json").write_bytes(report.to_json_bytes())
        (out_dir / "report.csv").write_bytes(report_csv_bytes(records))
    return records, report


def latent_baseline(backend: Backend, prepared: list[PreparedLatents],
                    config: OptimizationConfig,
                    **kwargs) -> tuple[list[RunRecord], CampaignReport]:
    """The same campaign protocol with the latent as the optimization variable."""
    return run_campaign(backend, prepared,
                        replace(config, variable_choice="latent"), **kwargs)


def build_report(records: list[RunRecord], *, backend_name: str,
                 variable_choice: str) -> CampaignReport:
    """Single-threaded reduction of run records into a report.

    Pure function of its inputs: identical records give identical report
    bytes.
    """
    per_class: dict[str, dict] = {}
    for r in records:
        bucket = per_class.setdefault(r.class_name, {
            "runs": 0, "fooled": 0, "failed": 0, "pending": 0,
            "strict_successes": 0, "relaxed_successes": 0,
        })
        bucket["runs"] += 1
        bucket["fooled"] += r.classifier_fooled
        bucket["failed"] += r.failure is not None
        bucket["pending"] += r.relaxed_success is None
        bucket["strict_successes"] += r.strict_success is True
        bucket["relaxed_successes"] += r.relaxed_success is True

    total = len(records)
    fooled = sum(r.classifier_fooled for r in records)
    first_steps = [r.first_adversarial_step for r in records
                   if r.first_adversarial_step is not None]
    strict_resolved = [r.strict_success for r in records
                       if r.strict_success is not None]
    relaxed_resolved = [r.relaxed_success for r in records
                        if r.relaxed_success is not None]
    return CampaignReport(
        backend=backend_name,
        variable_choice=variable_choice,
        total_runs=total,
        fooled_runs=fooled,
        fooling_rate=fooled / total if total else 0.0,
        mean_first_adversarial_step=(
            sum(first_steps) / len(first_steps) if first_steps else None),
        failed_runs=sum(r.failure is not None for r in records),
        pending_reviews=sum(r.relaxed_success is None for r in records),
        strict_successes=sum(s is True for s in strict_resolved),
        relaxed_successes=sum(s is True for s in relaxed_resolved),
        strict_rate=(sum(strict_resolved) / len(strict_resolved)
                     if strict_resolved else None),
        relaxed_rate=(sum(relaxed_resolved) / len(relaxed_resolved)
                      if relaxed_resolved else None),
        per_class=dict(sorted(per_class.items())),
    )


CSV_COLUMNS = ("run_id", "class_name", "class_index", "latent_seed",
               "variable_choice", "classifier_fooled", "first_adversarial_step",
               "strict_success", "relaxed_success", "failure", "trace_ref")


def report_csv_bytes(records: list[RunRecord]) -> bytes:
    """One CSV row per run, stable column order, LF line endings."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in sorted(records, key=lambda x: x.run_id):
        row = r.to_row()
        writer.writerow({k: "" if row[k] is None else row[k] for k in CSV_COLUMNS})
    return buf.getvalue().encode("utf-8")
