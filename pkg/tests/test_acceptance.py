"""Acceptance suite: one test per headline guarantee of the toolkit.

Each test prints exactly one ``<criterion>: PASS/FAIL`` line (visible under
``pytest -s``) and restates its tolerance and runtime budget inline, so this
file doubles as the contract.  Everything runs on CPU against the committed
toy weights, the float64 linear verification backend, or scripted accounting
doubles; nothing here needs the browser frontend.

Reproducibility anchors: the committed toy weights are built at seed 0 and
the campaign latents are prepared at seed 0 (both fixed below).
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import replace
from datetime import datetime, timezone

import torch

import pytest

from naegen.cli import main
from naegen.harness import (
    PreparedLatents,
    latent_baseline,
    prefilter_classes,
    prepare_latents,
    run_campaign,
)
from naegen.interfaces import Oracle, class_index_for, create_backend
from naegen.optimizer import OptimizationConfig, rademacher_sweep, run_optimization
from naegen.preprocess import preprocess_for_classifier
from naegen.scripted import (
    AccuracyScriptedClassifier,
    PairScriptedClassifier,
    scripted_backend,
    scripted_latents,
)
from naegen.seeds import draw_latent
from naegen.tokens import resolve_class_tokens
from naegen.toy.data import CLASS_NAMES
from naegen.types import AttackSpec, OracleLabel

from tests.analytic_utils import analytic_setup, class_row_objective

TOY_TEMPLATE = "a high-quality image of a {}"
LATENT_PREP_SEED = 0


def verdict(criterion: str, ok: bool, detail: str = "") -> None:
    suffix = f"  [{detail}]" if detail else ""
    print(f"\n{criterion}: {'PASS' if ok else 'FAIL'}{suffix}")
    assert ok, f"{criterion} failed {suffix}"


@pytest.fixture(scope="module")
def toy_backend():
    return create_backend("toy")


@pytest.fixture(scope="module")
def toy_prepared(toy_backend):
    """10 accepted latents per toy class, drawn at the documented seed."""
    return [
        prepare_latents(toy_backend, name, 10, LATENT_PREP_SEED,
                        prompt_template=TOY_TEMPLATE,
                        guidance_scale=7.5, sampling_steps=5)
        for name in CLASS_NAMES
    ]


# ------------------------------------------------------------ gradients


def test_backprop_matches_finite_differences():
    """Backprop through encode/generate/classify against central differences.

    h = 1e-4, relative error < 1e-4 at 10 seeded points, budget 10 s.
    """
    from naegen.gradcheck import finite_difference_gradient

    started = time.monotonic()
    backend, tokens, z = analytic_setup()
    objective, initial = class_row_objective(backend, tokens, z, label=1,
                                             reg_weight=0.1)
    gen = torch.Generator().manual_seed(5)
    points = [torch.zeros_like(initial)] + [
        torch.randn(initial.shape, generator=gen, dtype=torch.float64) * 0.3
        for _ in range(9)
    ]
    worst = 0.0
    for point in points:
        leaf = point.clone().requires_grad_(True)
        objective(leaf).backward()
        fd = finite_difference_gradient(lambda d: float(objective(d)), point, 1e-4)
        rel = float(torch.linalg.vector_norm(fd - leaf.grad)
                    / torch.linalg.vector_norm(leaf.grad).clamp_min(1e-12))
        worst = max(worst, rel)
    elapsed = time.monotonic() - started
    verdict("gradient-fidelity", worst < 1e-4 and elapsed < 10.0,
            f"worst rel err {worst:.2e}, {elapsed:.1f}s of 10s")


def test_optimizer_reaches_grid_oracle_minimum():
    """Final objective <= exhaustive 2-D grid minimum + 1e-3.

    Grid: max-norm <= 0.5 at resolution 0.01 over the single class-token
    row (101 x 101 points).  Budget 60 s.
    """
    started = time.monotonic()
    backend, tokens, z = analytic_setup()
    objective, initial = class_row_objective(backend, tokens, z, label=1)
    assert initial.shape == (1, 2)

    coords = torch.arange(-0.5, 0.5001, 0.01, dtype=torch.float64)
    assert coords.shape[0] == 101
    best = float("inf")
    with torch.no_grad():
        for da in coords:
            for db in coords:
                value = float(objective(torch.tensor([[da, db]],
                                                     dtype=torch.float64)))
                best = min(best, value)

    attack = AttackSpec(mode="targeted", prompt="a photo alpha",
                        class_keyword="alpha", label=1)
    config = OptimizationConfig(learning_rate=0.05, steps=150,
                                guidance_scale=1.0, sampling_steps=1)
    trace = run_optimization(attack, config, backend.generator,
                             backend.encoder, backend.classifier, z)
    final = trace.steps[-1].loss.total
    elapsed = time.monotonic() - started
    verdict("grid-oracle", final <= best + 1e-3 and elapsed < 60.0,
            f"final {final:.6f} vs grid best {best:.6f}, {elapsed:.1f}s of 60s")


# ----------------------------------------------------------- accounting


def scripted_campaign(fooled, *, classes=10, per_class=20, variable="class_token",
                      baseline=False):
    names = tuple(f"class{i}" for i in range(classes))
    backend = scripted_backend(names, PairScriptedClassifier(names, fooled))
    prepared = [
        PreparedLatents(class_name=name, class_index=i,
                        latents=scripted_latents(per_class), rejections=0)
        for i, name in enumerate(names)
    ]
    config = OptimizationConfig(learning_rate=0.001, steps=1,
                                variable_choice=variable,
                                guidance_scale=7.5, sampling_steps=1, seed=0)
    runner = latent_baseline if baseline else run_campaign
    return runner(backend, prepared, config, prompt_template="{}")


def test_fooling_rate_accounting_87_of_200():
    """Exactly 87 fooled of 200 runs must report fooling_rate == 0.435."""
    fooled = {(c, j) for c in range(4) for j in range(20)}
    fooled |= {(4, j) for j in range(7)}
    assert len(fooled) == 87
    _, report = scripted_campaign(fooled)
    ok = (report.total_runs == 200 and report.fooled_runs == 87
          and report.fooling_rate == 0.435)
    verdict("accounting-87-of-200", ok,
            f"{report.fooled_runs}/{report.total_runs} -> {report.fooling_rate}")


def test_latent_baseline_accounting_28_of_200():
    """Exactly 28 fooled of 200 latent-variable runs -> 0.140 exactly."""
    fooled = {(c, j) for c in range(2) for j in range(14)}
    assert len(fooled) == 28
    _, report = scripted_campaign(fooled, baseline=True)
    ok = (report.total_runs == 200 and report.fooled_runs == 28
          and report.fooling_rate == 0.140
          and report.variable_choice == "latent")
    verdict("accounting-28-of-200", ok,
            f"{report.fooled_runs}/{report.total_runs} -> {report.fooling_rate}")


def test_prefilter_keeps_exactly_the_accurate_25():
    """100 scripted classes, exactly 25 at accuracy >= 0.9, all 25 kept."""
    names = tuple(f"class{i:03d}" for i in range(100))
    accuracy = {}
    for i, name in enumerate(names):
        accuracy[name] = 0.90 + (i % 10) * 0.01 if i < 25 else 0.50 + (i % 40) * 0.01
    backend = scripted_backend(names, AccuracyScriptedClassifier(names, accuracy))
    results = prefilter_classes(backend, list(names), 100, 0.9, 0,
                                prompt_template="{}")
    kept_names = [c.class_name for c in results if c.kept]
    ok = kept_names == list(names[:25])
    verdict("prefilter-25-of-100", ok, f"kept {len(kept_names)} of 100")


# ------------------------------------------------------------- toy runs


def test_prepared_initializations_never_fool_the_classifier(toy_backend,
                                                            toy_prepared):
    """Every accepted latent's unperturbed render classifies correctly.

    Regenerates each image from scratch, so fooling at step 0 is measured
    independently of the bookkeeping in prepare_latents.  Budget 2 min.
    """
    started = time.monotonic()
    misclassified = 0
    total = 0
    with torch.no_grad():
        for batch in toy_prepared:
            tokens = resolve_class_tokens(TOY_TEMPLATE.format(batch.class_name),
                                          batch.class_name, toy_backend.encoder)
            text = toy_backend.encoder.encode(tokens)
            for z in batch.latents:
                image = toy_backend.generator.generate(
                    z, text, guidance_scale=7.5, sampling_steps=5)
                logits = toy_backend.classifier.logits(
                    preprocess_for_classifier(image, toy_backend.classifier))
                total += 1
                misclassified += int(int(torch.argmax(logits)) != batch.class_index)
    elapsed = time.monotonic() - started
    verdict("init-purity",
            misclassified == 0 and total == 40 and elapsed < 120.0,
            f"{misclassified} of {total} misclassified, {elapsed:.1f}s of 120s")


def test_embedding_variable_beats_text_and_latent_variables(toy_backend,
                                                            toy_prepared):
    """Fooling-rate ordering across optimization variables on the toy fixture.

    4 classes x 10 seeded latents x 20 steps, lr 0.01: the class-token rate
    must be >= both the text-embedding rate and the latent rate.  Weights
    seed 0, latent seed 0.  Budget 15 min on CPU.
    """
    started = time.monotonic()
    config = OptimizationConfig(learning_rate=0.01, steps=20,
                                variable_choice="class_token",
                                guidance_scale=7.5, sampling_steps=5)
    rates = {}
    for variable in ("class_token", "text_embedding"):
        _, report = run_campaign(toy_backend, toy_prepared,
                                 replace(config, variable_choice=variable),
                                 mode="untargeted", prompt_template=TOY_TEMPLATE)
        assert report.total_runs == 40
        rates[variable] = report.fooling_rate
    _, report = latent_baseline(toy_backend, toy_prepared, config,
                                mode="untargeted", prompt_template=TOY_TEMPLATE)
    rates["latent"] = report.fooling_rate
    elapsed = time.monotonic() - started
    ok = (rates["class_token"] >= rates["text_embedding"]
          and rates["class_token"] >= rates["latent"]
          and elapsed < 900.0)
    verdict("variable-ablation", ok,
            "rates " + ", ".join(f"{k} {v:.3f}" for k, v in rates.items())
            + f", {elapsed:.0f}s of 900s")


def test_heavier_regularizer_never_grows_final_norm(toy_backend):
    """Final perturbation norm is non-increasing over weights 0, 0.1, 1, 10.

    Fixed toy configuration: class cross, latent seed 3, lr 0.01, 20 steps,
    class-token variable, euclidean distance.
    """
    idx = class_index_for(toy_backend.classifier, "cross")
    z = draw_latent(toy_backend.generator.latent_dim, 3)
    norms = []
    for weight in (0.0, 0.1, 1.0, 10.0):
        attack = AttackSpec(mode="untargeted", prompt=TOY_TEMPLATE.format("cross"),
                            class_keyword="cross", label=idx,
                            regularizer_metric="euclidean", reg_weight=weight)
        config = OptimizationConfig(learning_rate=0.01, steps=20,
                                    variable_choice="class_token",
                                    guidance_scale=7.5, sampling_steps=5, seed=3)
        trace = run_optimization(attack, config, toy_backend.generator,
                                 toy_backend.encoder, toy_backend.classifier, z)
        assert trace.failure is None
        norms.append(trace.steps[-1].perturbation_norm)
    ok = all(b <= a + 1e-9 for a, b in zip(norms, norms[1:]))
    verdict("reg-weight-monotonicity", ok,
            "norms " + ", ".join(f"{n:.4f}" for n in norms))


# ---------------------------------------------------------- determinism


def test_generate_command_is_byte_deterministic(tmp_path, capsys):
    """Two cmd_generate runs with one config+seed match byte for byte."""
    cfg = tmp_path / "gen.toml"
    cfg.write_text('backend = "toy"\nsteps = 5\nseed = 3\n')
    dirs = [tmp_path / "first", tmp_path / "second"]
    for out in dirs:
        assert main(["generate", "--config", str(cfg), "--class", "cross",
                     "--out", str(out)]) == 0
    capsys.readouterr()
    names = sorted(p.name for p in dirs[0].iterdir())
    same_files = names == sorted(p.name for p in dirs[1].iterdir()) and all(
        (dirs[0] / n).read_bytes() == (dirs[1] / n).read_bytes() for n in names)
    digests = [
        [s["image_digest"] for s in
         json.loads((d / "manifest.json").read_text())["steps"]]
        for d in dirs
    ]
    verdict("generate-determinism", same_files and digests[0] == digests[1],
            f"{len(names)} files compared")


def test_magnitude_zero_sweep_is_bitwise_baseline(toy_backend):
    """Sweep magnitude 0 equals the untouched generation bitwise, and the
    whole sweep is deterministic per seed."""
    tokens = resolve_class_tokens(TOY_TEMPLATE.format("circle"), "circle",
                                  toy_backend.encoder)
    magnitudes = [0.0, 0.5, 1.0]
    first = rademacher_sweep(tokens, magnitudes, 7, toy_backend.generator,
                             toy_backend.encoder)
    z = draw_latent(toy_backend.generator.latent_dim, 7,
                    dtype=tokens.embeddings.dtype)
    baseline = toy_backend.generator.generate(z, toy_backend.encoder.encode(tokens),
                                              guidance_scale=7.5, sampling_steps=5)
    zero_matches = torch.equal(first[0].pixels, baseline.pixels)

    again = rademacher_sweep(tokens, magnitudes, 7, toy_backend.generator,
                             toy_backend.encoder)
    repeatable = all(torch.equal(a.pixels, b.pixels)
                     for a, b in zip(first, again))
    other_seed = rademacher_sweep(tokens, magnitudes, 8, toy_backend.generator,
                                  toy_backend.encoder)
    seed_sensitive = not torch.equal(first[0].pixels, other_seed[0].pixels)
    verdict("sweep-zero-magnitude",
            zero_matches and repeatable and seed_sensitive,
            f"zero bitwise {zero_matches}, repeatable {repeatable}")


# ------------------------------------------------------------ semantics


class RandomVerdictOracle(Oracle):
    """Deterministic pseudo-random verdict per (seed, candidate)."""

    def __init__(self, seed: int):
        self.seed = seed

    def label(self, candidate_id, *, expected_class, predicted_class, image):
        del image
        rng = random.Random(f"{self.seed}:{candidate_id}")
        assigned = rng.choice([None, 0, 1, 2, expected_class, predicted_class])
        return OracleLabel(candidate_id=candidate_id, reviewer="random",
                           ground_truth_preserved=rng.random() < 0.5,
                           natural=rng.random() < 0.7,
                           assigned_label=assigned,
                           timestamp=datetime(2024, 1, 1, tzinfo=timezone.utc))


def test_strict_success_implies_relaxed_over_random_labels():
    """strict_success -> relaxed_success on every labeled run.

    30 scripted campaigns, each judged by a differently seeded random
    oracle, so the implication is exercised across randomized label sets.
    """
    names = ("alpha", "beta", "gamma")
    fooled = {(0, 0), (0, 2), (1, 1), (2, 0), (2, 4)}
    violations = 0
    strict_seen = 0
    for oracle_seed in range(30):
        backend = scripted_backend(names, PairScriptedClassifier(names, fooled))
        prepared = [
            PreparedLatents(class_name=name, class_index=i,
                            latents=scripted_latents(5), rejections=0)
            for i, name in enumerate(names)
        ]
        config = OptimizationConfig(learning_rate=0.001, steps=1,
                                    variable_choice="class_token",
                                    guidance_scale=7.5, sampling_steps=1, seed=0)
        records, report = run_campaign(backend, prepared, config,
                                       prompt_template="{}",
                                       oracle=RandomVerdictOracle(oracle_seed))
        for record in records:
            if record.strict_success:
                strict_seen += 1
                if not record.relaxed_success:
                    violations += 1
        assert report.strict_successes <= report.relaxed_successes
    verdict("strict-implies-relaxed", violations == 0 and strict_seen > 0,
            f"{strict_seen} strict successes, {violations} violations")
