"""Command-line entry point.

Subcommands: generate, campaign, baseline, sweep, report, serve.  Every
command reads an optional TOML config; command-line flags override file
values.  Failures print machine-readable JSON to stderr and exit 2 for
configuration problems, 1 for runtime errors.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

from .config import (
    apply_overrides,
    internal_variable,
    load_config,
    resolve_sampling_steps,
)
from .errors import InvalidConfig, ToolkitError
from .harness import latent_baseline, prefilter_classes, prepare_latents, run_campaign
from .interfaces import Backend, class_index_for, create_backend
from .optimizer import OptimizationConfig, rademacher_sweep, run_optimization
from .seeds import derive_seed, draw_latent
from .tokens import resolve_class_tokens
from .traces import canonical_json, image_to_png_bytes, save_trace, write_json
from .types import AttackSpec


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", help="registered backend name")
    parser.add_argument("--class", dest="class_", metavar="NAME",
                        help="class keyword to attack")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--steps", type=int, help="optimization steps")
    parser.add_argument("--lr", dest="learning_rate", type=float,
                        help="optimizer learning rate")
    parser.add_argument("--lambda", dest="lambda_", type=float, metavar="WEIGHT",
                        help="regularizer weight")
    parser.add_argument("--metric", choices=("euclidean", "cosine"),
                        help="regularizer metric")
    parser.add_argument("--variable",
                        choices=("class-token", "text-embedding", "latent"),
                        help="optimization variable")
    parser.add_argument("--guidance-scale", dest="guidance_scale", type=float,
                        help="classifier-free guidance scale")
    parser.add_argument("--workers", type=int, help="parallel campaign workers")
    parser.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="naegen",
        description="Synthesize natural adversarial examples against a frozen classifier.")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help_text, *, with_common=True):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="TOML config file")
        if with_common:
            _common_flags(p)
        return p

    command("generate", "run one optimization and save its trace")
    command("campaign", "prefilter, prepare latents, and run a full campaign")
    command("baseline", "campaign with the latent as the optimization variable")
    sweep = command("sweep", "render images along a random token-space direction")
    sweep.add_argument("--magnitudes", help="comma-separated perturbation magnitudes")

    report = command("report", "recompute and print a campaign report", with_common=False)
    report.add_argument("campaign_dir", type=Path)

    serve = command("serve", "serve the oracle review API", with_common=False)
    serve.add_argument("campaign_dir", type=Path)
    serve.add_argument("--port", type=int, help="listen port")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--ui", type=Path, help="built frontend directory to serve at /")
    serve.add_argument("--all-steps", action="store_true", default=None,
                       help="queue every adversarial step, not just the first")
    return parser


def _overrides_from(args: argparse.Namespace) -> dict:
    mapping = {
        "backend": "backend", "class_": "class", "seed": "seed",
        "steps": "steps", "learning_rate": "learning_rate",
        "lambda_": "lambda", "metric": "metric", "variable": "variable",
        "guidance_scale": "guidance_scale", "workers": "workers", "out": "out",
    }
    overrides = {key: getattr(args, attr)
                 for attr, key in mapping.items() if hasattr(args, attr)}
    if getattr(args, "magnitudes", None) is not None:
        try:
            overrides["magnitudes"] = [float(m) for m in args.magnitudes.split(",")]
        except ValueError:
            raise InvalidConfig(
                f"magnitudes: expected comma-separated numbers, got {args.magnitudes!r}")
    return overrides


def _load(args: argparse.Namespace) -> dict:
    return apply_overrides(load_config(getattr(args, "config", None)),
                           _overrides_from(args))


def _require(config: dict, key: str) -> None:
    if config[key] is None:
        raise InvalidConfig(f"{key}: required for this command "
                            f"(set it in the config file or pass the flag)")


def _opt_config(config: dict, *, seed: int) -> OptimizationConfig:
    return OptimizationConfig(
        learning_rate=config["learning_rate"],
        steps=config["steps"],
        variable_choice=internal_variable(config),
        guidance_scale=config["guidance_scale"],
        sampling_steps=resolve_sampling_steps(config),
        seed=seed,
    )


def _attack_for(config: dict, backend: Backend, class_name: str) -> AttackSpec:
    prompt = config["prompt"].format(class_name) if "{}" in config["prompt"] \
        else config["prompt"]
    mode = config["mode"]
    label = config["label"]
    if mode in ("targeted", "ood_to_id") and label is None:
        raise InvalidConfig(f"label: required for mode {mode!r}")
    if mode == "untargeted" and label is None:
        label = class_index_for(backend.classifier, class_name)
        if label is None:
            raise InvalidConfig(
                f"class: {class_name!r} is not in the classifier's label set")
    if mode == "id_to_ood":
        label = None
    return AttackSpec(mode=mode, label=label, prompt=prompt,
                      class_keyword=class_name,
                      regularizer_metric=config["metric"],
                      reg_weight=config["lambda"])


def cmd_generate(args: argparse.Namespace) -> int:
    config = _load(args)
    _require(config, "class")
    _require(config, "out")
    backend = create_backend(config["backend"])
    class_name = config["class"]
    attack = _attack_for(config, backend, class_name)
    opt = _opt_config(config, seed=config["seed"])
    z = draw_latent(backend.generator.latent_dim,
                    derive_seed(config["seed"], "generate", class_name),
                    dtype=backend.generator.latent_dtype)
    trace = run_optimization(attack, opt, backend.generator, backend.encoder,
                             backend.classifier, z)
    out_dir = Path(config["out"])
    save_trace(trace, out_dir)
    print(canonical_json({
        "trace_dir": str(out_dir),
        "classifier_fooled": trace.classifier_fooled,
        "first_adversarial_step": trace.first_adversarial_step,
        "failure": trace.failure,
    }))
    return 0


def _run_protocol(args: argparse.Namespace, runner) -> int:
    config = _load(args)
    _require(config, "out")
    backend = create_backend(config["backend"])
    classes = config["classes"] or list(backend.classifier.class_names)
    seed = config["seed"]
    sampling_steps = resolve_sampling_steps(config)
    accuracy = prefilter_classes(
        backend, classes, config["samples_per_class"],
        config["accuracy_threshold"], seed,
        prompt_template=config["prompt"],
        guidance_scale=config["guidance_scale"], sampling_steps=sampling_steps)
    prepared = [
        prepare_latents(backend, entry.class_name, config["latents_per_class"],
                        seed, prompt_template=config["prompt"],
                        guidance_scale=config["guidance_scale"],
                        sampling_steps=sampling_steps)
        for entry in accuracy if entry.kept
    ]
    records, report = runner(
        backend, prepared, _opt_config(config, seed=seed),
        mode=config["mode"], prompt_template=config["prompt"],
        regularizer_metric=config["metric"], reg_weight=config["lambda"],
        workers=config["workers"], out_dir=Path(config["out"]))
    sys.stdout.write(report.to_json_bytes().decode("utf-8"))
    return 0


def cmd_campaign(args: argparse.Namespace) -> int:
    return _run_protocol(args, run_campaign)


def cmd_baseline(args: argparse.Namespace) -> int:
    return _run_protocol(args, latent_baseline)


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _load(args)
    _require(config, "class")
    _require(config, "out")
    backend = create_backend(config["backend"])
    class_name = config["class"]
    prompt = config["prompt"].format(class_name) if "{}" in config["prompt"] \
        else config["prompt"]
    tokens = resolve_class_tokens(prompt, class_name, backend.encoder)
    images = rademacher_sweep(tokens, config["magnitudes"], config["seed"],
                              backend.generator, backend.encoder,
                              guidance_scale=config["guidance_scale"],
                              sampling_steps=resolve_sampling_steps(config))
    out_dir = Path(config["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (magnitude, image) in enumerate(zip(config["magnitudes"], images)):
        name = f"magnitude_{i:02d}.png"
        png = image_to_png_bytes(image)
        (out_dir / name).write_bytes(png)
        entries.append({"magnitude": magnitude, "image": name,
                        "image_digest": hashlib.sha256(png).hexdigest()})
    write_json(out_dir / "manifest.json", {
        "schema_version": 1,
        "backend": config["backend"],
        "class": class_name,
        "prompt": prompt,
        "seed": config["seed"],
        "images": entries,
    })
    print(canonical_json({"sweep_dir": str(out_dir), "images": len(entries)}))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    from .harness import report_csv_bytes
    from .review.store import ReviewStore

    store = ReviewStore(args.campaign_dir)
    report = store.compute_report()
    (args.campaign_dir / "report.json").write_bytes(report.to_json_bytes())
    (args.campaign_dir / "report.csv").write_bytes(
        report_csv_bytes(store.run_records()))
    sys.stdout.write(report.to_json_bytes().decode("utf-8"))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .review.service import create_app

    config = _load(args)
    port = args.port if args.port is not None else config["port"]
    all_steps = args.all_steps if args.all_steps is not None else config["all_steps"]
    app = create_app(args.campaign_dir, all_steps=all_steps, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "campaign": cmd_campaign,
    "baseline": cmd_baseline,
    "sweep": cmd_sweep,
    "report": cmd_report,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InvalidConfig as exc:
        payload = {"error": "InvalidConfig", "message": str(exc)}
        if exc.details:
            payload["details"] = exc.details
        print(canonical_json(payload), file=sys.stderr)
        return 2
    except ToolkitError as exc:
        print(canonical_json({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    except OSError as exc:
        print(canonical_json({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
