"""Command-line entry point wiring corpus generation, training, translation,
execution, evaluation, gradient checking, and an interactive loop.

Exit codes: 0 ok, 2 usage, 3 malformed program, 4 runtime fault,
5 training failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import baselines, corpus, dsl, evaluation, interp, nmt, scene

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MALFORMED = 3
EXIT_FAULT = 4
EXIT_TRAINING = 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _load_corpus(path, task=None, split=None):
    samples = corpus.read_corpus(path)
    if task:
        samples = [s for s in samples if s.task == task]
    if split:
        samples = [s for s in samples if s.split == split]
    if not samples:
        raise CliError(f"no samples in {path} for task={task} split={split}",
                       EXIT_USAGE)
    tasks = {s.task for s in samples}
    if len(tasks) > 1:
        raise CliError(f"{path} mixes tasks {sorted(tasks)}; pass --task",
                       EXIT_USAGE)
    return samples


def _infer_task(text: str) -> str:
    words = set(text.split())
    if words & {"move", "grip"}:
        return dsl.MANIPULATION
    return dsl.ARRANGE


def cmd_gen_corpus(args) -> int:
    samples = corpus.generate_corpus(args.task, args.n_base, args.seed)
    if args.n_aug:
        samples = corpus.augment(samples, args.n_aug, args.seed + 1)
    corpus.write_corpus(samples, args.out)
    print(f"wrote {len(samples)} samples to {args.out}")
    if args.direct_out:
        direct, skipped = corpus.derive_direct_dataset(
            samples, n_scenes=args.n_scenes, seed=args.seed + 2)
        corpus.write_direct_dataset(direct, args.direct_out)
        print(f"wrote {len(direct)} direct samples to {args.direct_out}"
              f" ({skipped} faulted rollouts skipped)")
    return EXIT_OK


def cmd_train(args) -> int:
    samples = _load_corpus(args.corpus, split="train")
    task = samples[0].task
    config = nmt.ModelConfig(embed_dim=args.embed_dim,
                             hidden_dim=args.hidden_dim,
                             head_dim=args.head_dim,
                             seed=args.seed)
    log = print if args.verbose else None
    try:
        model, curve = nmt.train(config, samples, epochs=args.epochs,
                                 batch_size=args.batch_size, lr=args.lr,
                                 log=log)
    except nmt.NonFiniteLoss as exc:
        raise CliError(f"NonFiniteLoss: {exc}", EXIT_TRAINING)
    nmt.save_translator(model, args.out, task=task)
    print(f"trained on {len(samples)} samples "
          f"(loss {curve[0]:.4f} -> {curve[-1]:.4f}); saved {args.out}")
    return EXIT_OK


def cmd_train_baseline(args) -> int:
    task = dsl.ARRANGE if args.task == "arrange" else dsl.MANIPULATION
    samples = _load_corpus(args.corpus, task=task, split="train")
    direct, skipped = corpus.derive_direct_dataset(
        samples, n_scenes=args.n_scenes, seed=args.seed + 2)
    config = baselines.BaselineConfig(embed_dim=args.embed_dim,
                                      hidden_dim=args.hidden_dim,
                                      head_dim=args.head_dim,
                                      seed=args.seed)
    log = print if args.verbose else None
    trainer = baselines.train_arrange_baseline if task == dsl.ARRANGE \
        else baselines.train_manip_baseline
    try:
        model, curve = trainer(config, direct, epochs=args.epochs,
                               batch_size=args.batch_size, lr=args.lr, log=log)
    except nmt.NonFiniteLoss as exc:
        raise CliError(f"NonFiniteLoss: {exc}", EXIT_TRAINING)
    baselines.save_baseline(model, args.out)
    print(f"trained {args.task} baseline on {len(direct)} rollouts "
          f"(loss {curve[0]:.5f} -> {curve[-1]:.5f}); saved {args.out}")
    return EXIT_OK


def cmd_translate(args) -> int:
    model, task = nmt.load_translator(args.ckpt)
    try:
        result = nmt.translate(model, args.instruction)
    except (corpus.InstructionLexError, nmt.UnknownSourceToken) as exc:
        raise CliError(f"Malformed: {exc}", EXIT_MALFORMED)
    text = dsl.detokenize([dsl.token(t) for t in result.tokens])
    if result.malformed:
        print(text)
        raise CliError("Malformed: decode hit the length cap without EOS",
                       EXIT_MALFORMED)
    try:
        program = dsl.parse_text(text, task)
    except (dsl.LexError, dsl.DslSyntaxError) as exc:
        print(text)
        raise CliError(f"Malformed: {exc}", EXIT_MALFORMED)
    rendered = dsl.format_program(program, instruction=args.instruction)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(rendered)
        print(f"wrote {args.out}")
    else:
        print(rendered, end="")
    if args.emit_attention:
        with open(args.emit_attention, "w", encoding="utf-8") as fh:
            fh.write(nmt.attention_csv(result))
        print(f"wrote attention matrix to {args.emit_attention}")
    return EXIT_OK


def cmd_run(args) -> int:
    with open(args.program, "r", encoding="utf-8") as fh:
        text = fh.read()
    sc = scene.read_scene(args.scene)
    task = args.task if args.task != "auto" else _infer_task(text)
    try:
        program = dsl.parse_text(text, task)
    except (dsl.LexError, dsl.DslSyntaxError) as exc:
        raise CliError(f"Malformed: {exc}", EXIT_MALFORMED)
    outcome = interp.execute(program, sc)
    sys.stdout.write(interp.format_outcome(outcome))
    if not outcome.ok:
        raise CliError(
            f"RuntimeFault: {outcome.fault_kind} at step {outcome.fault_step}",
            EXIT_FAULT)
    return EXIT_OK


def _predictor_for(ckpt_path, ground_truth=False):
    if ground_truth:
        return evaluation.GroundTruthPredictor(), None
    meta, _ = nmt.load_checkpoint(ckpt_path)
    kind = meta["kind"]
    if kind == "translator":
        model, task = nmt.load_translator(ckpt_path)
        return evaluation.TranslatorPredictor(model), task
    model, kind = baselines.load_baseline(ckpt_path)
    if kind == "arrange_baseline":
        return evaluation.ArrangeBaselinePredictor(model), dsl.ARRANGE
    return evaluation.ManipBaselinePredictor(model), dsl.MANIPULATION


def cmd_evaluate(args) -> int:
    predictor, task = _predictor_for(args.ckpt, args.ground_truth)
    samples = _load_corpus(args.corpus, task=task, split=args.split)
    report = evaluation.evaluate(predictor, samples, n_scenes=args.n_scenes,
                                 seed=args.seed)
    text = report.to_records() if args.records else report.to_text()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote report to {args.out}")
        print(f"accuracy {report.accuracy:.2f}% malformed "
              f"{report.malformed_pct:.2f}% faulted {report.faulted_pct:.2f}%")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_grad_check(args) -> int:
    err = nmt.grad_check()
    print(f"max relative gradient error: {err:.3e}")
    return EXIT_OK


def cmd_repl(args) -> int:
    model, task = nmt.load_translator(args.ckpt)
    sc = scene.read_scene(args.scene) if args.scene else None
    print(f"loaded {args.ckpt} (task: {task})"
          + (f", scene: {args.scene}" if sc else ", no scene loaded"))
    print("enter an instruction, or an empty line to quit")
    while True:
        try:
            line = input("> ").strip()
        except EOFError:
            break
        if not line:
            break
        try:
            result = nmt.translate(model, line)
        except (corpus.InstructionLexError, nmt.UnknownSourceToken) as exc:
            print(f"malformed: {exc}")
            continue
        text = dsl.detokenize([dsl.token(t) for t in result.tokens])
        if result.malformed:
            print(f"malformed (no EOS within cap): {text}")
            continue
        try:
            program = dsl.parse_text(text, task)
        except (dsl.LexError, dsl.DslSyntaxError) as exc:
            print(f"malformed: {exc}")
            print(f"  tokens: {text}")
            continue
        print(dsl.format_program(program), end="")
        peak = result.attention.argmax(axis=1)
        focus = " ".join(result.source_words[i] for i in peak)
        print(f"attention focus per step: {focus}")
        if sc is None:
            continue
        try:
            answer = input("execute against the loaded scene? [y/N] ").strip()
        except EOFError:
            break
        if answer.lower() == "y":
            outcome = interp.execute(program, sc)
            sys.stdout.write(interp.format_outcome(outcome))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roboscript",
        description="Translate natural-language instructions into robot "
                    "control programs, execute them against scenes, and "
                    "evaluate against direct-regression baselines.")
    parser.add_argument("--seed", type=int, default=0,
                        help="global random seed (printed on every run)")
    parser.add_argument("--verbose", action="store_true",
                        help="log per-epoch training progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="generate a parallel corpus")
    p.add_argument("--task", choices=[dsl.ARRANGE, dsl.MANIPULATION],
                   required=True)
    p.add_argument("--n-base", type=int, required=True,
                   help="base sample count (124/146 reproduce the reference "
                        "splits)")
    p.add_argument("--n-aug", type=int, default=0,
                   help="object-swap augmentations per base sample")
    p.add_argument("--out", required=True, help="corpus TSV path")
    p.add_argument("--direct-out",
                   help="also derive the direct-supervision dataset here")
    p.add_argument("--n-scenes", type=int, default=20,
                   help="rollouts per sample for --direct-out")
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("train", help="train the instruction translator")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="checkpoint path (.npz)")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--embed-dim", type=int, default=64)
    p.add_argument("--hidden-dim", type=int, default=128)
    p.add_argument("--head-dim", type=int, default=128)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("train-baseline",
                       help="train a direct-regression baseline")
    p.add_argument("--task", choices=["arrange", "manip"], required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-scenes", type=int, default=20)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--embed-dim", type=int, default=64)
    p.add_argument("--hidden-dim", type=int, default=128)
    p.add_argument("--head-dim", type=int, default=128)
    p.set_defaults(func=cmd_train_baseline)

    p = sub.add_parser("translate",
                       help="translate an instruction to a program")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--instruction", required=True)
    p.add_argument("--out", help="write the program here instead of stdout")
    p.add_argument("--emit-attention",
                   help="write the attention matrix as CSV")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("run", help="execute a program file against a scene")
    p.add_argument("--program", required=True, help=".rsc program file")
    p.add_argument("--scene", required=True, help="scene file")
    p.add_argument("--task", choices=["auto", dsl.ARRANGE, dsl.MANIPULATION],
                   default="auto")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("evaluate", help="execution-based accuracy report")
    p.add_argument("--ckpt", help="translator or baseline checkpoint")
    p.add_argument("--ground-truth", action="store_true",
                   help="evaluate the ground-truth programs against "
                        "themselves instead of a checkpoint")
    p.add_argument("--corpus", required=True)
    p.add_argument("--split", default="test",
                   choices=["train", "dev", "test"])
    p.add_argument("--n-scenes", type=int, default=20)
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--records", action="store_true",
                   help="machine-readable line records instead of the table")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("grad-check",
                       help="verify analytic gradients against finite "
                            "differences on a tiny model")
    p.set_defaults(func=cmd_grad_check)

    p = sub.add_parser("repl", help="interactive instruction loop")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--scene", help="scene file to execute against")
    p.set_defaults(func=cmd_repl)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "evaluate" and not (args.ckpt or args.ground_truth):
        parser.error("evaluate needs --ckpt or --ground-truth")
    print(f"seed: {args.seed}")
    np.random.seed(args.seed)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (scene.SceneParseError, scene.SceneError) as exc:
        print(f"error: SceneError: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: FileNotFound: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
