"""Command-line entry point.

Subcommands: ``synth`` (deterministic corpus generation), ``train`` (the
two-phase training loop), ``eval`` (decode every turn and write the score
report), and ``generate`` (decode one turn and print it).

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from .corpus import (
    CorpusError,
    DEFAULT_MANIFESTS,
    Dialogue,
    Domain,
    DomainManifest,
    corpus_intents,
    load_corpus,
    save_corpus,
    synth_contrast_corpus,
    synth_corpus,
)
from .decoder import decode_turn, evaluate_corpus
from .metrics import TABLE_COLUMNS
from .model import load_checkpoint, save_checkpoint
from .report import write_report
from .serializer import SerializerConfig, SerializerError, build_example
from .tokenizer import Vocab, build_vocab
from .trainer import TrainConfig, pipeline_extra, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class DataError(Exception):
    """Invalid input data or configuration."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; the contract reserves 2 for data
    # errors, so usage failures remap to 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _domain(text: str) -> Domain:
    try:
        return Domain(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"unknown domain {text!r} (choose furniture or fashion)"
        ) from None


def build_parser() -> _Parser:
    parser = _Parser(prog="shoptalk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_synth = sub.add_parser("synth",
                             help="write a deterministic synthetic corpus")
    p_synth.add_argument("--seed", type=int, required=True, help="generator seed")
    p_synth.add_argument("--n", type=_positive_int, required=True,
                         help="number of dialogues (>= 1)")
    p_synth.add_argument("--domain", type=_domain, required=True,
                         help="furniture or fashion")
    p_synth.add_argument("--out", required=True, help="output JSONL path")
    p_synth.add_argument("--contrast", action="store_true",
                         help="action-conditioned contrast corpus (furniture only)")

    p_train = sub.add_parser("train",
                             help="train a model on JSONL corpora")
    p_train.add_argument("--config", help="JSON config {serializer, model, train}")
    p_train.add_argument("--furniture", help="furniture corpus JSONL")
    p_train.add_argument("--fashion", help="fashion corpus JSONL")
    p_train.add_argument("--out-dir", required=True, help="checkpoint/log directory")
    p_train.add_argument("--dev-furniture", help="dev furniture corpus JSONL")
    p_train.add_argument("--dev-fashion", help="dev fashion corpus JSONL")
    p_train.add_argument("--seed", type=int, help="override train.seed")
    p_train.add_argument("--lr", type=float, help="override train.lr")
    p_train.add_argument("--lm-epochs", type=int, help="override train.lm_epochs")
    p_train.add_argument("--mt-epochs", type=int, help="override train.mt_epochs")
    p_train.add_argument("--batch-size", type=int, help="override train.batch_size")

    p_eval = sub.add_parser("eval",
                            help="decode a corpus and write the metrics report")
    p_eval.add_argument("--ckpt", required=True, help="checkpoint file")
    p_eval.add_argument("--furniture", help="furniture corpus JSONL")
    p_eval.add_argument("--fashion", help="fashion corpus JSONL")
    p_eval.add_argument("--report", required=True, help="report output directory")
    p_eval.add_argument("--candidates", help="candidate pools JSONL "
                        "(default: deterministic synthesis)")
    p_eval.add_argument("--gt-action", choices=("auto", "on", "off"), default="auto",
                        help="feed the gold action token after the belief "
                        "(auto: follow the checkpoint's serializer flag)")
    p_eval.add_argument("--max-new-tokens", type=_positive_int, default=128)

    p_gen = sub.add_parser("generate",
                           help="decode one turn and print it")
    p_gen.add_argument("--ckpt", required=True, help="checkpoint file")
    p_gen.add_argument("--corpus", required=True, help="corpus JSONL")
    p_gen.add_argument("--domain", type=_domain, required=True)
    p_gen.add_argument("--dialogue", required=True, help="dialogue id")
    p_gen.add_argument("--turn", type=int, required=True, help="turn index (0-based)")
    p_gen.add_argument("--gt-action", choices=("on", "off"), default="on")
    p_gen.add_argument("--max-new-tokens", type=_positive_int, default=128)
    return parser


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    if args.contrast:
        if args.domain is not Domain.FURNITURE:
            raise DataError("--contrast corpora are furniture-domain only")
        dialogues = synth_contrast_corpus(args.seed, args.n)
    else:
        dialogues = synth_corpus(args.seed, args.n, args.domain)
    save_corpus(dialogues, args.out)
    mean_turns = sum(len(d.turns) for d in dialogues) / len(dialogues)
    vocab = build_vocab([dialogues], SerializerConfig())
    print(f"wrote {len(dialogues)} dialogues to {args.out}")
    print(f"mean turns per dialogue: {mean_turns:.2f}")
    print(f"vocabulary size: {vocab.size}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

_MODEL_KEYS = ("model_dim", "n_layers", "n_heads", "max_seq_len")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"config {path}: invalid JSON: {exc.msg} (line {exc.lineno})")
    if not isinstance(raw, dict):
        raise DataError(f"config {path}: expected a JSON object")
    allowed = {
        "serializer": set(f.name for f in dataclasses.fields(SerializerConfig)),
        "model": set(_MODEL_KEYS),
        "train": set(f.name for f in dataclasses.fields(TrainConfig)),
    }
    for section, body in raw.items():
        if section not in allowed:
            raise DataError(f"config {path}: unknown section {section!r}")
        if not isinstance(body, dict):
            raise DataError(f"config {path}: section {section!r} must be an object")
        for key in body:
            if key not in allowed[section]:
                raise DataError(
                    f"config {path}: unknown key {section}.{key}"
                )
    return raw


def _load_corpora(
    furniture: str | None, fashion: str | None
) -> dict[Domain, list[Dialogue]]:
    corpora: dict[Domain, list[Dialogue]] = {}
    if furniture:
        corpora[Domain.FURNITURE] = load_corpus(furniture, Domain.FURNITURE)
    if fashion:
        corpora[Domain.FASHION] = load_corpus(fashion, Domain.FASHION)
    if not corpora:
        raise DataError("no corpus given: pass --furniture and/or --fashion")
    for domain, dialogues in corpora.items():
        if not dialogues:
            raise DataError(f"{domain.value} corpus is empty")
    return corpora


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    config = _load_config(args.config)
    try:
        ser_cfg = SerializerConfig(**config.get("serializer", {}))
        train_kwargs = dict(config.get("train", {}))
        for flag in ("seed", "lr", "lm_epochs", "mt_epochs", "batch_size"):
            value = getattr(args, flag)
            if value is not None:
                train_kwargs[flag] = value
        train_cfg = TrainConfig(**train_kwargs)
    except ValueError as exc:
        raise DataError(f"config: {exc}")
    model_kwargs = dict(config.get("model", {}))

    corpora = _load_corpora(args.furniture, args.fashion)
    if train_cfg.multi_domain and len(corpora) < 2:
        raise DataError(
            "merged-domain training (train.multi_domain=true) requires both "
            "--furniture and --fashion corpora; pass both or set the flag false"
        )

    if not ser_cfg.intent_vocab:
        all_dialogues = [d for dlgs in corpora.values() for d in dlgs]
        ser_cfg = dataclasses.replace(
            ser_cfg, intent_vocab=corpus_intents(all_dialogues)
        )

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    dev_corpora = corpora
    if args.dev_furniture or args.dev_fashion:
        dev_corpora = _load_corpora(args.dev_furniture, args.dev_fashion)

    best = {"joint": -1.0}

    def dev_eval(params, model_cfg, vocab, epoch):
        result = evaluate_corpus(
            params, model_cfg, dev_corpora, ser_cfg, vocab,
            max_new_tokens=128,
        )
        joint = float(
            np.mean([r.joint_accuracy for r in result.reports.values()])
        )
        if joint > best["joint"]:
            best["joint"] = joint
            save_checkpoint(
                out_dir / "ckpt-best.bin", params, model_cfg,
                pipeline_extra(ser_cfg, vocab, DEFAULT_MANIFESTS, list(corpora)),
            )
        return {
            "joint": joint,
            "reports": {d.value: r.to_dict() for d, r in result.reports.items()},
        }

    log_path = out_dir / "train_log.jsonl"
    with log_path.open("w", encoding="utf-8") as log_fh:

        def on_epoch(record):
            log_fh.write(json.dumps(record, sort_keys=True) + "\n")
            log_fh.flush()
            losses = " ".join(f"{k}={v:.4f}" for k, v in record["losses"].items())
            print(f"epoch {record['epoch']:3d} [{record['phase']}] {losses}")

        result = train(
            corpora,
            ser_cfg,
            train_cfg,
            out_dir=out_dir,
            dev_eval=dev_eval if train_cfg.eval_every > 0 else None,
            on_epoch=on_epoch,
            **model_kwargs,
        )

    result.vocab.save(out_dir / "vocab.json")
    resolved = {
        "serializer": result.serializer_cfg.to_dict(),
        "model": {k: getattr(result.model_cfg, k) for k in _MODEL_KEYS},
        "train": result.train_cfg.to_dict(),
    }
    (out_dir / "config.json").write_text(
        json.dumps(resolved, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if result.skipped:
        print(f"skipped {len(result.skipped)} over-long example(s)", file=sys.stderr)
    print(f"finished {len(result.log)} epochs; checkpoint: {out_dir / 'ckpt-final.bin'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval / generate
# ---------------------------------------------------------------------------


def _load_pipeline(ckpt_path: str):
    params, model_cfg, extra = load_checkpoint(ckpt_path)
    try:
        ser_cfg = SerializerConfig.from_dict(extra["serializer_config"])
        vocab = Vocab.from_tokens(extra["vocab"])
        manifests = {
            Domain(m["domain"]): DomainManifest.from_dict(m)
            for m in extra["manifests"]
        }
        domains = [Domain(d) for d in extra["domains"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"checkpoint {ckpt_path} lacks pipeline metadata: {exc}")
    if vocab.size != model_cfg.vocab_size:
        raise DataError(
            f"checkpoint vocabulary ({vocab.size} tokens) does not match the "
            f"model embedding table ({model_cfg.vocab_size})"
        )
    return params, model_cfg, ser_cfg, vocab, manifests, domains


def _check_domains(corpora, trained_domains, ckpt_path):
    for domain in corpora:
        if domain not in trained_domains:
            trained = ", ".join(d.value for d in trained_domains)
            raise DataError(
                f"checkpoint {ckpt_path} was trained without the "
                f"{domain.value} domain (trained: {trained}); its classifier "
                "heads for that domain are untrained"
            )


def _load_candidate_pools(path: str) -> dict[tuple[str, int], tuple[list[str], int]]:
    pools: dict[tuple[str, int], tuple[list[str], int]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                key = (rec["dialogue_id"], int(rec["turn"]))
                candidates = [str(c) for c in rec["candidates"]]
                gt_index = int(rec["gt_index"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"candidates {path} line {lineno}: {exc}")
            if not candidates:
                raise DataError(f"candidates {path} line {lineno}: empty pool")
            if not (0 <= gt_index < len(candidates)):
                raise DataError(
                    f"candidates {path} line {lineno}: gt_index out of range"
                )
            pools[key] = (candidates, gt_index)
    return pools


def cmd_eval(args) -> int:
    params, model_cfg, ser_cfg, vocab, manifests, domains = _load_pipeline(args.ckpt)
    corpora = _load_corpora(args.furniture, args.fashion)
    _check_domains(corpora, domains, args.ckpt)
    pools = _load_candidate_pools(args.candidates) if args.candidates else None
    use_gt_action = None if args.gt_action == "auto" else args.gt_action == "on"
    result = evaluate_corpus(
        params, model_cfg, corpora, ser_cfg, vocab,
        use_gt_action=use_gt_action,
        max_new_tokens=args.max_new_tokens,
        candidate_pools=pools,
    )
    train_log = None
    log_path = Path(args.ckpt).parent / "train_log.jsonl"
    if log_path.exists():
        train_log = [
            json.loads(line)
            for line in log_path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
    written = write_report(args.report, result.reports, result.predictions, train_log)
    print("\t".join(("domain", "n_turns") + TABLE_COLUMNS))
    for domain in sorted(result.reports, key=lambda d: d.value):
        rep = result.reports[domain]
        print(f"{rep.domain}\t{rep.n_turns}\t{rep.table_row()}")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def cmd_generate(args) -> int:
    params, model_cfg, ser_cfg, vocab, manifests, domains = _load_pipeline(args.ckpt)
    corpora = {args.domain: load_corpus(args.corpus, args.domain)}
    _check_domains(corpora, domains, args.ckpt)
    dialogues = corpora[args.domain]
    by_id = {d.dialogue_id: d for d in dialogues}
    if args.dialogue not in by_id:
        raise DataError(f"unknown dialogue id {args.dialogue!r} in {args.corpus}")
    dialogue = by_id[args.dialogue]
    if not (0 <= args.turn < len(dialogue.turns)):
        raise DataError(
            f"turn {args.turn} out of range: dialogue {args.dialogue!r} has "
            f"{len(dialogue.turns)} turns"
        )
    try:
        example = build_example(
            dialogue, args.turn, ser_cfg, vocab, max_len=model_cfg.max_seq_len
        )
    except SerializerError as exc:
        raise DataError(str(exc))
    turn = decode_turn(
        params, model_cfg, example, ser_cfg, vocab,
        use_gt_action=args.gt_action == "on",
        max_new_tokens=args.max_new_tokens,
    )
    manifest = manifests[args.domain]
    api = turn.prediction.api
    print(f"dialogue : {args.dialogue} turn {args.turn} ({args.domain.value})")
    print(f"belief   : {turn.belief_text or '(empty)'}")
    for frame in turn.belief_frames:
        slots = ", ".join(f"{k}={v}" for k, v in frame.slots)
        print(f"  frame  : {frame.intent} [{slots}]")
    if args.domain is Domain.FURNITURE:
        attr = manifest.attributes[api.attributes]
    else:
        names = [manifest.attributes[i] for i, on in enumerate(api.attributes) if on]
        attr = ", ".join(names) or "(none)"
    print(f"api      : {manifest.actions[api.action]} [{attr}]")
    print(f"response : {turn.response_text}")
    if turn.no_eob:
        print("note     : no belief-end marker was generated; the whole "
              "generation was treated as the response")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "synth": cmd_synth,
        "train": cmd_train,
        "eval": cmd_eval,
        "generate": cmd_generate,
    }
    try:
        return handlers[args.command](args)
    except (DataError, CorpusError, SerializerError) as exc:
        print(f"shoptalk {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"shoptalk {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"shoptalk {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
