"""Training loop: AdamW with linear decay, merged-domain batching, and the
three-phase task schedule.

Phase 1 trains the LM objective alone for ``lm_epochs``. Phase 2 runs
``mt_epochs`` of iterative multi-task training: each batch draws one task
and only that task's loss updates the model. The first two and the last
multi-task epochs draw action / attribute / LM uniformly; the remaining
epochs draw attribute 1/3 and LM 2/3 (no action).

Batches never mix domains, so each batch has a well-defined classifier head.
A merged epoch covers every example of every domain exactly once: the next
batch comes from a uniformly chosen non-exhausted domain.

Everything is deterministic given the seed: two runs with identical inputs
produce byte-identical parameters.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from .corpus import DEFAULT_MANIFESTS, Dialogue, Domain, DomainManifest
from .model import (
    ModelConfig,
    classifier_backward,
    forward,
    init_params,
    lm_backward,
    save_checkpoint,
    zeros_like_params,
)
from .serializer import (
    SequenceTooLongError,
    SerializedExample,
    SerializerConfig,
    build_example,
)
from .tokenizer import Vocab, build_vocab


class TaskKind(enum.Enum):
    LM = "lm"
    API_ACTION = "action"
    API_ATTRIBUTE = "attribute"


@dataclass(frozen=True)
class TrainConfig:
    """Optimization and schedule settings."""

    lr: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    batch_size: int = 8
    lm_epochs: int = 6
    mt_epochs: int = 20
    seed: int = 0
    grad_clip: float = 1.0
    multi_domain: bool = True
    multi_task: bool = True
    mask_history_loss: bool = True
    eval_every: int = 0  # dev evaluations every N epochs; 0 = never
    save_every: int = 0  # per-epoch checkpoints every N epochs; 0 = final only
    dtype: str = "float32"

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("betas must lie in [0, 1)")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.dtype not in ("float32", "float64"):
            raise ValueError(f"dtype must be float32 or float64, got {self.dtype!r}")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class OptimizerState:
    """AdamW moments and step counter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def fresh(cls, params: Mapping[str, np.ndarray]) -> "OptimizerState":
        return cls(m=zeros_like_params(params), v=zeros_like_params(params))


def adamw_step(
    params: dict[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: OptimizerState,
    lr_t: float,
    cfg: TrainConfig,
) -> None:
    """One decoupled-weight-decay Adam update, in place."""
    if grads.keys() != params.keys():
        raise ValueError("gradient keys do not match parameter keys")
    state.step += 1
    t = state.step
    bc1 = 1.0 - cfg.beta1**t
    bc2 = 1.0 - cfg.beta2**t
    for name, theta in params.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ValueError(f"gradient shape mismatch for {name!r}")
        if not np.isfinite(g).all():
            raise ValueError(f"non-finite gradient in {name!r} at step {t}")
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * np.square(g)
        update = (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
        if cfg.weight_decay:
            update = update + cfg.weight_decay * theta
        theta -= lr_t * update


def lr_schedule(step: int, total_steps: int, base_lr: float) -> float:
    """Linear decay from base_lr at step 0 to zero at total_steps."""
    if total_steps <= 0:
        return base_lr
    return base_lr * max(0.0, 1.0 - step / total_steps)


def clip_grads(grads: Mapping[str, np.ndarray], max_norm: float) -> float:
    """Scale gradients to a global norm of at most max_norm; returns the norm."""
    total = 0.0
    for g in grads.values():
        total += float(np.vdot(g, g).real)
    norm = math.sqrt(total)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def domain_sampler(
    examples_by_domain: Mapping[Domain, Sequence[SerializedExample]],
    batch_size: int,
    rng: np.random.Generator,
) -> Iterator[tuple[Domain, list[SerializedExample]]]:
    """One merged epoch of single-domain batches.

    Each domain's examples are shuffled and cut into batches; every iteration
    draws the next batch of a uniformly chosen non-exhausted domain, so every
    example appears exactly once per merged epoch.
    """
    queues: list[tuple[Domain, list[list[SerializedExample]]]] = []
    for domain in sorted(examples_by_domain, key=lambda d: d.value):
        examples = examples_by_domain[domain]
        if not examples:
            raise ValueError(f"domain {domain.value} has no examples")
        order = rng.permutation(len(examples))
        batches = [
            [examples[j] for j in order[i : i + batch_size]]
            for i in range(0, len(examples), batch_size)
        ]
        queues.append((domain, batches))
    while queues:
        pick = int(rng.integers(len(queues))) if len(queues) > 1 else 0
        domain, batches = queues[pick]
        yield domain, batches.pop(0)
        if not batches:
            queues.pop(pick)


def task_sampler(
    epoch_in_mt_phase: int, n_mt_epochs: int, rng: np.random.Generator
) -> TaskKind:
    """Draw the task for one multi-task batch."""
    if epoch_in_mt_phase in (0, 1) or epoch_in_mt_phase == n_mt_epochs - 1:
        return rng.choice([TaskKind.API_ACTION, TaskKind.API_ATTRIBUTE, TaskKind.LM])
    return rng.choice(
        [TaskKind.API_ACTION, TaskKind.API_ATTRIBUTE, TaskKind.LM],
        p=[0.0, 1.0 / 3.0, 2.0 / 3.0],
    )


# ---------------------------------------------------------------------------
# Batch assembly
# ---------------------------------------------------------------------------


@dataclass
class Batch:
    domain: Domain
    token_ids: np.ndarray  # (B, T) end-padded with 0
    segment_ids: np.ndarray  # (B, T)
    target_ids: np.ndarray  # (B, T): token_ids shifted left, last column unused
    target_mask: np.ndarray  # (B, T) bool, False at padding and final column
    eob_index: np.ndarray  # (B,)
    action_labels: np.ndarray  # (B,)
    attribute_labels: np.ndarray  # (B,) int for furniture, (B, n) float for fashion


def collate(examples: Sequence[SerializedExample], domain: Domain) -> Batch:
    """End-pad a single-domain list of examples into one batch.

    Causal attention plus the target mask make end padding exactly
    equivalent to processing each example alone.
    """
    B = len(examples)
    T = max(len(e.tokens) for e in examples)
    ids = np.zeros((B, T), dtype=np.int64)
    segs = np.zeros((B, T), dtype=np.int64)
    targets = np.zeros((B, T), dtype=np.int64)
    mask = np.zeros((B, T), dtype=bool)
    eob = np.zeros(B, dtype=np.int64)
    actions = np.zeros(B, dtype=np.int64)
    for b, e in enumerate(examples):
        L = len(e.tokens)
        ids[b, :L] = e.tokens
        segs[b, :L] = e.segment_ids
        targets[b, : L - 1] = e.tokens[1:]
        # the mask flag of position p gates p as a prediction target
        mask[b, : L - 1] = e.loss_mask[1:]
        eob[b] = e.eob_index
        actions[b] = e.action_label
    if domain is Domain.FASHION:
        attrs = np.asarray([e.attribute_label for e in examples], dtype=np.float64)
    else:
        attrs = np.asarray([e.attribute_label for e in examples], dtype=np.int64)
    return Batch(
        domain=domain, token_ids=ids, segment_ids=segs, target_ids=targets,
        target_mask=mask, eob_index=eob, action_labels=actions, attribute_labels=attrs,
    )


def serialize_corpus(
    corpora: Mapping[Domain, Sequence[Dialogue]],
    cfg: SerializerConfig,
    vocab: Vocab,
    max_len: int,
) -> tuple[dict[Domain, list[SerializedExample]], list[str]]:
    """Serialize every turn; over-long turns are skipped and reported."""
    out: dict[Domain, list[SerializedExample]] = {}
    skipped: list[str] = []
    for domain, dialogues in corpora.items():
        examples: list[SerializedExample] = []
        for dlg in dialogues:
            for ti in range(len(dlg.turns)):
                try:
                    examples.append(build_example(dlg, ti, cfg, vocab, max_len=max_len))
                except SequenceTooLongError as exc:
                    skipped.append(str(exc))
        out[domain] = examples
    return out, skipped


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    model_cfg: ModelConfig
    vocab: Vocab
    serializer_cfg: SerializerConfig
    train_cfg: TrainConfig
    log: list[dict]
    skipped: list[str]


def pipeline_extra(
    ser_cfg: SerializerConfig,
    vocab: Vocab,
    manifests: Mapping[Domain, DomainManifest],
    domains: Sequence[Domain],
) -> dict:
    """Checkpoint header extras that make a checkpoint self-contained."""
    return {
        "serializer_config": ser_cfg.to_dict(),
        "vocab": list(vocab.tokens),
        "manifests": [manifests[d].to_dict() for d in sorted(manifests, key=lambda d: d.value)],
        "domains": [d.value for d in sorted(domains, key=lambda d: d.value)],
    }


def _head_names(domain: Domain) -> tuple[str, str]:
    return f"{domain.value}_action", f"{domain.value}_attribute"


def _batch_loss(params, cfg, batch: Batch, task: TaskKind) -> tuple[float, dict]:
    cache = forward(params, batch.token_ids, batch.segment_ids, cfg)
    if task is TaskKind.LM:
        return lm_backward(cache, batch.target_ids, batch.target_mask)
    action_head, attribute_head = _head_names(batch.domain)
    if task is TaskKind.API_ACTION:
        return classifier_backward(cache, action_head, batch.action_labels, batch.eob_index)
    return classifier_backward(cache, attribute_head, batch.attribute_labels, batch.eob_index)


def _task_param_names(
    params: Mapping[str, np.ndarray],
    batch: Batch,
    task: TaskKind,
    use_segment_embedding: bool,
) -> list[str]:
    """Parameters on the sampled task's gradient path.

    The optimizer step touches only these, so a head whose task never fires
    (multi-task off, or a domain absent from the run) stays exactly at its
    initialization instead of being eroded by weight decay. The segment
    table likewise stays put when segment embeddings are disabled.
    """
    body = [
        name
        for name in params
        if not name.startswith("head.")
        and (use_segment_embedding or name != "wse")
    ]
    if task is TaskKind.LM:
        return body
    action_head, attribute_head = _head_names(batch.domain)
    head = action_head if task is TaskKind.API_ACTION else attribute_head
    prefix = f"head.{head}."
    return body + [name for name in params if name.startswith(prefix)]


def train(
    corpora: Mapping[Domain, Sequence[Dialogue]],
    ser_cfg: SerializerConfig,
    train_cfg: TrainConfig,
    model_dim: int = 64,
    n_layers: int = 2,
    n_heads: int = 2,
    max_seq_len: int = 512,
    manifests: Mapping[Domain, DomainManifest] | None = None,
    out_dir: str | Path | None = None,
    dev_eval: Callable[[dict, ModelConfig, Vocab, int], dict] | None = None,
    on_epoch: Callable[[dict], None] | None = None,
) -> TrainResult:
    """Run the two-phase loop over one or two domains.

    ``dev_eval`` is called on evaluated epochs (per ``eval_every``) and its
    dict lands in the log record; ``on_epoch`` observes every log record as
    it is produced.
    """
    manifests = manifests or DEFAULT_MANIFESTS
    domains = sorted(corpora, key=lambda d: d.value)
    if not domains:
        raise ValueError("no corpora given")
    if train_cfg.multi_domain != ser_cfg.multi_domain:
        raise ValueError("multi_domain flag differs between train and serializer configs")
    if train_cfg.mask_history_loss != ser_cfg.mask_history_loss:
        raise ValueError("mask_history_loss flag differs between train and serializer configs")
    if not train_cfg.multi_domain and len(domains) > 1:
        raise ValueError("multiple domains require multi_domain=True")
    for d in domains:
        if not corpora[d]:
            raise ValueError(f"domain {d.value} corpus is empty")

    vocab = build_vocab([corpora[d] for d in domains], ser_cfg, manifests)
    heads = tuple(
        (name, size)
        for d in sorted(manifests, key=lambda dd: dd.value)
        for name, size in (
            (f"{d.value}_action", manifests[d].n_actions),
            (f"{d.value}_attribute", manifests[d].n_attributes),
        )
    )
    model_cfg = ModelConfig(
        vocab_size=vocab.size,
        model_dim=model_dim,
        n_layers=n_layers,
        n_heads=n_heads,
        max_seq_len=max_seq_len,
        use_segment_embedding=ser_cfg.segment_embedding,
        heads=heads,
    )
    examples, skipped = serialize_corpus(corpora, ser_cfg, vocab, max_seq_len)
    for d in domains:
        if not examples[d]:
            raise ValueError(f"domain {d.value} has no serializable examples")

    dtype = np.float32 if train_cfg.dtype == "float32" else np.float64
    params = init_params(model_cfg, train_cfg.seed, dtype=dtype)
    state = OptimizerState.fresh(params)
    rng = np.random.default_rng(train_cfg.seed)

    batches_per_epoch = sum(
        math.ceil(len(examples[d]) / train_cfg.batch_size) for d in domains
    )
    n_epochs = train_cfg.lm_epochs + train_cfg.mt_epochs
    total_steps = n_epochs * batches_per_epoch

    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    log: list[dict] = []
    for epoch in range(n_epochs):
        mt_phase = epoch >= train_cfg.lm_epochs
        task_losses: dict[str, list[float]] = {}
        for domain, batch_examples in domain_sampler(examples, train_cfg.batch_size, rng):
            if mt_phase and train_cfg.multi_task:
                task = task_sampler(epoch - train_cfg.lm_epochs, train_cfg.mt_epochs, rng)
            else:
                task = TaskKind.LM
            batch = collate(batch_examples, domain)
            loss, grads = _batch_loss(params, model_cfg, batch, task)
            names = _task_param_names(
                params, batch, task, model_cfg.use_segment_embedding
            )
            sub_params = {n: params[n] for n in names}
            sub_grads = {n: grads[n] for n in names}
            clip_grads(sub_grads, train_cfg.grad_clip)
            lr_t = lr_schedule(state.step, total_steps, train_cfg.lr)
            adamw_step(sub_params, sub_grads, state, lr_t, train_cfg)
            task_losses.setdefault(task.value, []).append(loss)

        record: dict = {
            "epoch": epoch,
            "phase": "mt" if mt_phase else "lm",
            "losses": {k: float(np.mean(v)) for k, v in sorted(task_losses.items())},
            "n_batches": sum(len(v) for v in task_losses.values()),
            "lr": lr_schedule(state.step, total_steps, train_cfg.lr),
        }
        if dev_eval is not None and train_cfg.eval_every > 0 and (
            (epoch + 1) % train_cfg.eval_every == 0 or epoch == n_epochs - 1
        ):
            record["dev"] = dev_eval(params, model_cfg, vocab, epoch)
        log.append(record)
        if on_epoch is not None:
            on_epoch(record)
        if (
            out_path is not None
            and train_cfg.save_every > 0
            and (epoch + 1) % train_cfg.save_every == 0
        ):
            save_checkpoint(
                out_path / f"ckpt-{epoch}.bin", params, model_cfg,
                pipeline_extra(ser_cfg, vocab, manifests, domains),
            )

    if out_path is not None:
        save_checkpoint(
            out_path / "ckpt-final.bin", params, model_cfg,
            pipeline_extra(ser_cfg, vocab, manifests, domains),
        )
    return TrainResult(
        params=params, model_cfg=model_cfg, vocab=vocab, serializer_cfg=ser_cfg,
        train_cfg=train_cfg, log=log, skipped=skipped,
    )
