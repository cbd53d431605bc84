"""Single-model multi-task dialogue system: serialization, training,
decoding, and evaluation for two shopping domains."""

from .corpus import (
    ApiAction,
    BeliefFrame,
    CorpusError,
    DEFAULT_MANIFESTS,
    Dialogue,
    Domain,
    DomainManifest,
    InvariantError,
    SchemaError,
    Turn,
    VisualObject,
    load_corpus,
    save_corpus,
    synth_contrast_corpus,
    synth_corpus,
    validate,
)
from .decoder import (
    Generation,
    build_candidate_pool,
    decode_turn,
    evaluate_corpus,
    greedy_generate,
    predict_api,
    rank_candidates,
    respond_with_gt_action,
)
from .metrics import (
    MetricsReport,
    TurnScores,
    action_metrics,
    attribute_metrics,
    belief_metrics,
    bleu4,
    compose_report,
    micro_f1,
    retrieval_metrics,
    sentence_bleu4,
)
from .model import (
    ModelConfig,
    classifier_forward,
    forward,
    grad_check,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .serializer import (
    SequenceTooLongError,
    SerializedExample,
    Segment,
    SerializerConfig,
    SerializerError,
    build_example,
    format_belief,
    parse_belief,
    render_example,
    split_intent,
)
from .tokenizer import Vocab, build_vocab
from .trainer import (
    OptimizerState,
    TaskKind,
    TrainConfig,
    TrainResult,
    adamw_step,
    domain_sampler,
    lr_schedule,
    task_sampler,
    train,
)

__version__ = "0.1.0"
