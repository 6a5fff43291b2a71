"""
Mini-batch training with modality dropout.

Every sample draws its dropout decision from a stream keyed by
(seed, global sample index), and every epoch shuffles with a stream keyed by
(seed, epoch), so a run is a pure function of (seed, data, settings).
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from loguru import logger
from tqdm import tqdm

from src.autograd import ops
from src.autograd.optim import Adam, AdamState
from src.autograd.tensor import Tape, Tensor
from src.config.settings import TrainingSettings
from src.data.records import Record
from src.models.encoder import DropoutPolicy, sample_dropout
from src.models.fmt import FmtModel, FmtOutput
from src.utils.exceptions import ConfigError, ContractError

from .evaluation import evaluate, model_inputs
from .metrics import accuracy


@dataclass
class TrainResult:
    """Outcome of one training run."""

    model: FmtModel
    loss_log: List[float] = field(default_factory=list)
    train_accuracy: float = 0.0
    optimizer_state: Optional[AdamState] = None


def check_data_fits(model: FmtModel, records: Sequence[Record]) -> None:
    """Raise ConfigError when the records cannot be fed to the model."""
    image_dims = {len(r.image) for r in records if r.image is not None}
    if len(image_dims) > 1:
        raise ConfigError(f"records carry images of different lengths: {sorted(image_dims)}")
    image_dim = image_dims.pop() if image_dims else model.settings.image_dim
    tokens = [t for r in records if r.text is not None for t in r.text]
    vocab = max(tokens) + 1 if tokens else 0
    text_len = max((len(r.text) for r in records if r.text is not None), default=0)
    num_classes = max(r.label for r in records) + 1
    model.check_compatible(image_dim, vocab, text_len, num_classes)


def sample_loss(
    model: FmtModel,
    out: FmtOutput,
    label: int,
    aux_loss_weight: float = 0.0,
) -> Tensor:
    """Cross-entropy of the final head plus weighted per-task auxiliary losses."""
    loss = ops.cross_entropy(out.probs, label)
    if aux_loss_weight <= 0.0:
        return loss
    for slot, (task_out, head) in enumerate(zip(out.task_outputs, model.aux_heads)):
        if task_out is None:
            continue
        aux_probs = ops.softmax_rows(head(ops.rows(out.fused, [slot])))
        loss = ops.add(loss, ops.scale(ops.cross_entropy(aux_probs, label), aux_loss_weight))
    return loss


def train(
    model: FmtModel,
    records: Sequence[Record],
    config: Optional[TrainingSettings] = None,
    optimizer_state: Optional[AdamState] = None,
) -> TrainResult:
    """
    Train a model in place.

    Args:
        model: Model to optimize
        records: Training records
        config: Optimization settings (defaults to TrainingSettings())
        optimizer_state: Adam state to resume from

    Returns:
        TrainResult with the per-epoch mean loss and the final train accuracy
    """
    config = config or TrainingSettings()
    if not records:
        raise ContractError("train needs at least one record")
    check_data_fits(model, records)

    optimizer = Adam(
        model.named_parameters(),
        lr=config.lr,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.eps,
        state=optimizer_state,
    )
    policy = DropoutPolicy(p_drop=config.p_drop, rng_seed=config.seed)
    n = len(records)
    draw_index = 0
    loss_log: List[float] = []

    logger.info(
        f"Training {model.variant} on {n} records: epochs={config.epochs}, "
        f"batch_size={config.batch_size}, lr={config.lr}, p_drop={config.p_drop}"
    )
    epochs = tqdm(
        range(config.epochs),
        desc="Training",
        unit="epoch",
        disable=not config.show_progress,
    )
    for epoch in epochs:
        order = np.random.default_rng([config.seed, epoch]).permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            batch = [records[i] for i in order[start : start + config.batch_size]]
            with Tape() as tape:
                total: Optional[Tensor] = None
                for record in batch:
                    dropped = sample_dropout(
                        policy, record.has_image, record.has_text, draw_index=draw_index
                    )
                    draw_index += 1
                    image, tokens = model_inputs(record)
                    out = model(image, tokens, dropped=dropped)
                    loss = sample_loss(model, out, record.label, config.aux_loss_weight)
                    total = loss if total is None else ops.add(total, loss)
                batch_loss = ops.scale(total, 1.0 / len(batch))
                tape.backward(batch_loss)
            optimizer.step()
            optimizer.zero_grad()
            epoch_loss += batch_loss.item() * len(batch)
            logger.debug(f"epoch {epoch} batch@{start}: loss={batch_loss.item():.6f}")

        loss_log.append(epoch_loss / n)
        epochs.set_postfix(loss=f"{loss_log[-1]:.4f}")
        logger.info(f"Epoch {epoch}: loss={loss_log[-1]:.4f}")

    train_acc = accuracy(evaluate(model, records, max_workers=config.max_workers))
    logger.info(f"Training finished: train accuracy={train_acc:.4f}")
    return TrainResult(model, loss_log, train_acc, optimizer.state)
