"""
Feedforward text classifier trained with Adam.

Layers are [input, 64, 128, 256, 512, C] with rectifier hidden units and a
logistic (C=2, one output unit) or softmax (C>2) output. Hidden activations
use inverted dropout during training. Adam uses beta1=0.9, beta2=0.999,
eps=1e-8. Early stopping watches validation loss and restores the best
epoch's parameters.
"""

import itertools
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from app.core.exceptions import DimensionMismatchError, NonFiniteLossError, SingleClassError
from app.models.config_models import DROPOUT_RATES, LEARNING_RATES, EmbeddingSource, TrainConfig
from app.models.report_models import EpochLog, TrainingLog
from app.utils.seeding import TRAIN_STREAM, SeedHelper

logger = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


class MLPModel:
    """Parameters and forward/backward passes of the feedforward classifier"""

    def __init__(
        self,
        weights: List[np.ndarray],
        biases: List[np.ndarray],
        classes: Sequence[str],
        feature_mean: Optional[np.ndarray] = None,
        feature_scale: Optional[np.ndarray] = None,
        train_config: Optional[TrainConfig] = None,
        embedding_source: Optional[EmbeddingSource] = None,
    ):
        self.weights = weights
        self.biases = biases
        self.classes = list(classes)
        self.feature_mean = feature_mean
        self.feature_scale = feature_scale
        self.train_config = train_config or TrainConfig()
        # walk settings and graph of the training vectors; None for models built in memory
        self.embedding_source = embedding_source

    @classmethod
    def initialize(
        cls,
        input_dim: int,
        classes: Sequence[str],
        hidden_layers: Sequence[int],
        rng: np.random.Generator,
        **kwargs,
    ) -> "MLPModel":
        """He-normal weights for rectifier layers, zero biases"""
        output_dim = 1 if len(classes) == 2 else len(classes)
        sizes = [input_dim, *hidden_layers, output_dim]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, classes, **kwargs)

    @property
    def layer_sizes(self) -> List[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_activation(self) -> str:
        return "sigmoid" if self.weights[-1].shape[1] == 1 else "softmax"

    @property
    def parameters(self) -> List[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy_parameters(self) -> Tuple[List[np.ndarray], List[np.ndarray]]:
        return [w.copy() for w in self.weights], [b.copy() for b in self.biases]

    def set_parameters(self, weights: List[np.ndarray], biases: List[np.ndarray]) -> None:
        self.weights = weights
        self.biases = biases

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters)

    def prepare(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise DimensionMismatchError(
                f"Expected vectors of dimension {self.input_dim}, got shape {X.shape}"
            )
        if self.feature_mean is not None:
            X = (X - self.feature_mean) / self.feature_scale
        return X

    def forward(
        self,
        X: np.ndarray,
        dropout: float = 0.0,
        rng: Optional[np.random.Generator] = None,
    ) -> Tuple[np.ndarray, List[np.ndarray], List[np.ndarray]]:
        """
        Returns (output probabilities, layer inputs, dropout-scaled masks)

        X must already be standardized. For the logistic output the
        probabilities have shape (N, 1).
        """
        activations = [X]
        masks = []
        a = X
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            z = a @ w + b
            mask = (z > 0).astype(np.float64)
            if dropout > 0.0:
                keep = rng.random(z.shape) >= dropout
                mask = mask * keep / (1.0 - dropout)
            a = z * mask
            masks.append(mask)
            activations.append(a)
        logits = a @ self.weights[-1] + self.biases[-1]
        activations.append(logits)
        if self.output_activation == "sigmoid":
            return _sigmoid(logits), activations, masks
        return _softmax(logits), activations, masks

    def loss(self, X: np.ndarray, y: np.ndarray) -> float:
        """Mean cross-entropy without dropout; X standardized, y class indices"""
        _, activations, _ = self.forward(X)
        return self._cross_entropy(activations[-1], y)

    def _cross_entropy(self, logits: np.ndarray, y: np.ndarray) -> float:
        if self.output_activation == "sigmoid":
            z = logits[:, 0]
            # log(1 + e^z) - y z, written to stay finite for large |z|
            return float(np.mean(np.logaddexp(0.0, z) - y * z))
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        return float(-np.mean(log_probs[np.arange(len(y)), y]))

    def gradients(
        self,
        X: np.ndarray,
        y: np.ndarray,
        dropout: float = 0.0,
        rng: Optional[np.random.Generator] = None,
    ) -> Tuple[float, List[np.ndarray], List[np.ndarray]]:
        """Loss and analytic gradients for every weight matrix and bias vector"""
        probs, activations, masks = self.forward(X, dropout, rng)
        n = X.shape[0]
        loss = self._cross_entropy(activations[-1], y)

        if self.output_activation == "sigmoid":
            delta = (probs - y.reshape(-1, 1)) / n
        else:
            delta = probs.copy()
            delta[np.arange(n), y] -= 1.0
            delta /= n

        grad_w: List[np.ndarray] = [None] * len(self.weights)
        grad_b: List[np.ndarray] = [None] * len(self.biases)
        for layer in range(len(self.weights) - 1, -1, -1):
            grad_w[layer] = activations[layer].T @ delta
            grad_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * masks[layer - 1]
        return loss, grad_w, grad_b

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        """(N, C) class scores; the logistic output is expanded to [1-p, p]"""
        probs, _, _ = self.forward(self.prepare(X))
        if self.output_activation == "sigmoid":
            return np.hstack([1.0 - probs, probs])
        return probs


class AdamOptimizer:
    def __init__(self, parameters: List[np.ndarray], learning_rate: float):
        self.learning_rate = learning_rate
        self.step_count = 0
        self.first = [np.zeros_like(p) for p in parameters]
        self.second = [np.zeros_like(p) for p in parameters]

    def step(self, parameters: List[np.ndarray], gradients: List[np.ndarray]) -> None:
        self.step_count += 1
        correction1 = 1.0 - ADAM_BETA1 ** self.step_count
        correction2 = 1.0 - ADAM_BETA2 ** self.step_count
        for param, grad, m, v in zip(parameters, gradients, self.first, self.second):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * grad
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * grad * grad
            param -= self.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + ADAM_EPSILON)


def stratified_validation_split(
    y: np.ndarray,
    fraction: float,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle within each class; returns (train indices, validation indices)"""
    validation = []
    training = []
    for label in np.unique(y):
        members = np.flatnonzero(y == label)
        members = members[rng.permutation(len(members))]
        take = int(round(fraction * len(members)))
        if take >= len(members):
            take = len(members) - 1
        validation.extend(members[:take].tolist())
        training.extend(members[take:].tolist())
    if not validation:
        # every class too small to spare one sample: borrow from the largest
        counts = np.bincount(y)
        donor = int(np.argmax(counts))
        candidates = [index for index in training if y[index] == donor]
        validation.append(candidates[0])
        training.remove(candidates[0])
    return np.sort(np.asarray(training, dtype=np.int64)), np.sort(np.asarray(validation, dtype=np.int64))


def encode_labels(labels: Sequence[str]) -> Tuple[List[str], np.ndarray]:
    classes = sorted(set(labels))
    index = {label: i for i, label in enumerate(classes)}
    return classes, np.asarray([index[label] for label in labels], dtype=np.int64)


def train_classifier(
    X: np.ndarray,
    labels: Sequence[str],
    config: TrainConfig,
) -> Tuple[MLPModel, TrainingLog]:
    """
    Train on labeled embeddings with a seeded validation hold-out

    Args:
        X: (N, D) embeddings
        labels: N class labels (opaque strings)
        config: training protocol

    Returns:
        The model at its best validation epoch and the per-epoch log
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(labels):
        raise DimensionMismatchError(f"Got {X.shape} embeddings for {len(labels)} labels")
    classes, y = encode_labels(labels)
    if len(classes) < 2:
        raise SingleClassError(f"Training data holds a single class {classes}; need at least two")

    rng = SeedHelper.rng(config.seed, TRAIN_STREAM)
    train_idx, val_idx = stratified_validation_split(y, config.validation_fraction, rng)

    mean = scale = None
    if config.standardize:
        mean = X[train_idx].mean(axis=0)
        scale = X[train_idx].std(axis=0)
        scale[scale < 1e-12] = 1.0

    model = MLPModel.initialize(
        X.shape[1], classes, config.hidden_layers, rng,
        feature_mean=mean, feature_scale=scale, train_config=config,
    )
    X_std = model.prepare(X)
    X_train, y_train = X_std[train_idx], y[train_idx]
    X_val, y_val = X_std[val_idx], y[val_idx]

    optimizer = AdamOptimizer(model.parameters, config.learning_rate)
    log = TrainingLog(
        learning_rate=config.learning_rate,
        dropout=config.dropout,
        class_counts=class_weights_summary(labels),
    )
    logger.info(f"Training on {len(train_idx)} vectors, validating on {len(val_idx)}; class counts {log.class_counts}")
    best = model.copy_parameters()
    stale_epochs = 0

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_idx))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            loss, grad_w, grad_b = model.gradients(X_train[batch], y_train[batch], config.dropout, rng)
            if not np.isfinite(loss):
                raise NonFiniteLossError(
                    f"Loss became {loss} at epoch {epoch}; try a smaller learning rate than {config.learning_rate}"
                )
            optimizer.step(model.parameters, [g for pair in zip(grad_w, grad_b) for g in pair])
            epoch_loss += loss * len(batch)

        val_loss = model.loss(X_val, y_val)
        if not np.isfinite(val_loss) or not model.is_finite():
            raise NonFiniteLossError(f"Validation loss became {val_loss} at epoch {epoch}")
        val_accuracy = float(np.mean(_argmax_classes(model, X_val) == y_val))
        log.epochs.append(EpochLog(
            epoch=epoch,
            train_loss=epoch_loss / len(order),
            val_loss=val_loss,
            val_accuracy=val_accuracy,
        ))

        if val_loss < log.best_val_loss:
            log.best_val_loss = val_loss
            log.best_epoch = epoch
            log.val_micro_f1 = val_accuracy
            best = model.copy_parameters()
            stale_epochs = 0
        else:
            stale_epochs += 1
            if stale_epochs >= config.patience:
                log.stopped_early = True
                logger.info(f"Early stopping at epoch {epoch}; best epoch {log.best_epoch}")
                break

    model.set_parameters(*best)
    logger.info(
        f"Trained classifier on {len(train_idx)} samples ({len(val_idx)} validation, {len(classes)} classes): "
        f"best val loss {log.best_val_loss:.4f} at epoch {log.best_epoch}"
    )
    return model, log


def _argmax_classes(model: MLPModel, X_std: np.ndarray) -> np.ndarray:
    probs, _, _ = model.forward(X_std)
    if model.output_activation == "sigmoid":
        return (probs[:, 0] >= 0.5).astype(np.int64)
    return np.argmax(probs, axis=1)


def predict(model: MLPModel, X: np.ndarray) -> Tuple[List[str], np.ndarray]:
    """
    Predicted labels and (N, C) per-class scores, dropout off

    The logistic output picks the second class when p >= 0.5, so an exact
    0.5 goes to the positive class.
    """
    scores = model.predict_scores(X)
    if model.output_activation == "sigmoid":
        indices = (scores[:, 1] >= 0.5).astype(np.int64)
    else:
        indices = np.argmax(scores, axis=1)
    return [model.classes[i] for i in indices], scores


def select_hyperparameters(
    X: np.ndarray,
    labels: Sequence[str],
    config: TrainConfig,
    learning_rates: Sequence[float] = LEARNING_RATES,
    dropouts: Sequence[float] = DROPOUT_RATES,
) -> Tuple[MLPModel, TrainingLog, List[TrainingLog]]:
    """Grid search over learning rate x dropout, keeping the best validation Micro-F1"""
    best: Optional[Tuple[MLPModel, TrainingLog]] = None
    trials: List[TrainingLog] = []
    for learning_rate, dropout in itertools.product(learning_rates, dropouts):
        trial_config = config.model_copy(update={"learning_rate": learning_rate, "dropout": dropout})
        try:
            model, log = train_classifier(X, labels, trial_config)
        except NonFiniteLossError as e:
            logger.warning(f"Skipping lr={learning_rate}, dropout={dropout}: {e}")
            continue
        trials.append(log)
        if best is None or (log.val_micro_f1, -log.best_val_loss) > (best[1].val_micro_f1, -best[1].best_val_loss):
            best = (model, log)
    if best is None:
        raise NonFiniteLossError("Every hyperparameter combination diverged")
    logger.info(
        f"Selected lr={best[1].learning_rate}, dropout={best[1].dropout} "
        f"(validation Micro-F1 {best[1].val_micro_f1:.4f}) from {len(trials)} trials"
    )
    return best[0], best[1], trials


class GradientCheckReport(BaseModel):
    max_relative_error: float
    max_absolute_error: float
    checked: int
    skipped: int


def gradient_check_report(
    model: MLPModel,
    X: np.ndarray,
    labels: Sequence[str],
    num_parameters: int = 100,
    step: float = 1e-5,
    seed: int = 0,
) -> GradientCheckReport:
    """
    Compare backpropagated gradients with central differences

    Parameters are sampled uniformly across all layers. A probe whose +/- step
    flips any rectifier on or off straddles a kink where the loss is not
    differentiable; such parameters are skipped and another one is drawn.
    """
    index = {label: i for i, label in enumerate(model.classes)}
    y = np.asarray([index[label] for label in labels], dtype=np.int64)
    X_std = model.prepare(X)

    _, grad_w, grad_b = model.gradients(X_std, y)
    analytic = [g for pair in zip(grad_w, grad_b) for g in pair]
    parameters = model.parameters
    sizes = [p.size for p in parameters]
    offsets = np.cumsum([0] + sizes)
    _, _, base_masks = model.forward(X_std)
    base_pattern = [mask > 0 for mask in base_masks]

    rng = np.random.default_rng(seed)
    candidates = rng.permutation(int(offsets[-1]))
    target = min(num_parameters, int(offsets[-1]))
    max_relative = 0.0
    max_absolute = 0.0
    checked = skipped = 0

    for flat in candidates:
        if checked >= target:
            break
        which = int(np.searchsorted(offsets, flat, side="right") - 1)
        position = np.unravel_index(int(flat - offsets[which]), parameters[which].shape)
        param = parameters[which]
        original = param[position]

        param[position] = original + step
        _, plus_acts, plus_masks = model.forward(X_std)
        loss_plus = model._cross_entropy(plus_acts[-1], y)
        param[position] = original - step
        _, minus_acts, minus_masks = model.forward(X_std)
        loss_minus = model._cross_entropy(minus_acts[-1], y)
        param[position] = original

        crosses_kink = any(
            not np.array_equal(mask > 0, base) for mask, base in zip(plus_masks + minus_masks, base_pattern * 2)
        )
        if crosses_kink:
            skipped += 1
            continue

        numeric = (loss_plus - loss_minus) / (2.0 * step)
        exact = float(analytic[which][position])
        absolute = abs(exact - numeric)
        relative = absolute / max(abs(exact) + abs(numeric), 1e-6)
        max_absolute = max(max_absolute, absolute)
        max_relative = max(max_relative, relative)
        checked += 1

    return GradientCheckReport(
        max_relative_error=max_relative,
        max_absolute_error=max_absolute,
        checked=checked,
        skipped=skipped,
    )


def gradient_check(model: MLPModel, X: np.ndarray, labels: Sequence[str], **kwargs) -> float:
    """Max relative error between analytic and finite-difference gradients"""
    return gradient_check_report(model, X, labels, **kwargs).max_relative_error


def class_weights_summary(labels: Sequence[str]) -> Dict[str, int]:
    classes, y = encode_labels(labels)
    return {label: int(count) for label, count in zip(classes, np.bincount(y, minlength=len(classes)))}
