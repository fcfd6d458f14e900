import logging
import time
from dataclasses import dataclass, field

import numpy as np

from nnet.optim import Adam
from sampling.windows import SampleLabel
from utils.errors import NonFiniteActivation, TrainingDiverged
from utils.helpers import make_rng


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 128
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be non-negative, got {self.learning_rate}")


@dataclass
class TrainResult:
    model: object
    history: list
    # Percentiles of per-window training MSE after the last epoch.
    score_percentiles: dict = field(default_factory=dict)
    seconds: float = 0.0


def train(model, train_set, config):
    """Fit ``model`` (a copy of it) to reconstruct ``train_set`` with Adam on MSE.

    The loss history holds one mean-squared-error value per epoch, averaged over
    every pixel of every window seen in that epoch.
    """
    if any(label is SampleLabel.ABNORMAL for label in train_set.labels()):
        raise ValueError("training set contains abnormal windows; the autoencoder only learns normal tows")
    if len(train_set) == 0:
        raise ValueError("training set is empty")

    model = model.copy()
    x = train_set.stack(model.dtype)
    n = len(x)
    pixels_per_window = int(np.prod(x.shape[1:]))
    optimizer = Adam(config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps)
    rng = make_rng(config.seed, 1)

    logging.info(
        "Training latent-%d CAE on %d windows: %d epochs, batch %d, lr %g.",
        model.latent_dim, n, config.epochs, config.batch_size, config.learning_rate,
    )
    started = time.perf_counter()
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        squared_error = 0.0
        for batch_index, start in enumerate(range(0, n, config.batch_size)):
            batch = x[order[start:start + config.batch_size]]
            try:
                reconstruction = model.forward(batch)
            except NonFiniteActivation as exc:
                raise TrainingDiverged(
                    f"non-finite activation at epoch {epoch}, batch {batch_index}: {exc.message}",
                    epoch=epoch, batch=batch_index,
                ) from exc
            diff = reconstruction - batch
            batch_error = float(np.sum(diff.astype(np.float64) ** 2))
            if not np.isfinite(batch_error):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch {batch_index}", epoch=epoch, batch=batch_index
                )
            squared_error += batch_error
            model.backward((2.0 / diff.size) * diff)
            optimizer.step(model)

        history.append(squared_error / (n * pixels_per_window))
        logging.info("Epoch %d/%d: mse %.6g", epoch + 1, config.epochs, history[-1])

    scores = model.reconstruction_errors(x)
    percentiles = {
        "p50": float(np.percentile(scores, 50)),
        "p99": float(np.percentile(scores, 99)),
        "p99.9": float(np.percentile(scores, 99.9)),
    }
    seconds = time.perf_counter() - started
    logging.info("Training finished in %.1fs; training-score percentiles %s", seconds, percentiles)
    return TrainResult(model, history, percentiles, seconds)
