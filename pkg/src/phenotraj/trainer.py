"""Self-supervised one-step forecasting: example construction, masked MSE,
Adam training loop with validation-based early stopping."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import Dataset, VitalSeries
from .encoder import EncoderConfig, TripletEncoder
from .errors import ConfigError, DataError, PhenotrajError
from .optim import AdamState, adam_step
from .preprocess import demographic_width, encode_demographics


class SkipSeries(PhenotrajError):
    """Raised when a series cannot yield a forecasting example."""


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 5e-4
    batch_size: int = 32
    samples_per_epoch: int = 10240
    patience: int = 5
    horizon: int = 1  # one-step forecasting is the only supported horizon
    max_epochs: int = 100
    val_fraction: float = 0.2
    seed: int = 0
    random_cut: bool = False

    def __post_init__(self):
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.samples_per_epoch < 1:
            raise ConfigError("samples_per_epoch must be >= 1")
        if self.horizon != 1:
            raise ConfigError(f"horizon must be 1, got {self.horizon}")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")


@dataclass(frozen=True)
class ForecastExample:
    """Inputs strictly before the cut instant; targets observed at the cut."""

    series_id: str
    feat: np.ndarray  # (n,) int64 feature codes
    times: np.ndarray  # (n,) hours
    values: np.ndarray  # (n,) standardized values
    target: np.ndarray  # (7,)
    mask: np.ndarray  # (7,) 1 where the target feature was observed
    demo: np.ndarray


def make_example(
    series: VitalSeries,
    demo: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
    random_cut: bool = False,
) -> ForecastExample:
    """Split one series into (past triplets, next-instant target).

    The cut is the last distinct timestamp, or a random non-first one when
    random_cut is set. Raises SkipSeries when fewer than 2 distinct
    timestamps exist.
    """
    feat, times, values = series.arrays()
    distinct = np.unique(times)
    if len(distinct) < 2:
        raise SkipSeries(
            f"series {series.series_id}: needs 2 distinct timestamps,"
            f" has {len(distinct)}"
        )
    if random_cut:
        if rng is None:
            raise ConfigError("make_example: random_cut requires an rng")
        cut = float(distinct[rng.integers(1, len(distinct))])
    else:
        cut = float(distinct[-1])

    before = times < cut
    at_cut = times == cut
    n_features = 7
    target = np.zeros(n_features)
    mask = np.zeros(n_features)
    for f, v in zip(feat[at_cut], values[at_cut]):
        target[f] = v
        mask[f] = 1.0
    return ForecastExample(
        series_id=series.series_id,
        feat=feat[before],
        times=times[before],
        values=values[before],
        target=target,
        mask=mask,
        demo=np.zeros(0) if demo is None else np.asarray(demo, dtype=np.float64),
    )


def masked_loss(pred: np.ndarray, target: np.ndarray, mask: np.ndarray) -> float:
    """Mean squared error over the observed target features only."""
    mask = np.asarray(mask, dtype=np.float64)
    total = mask.sum()
    if total == 0:
        raise DataError("masked_loss: mask has no observed features")
    diff = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return float((mask * diff * diff).sum() / total)


def batched_masked_loss(pred: Tensor, targets: np.ndarray, masks: np.ndarray) -> Tensor:
    """Mean over examples of the per-example masked MSE, as a graph node."""
    counts = masks.sum(axis=1)
    if np.any(counts == 0):
        raise DataError("batched_masked_loss: an example has an all-zero mask")
    weights = masks / counts[:, None] / len(masks)
    return ad.reduce_sum(ad.mul(ad.squared_error(pred, Tensor(targets)), Tensor(weights)))


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class TrainResult:
    encoder: TripletEncoder
    history: list[EpochStats]
    best_epoch: int
    best_val_loss: float


def write_history(path: Union[str, Path], history: Sequence[EpochStats]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "val_loss"])
        for row in history:
            writer.writerow([row.epoch, repr(row.train_loss), repr(row.val_loss)])


def _collect_examples(
    series_list: Sequence[VitalSeries], dataset: Dataset
) -> list[ForecastExample]:
    out = []
    for s in series_list:
        demo = encode_demographics(s.demographics, dataset.ward_vocab)
        try:
            out.append(make_example(s, demo=demo))
        except SkipSeries:
            continue
    return out


def _pad_batch(
    examples: Sequence[ForecastExample],
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    width = max(len(e.feat) for e in examples)
    b = len(examples)
    feat = np.zeros((b, width), dtype=np.int64)
    times = np.zeros((b, width))
    values = np.zeros((b, width))
    pad = np.ones((b, width), dtype=bool)
    demo = np.stack([e.demo for e in examples])
    for i, e in enumerate(examples):
        n = len(e.feat)
        feat[i, :n] = e.feat
        times[i, :n] = e.times
        values[i, :n] = e.values
        pad[i, :n] = False
    return feat, times, values, pad, demo


class Trainer:
    def __init__(
        self,
        dataset: Dataset,
        config: TrainConfig = TrainConfig(),
        encoder: Optional[TripletEncoder] = None,
        encoder_config: Optional[EncoderConfig] = None,
    ):
        self.dataset = dataset
        self.config = config
        width = demographic_width(dataset.ward_vocab)
        if encoder is None:
            encoder_config = encoder_config or EncoderConfig(demo_width=width)
            encoder = TripletEncoder(encoder_config, seed=config.seed)
        if encoder.config.demo_width != width:
            raise ConfigError(
                f"encoder demo_width {encoder.config.demo_width} does not match"
                f" the dataset's demographic width {width}"
            )
        self.encoder = encoder

        self.train_examples = _collect_examples(dataset.train_series, dataset)
        self.val_examples = _collect_examples(dataset.val_series, dataset)
        if not self.train_examples:
            raise DataError("no trainable series in the training split")
        if not self.val_examples:
            raise DataError("no usable series in the validation split")
        # batches pad to their longest member, so keep similar lengths together
        self.val_examples.sort(key=lambda e: len(e.feat))

    def _forward_loss(
        self,
        examples: Sequence[ForecastExample],
        training: bool,
        rng: Optional[np.random.Generator],
    ) -> Tensor:
        feat, times, values, pad, demo = _pad_batch(examples)
        enc = self.encoder.encode_batch(
            feat, times, values, pad, demo, training=training, rng=rng
        )
        pred = self.encoder.forecast_batch(enc)
        targets = np.stack([e.target for e in examples])
        masks = np.stack([e.mask for e in examples])
        return batched_masked_loss(pred, targets, masks)

    def _validation_loss(self) -> float:
        """Mean masked loss over the validation examples, evaluation mode."""
        total = 0.0
        bs = self.config.batch_size
        with ad.no_grad():
            for start in range(0, len(self.val_examples), bs):
                chunk = self.val_examples[start : start + bs]
                loss = self._forward_loss(chunk, training=False, rng=None)
                total += float(loss.data) * len(chunk)
        return total / len(self.val_examples)

    def fit(self) -> TrainResult:
        cfg = self.config
        seq = np.random.SeedSequence(cfg.seed)
        sample_rng, dropout_rng = [np.random.default_rng(s) for s in seq.spawn(2)]
        params = self.encoder.params
        state = AdamState(lr=cfg.lr)

        best_val = np.inf
        best_epoch = 0
        best_snapshot = {k: t.data.copy() for k, t in params.items()}
        streak = 0
        history: list[EpochStats] = []

        for epoch in range(1, cfg.max_epochs + 1):
            order = sample_rng.integers(0, len(self.train_examples),
                                        size=cfg.samples_per_epoch)
            # padding is pure overhead and attention cost grows with the square
            # of the padded length, so batch similarly sized examples together
            order = sorted(order.tolist(), key=lambda i: len(self.train_examples[i].feat))
            running = 0.0
            for start in range(0, len(order), cfg.batch_size):
                batch = [self.train_examples[i] for i in order[start : start + cfg.batch_size]]
                loss = self._forward_loss(batch, training=True, rng=dropout_rng)
                ad.zero_grad(params.values())
                ad.backward(loss)
                adam_step(params, state)
                running += float(loss.data) * len(batch)
            train_loss = running / len(order)

            val_loss = self._validation_loss()
            history.append(EpochStats(epoch, train_loss, val_loss))

            if val_loss < best_val:
                best_val = val_loss
                best_epoch = epoch
                best_snapshot = {k: t.data.copy() for k, t in params.items()}
                streak = 0
            else:
                streak += 1
                if streak >= cfg.patience:
                    break

        for name, arr in best_snapshot.items():
            params[name].data[...] = arr
        return TrainResult(
            encoder=self.encoder,
            history=history,
            best_epoch=best_epoch,
            best_val_loss=float(best_val),
        )


def fit(
    dataset: Dataset,
    config: TrainConfig = TrainConfig(),
    encoder: Optional[TripletEncoder] = None,
    encoder_config: Optional[EncoderConfig] = None,
) -> TrainResult:
    return Trainer(dataset, config, encoder, encoder_config).fit()
