"""Triplet-series encoder with a forecasting head.

A series of (time, feature, value) triplets is embedded per triplet as
lookup(feature) + FFN(value) + FFN(time), contextualized by a stack of
self-attention blocks, and fused into one vector by learned attention
weights; demographics pass through their own small FFN. The two vectors
concatenate into the series encoding. No positional encoding exists
anywhere, so triplet order never affects the result.

All forward paths run through one batched implementation; padded positions
are excluded with additive -inf masks in every softmax.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import FeatureKind, VitalSeries
from .errors import ConfigError, DataError, ShapeError
from .params_io import load_params, save_params

O2_INDEX = int(FeatureKind.O2_SUPPLEMENT)


@dataclass(frozen=True)
class EncoderConfig:
    demo_width: int
    d_var: int = 40
    d_stat: int = 10
    num_blocks: int = 2
    num_heads: int = 4
    dropout: float = 0.2
    max_len: int = 60
    n_features: int = 7
    # raw hour values would saturate the tanh in the time FFN; times are
    # divided by this before embedding (one week = 1.0)
    time_scale_hours: float = 168.0

    def __post_init__(self):
        if self.demo_width < 1:
            raise ConfigError(f"demo_width must be >= 1, got {self.demo_width}")
        if self.d_var < 1 or self.d_stat < 1:
            raise ConfigError("d_var and d_stat must be >= 1")
        if self.d_var % self.num_heads != 0:
            raise ConfigError(
                f"d_var ({self.d_var}) must be divisible by"
                f" num_heads ({self.num_heads})"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if self.time_scale_hours <= 0:
            raise ConfigError("time_scale_hours must be > 0")

    @property
    def d(self) -> int:
        return self.d_var + self.d_stat

    @property
    def head_dim(self) -> int:
        return self.d_var // self.num_heads

    @property
    def cve_hidden(self) -> int:
        return int(math.floor(math.sqrt(self.d_var)))


@dataclass(frozen=True)
class Encoding:
    """Fixed-length series encoding: e_e is exactly concat(e_t, e_d)."""

    e_t: np.ndarray
    e_d: np.ndarray
    e_e: np.ndarray


class TripletEncoder:
    def __init__(self, config: EncoderConfig, seed: int = 0):
        self.config = config
        self.params: dict[str, Tensor] = {}
        self._init_params(np.random.default_rng(seed))

    # -- parameters ---------------------------------------------------------

    def _glorot(self, rng: np.random.Generator, fan_in: int, fan_out: int,
                shape: tuple[int, ...]) -> np.ndarray:
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=shape)

    def _init_params(self, rng: np.random.Generator) -> None:
        cfg = self.config
        p = self.params

        def weight(name: str, fan_in: int, fan_out: int) -> None:
            p[name] = ad.parameter(self._glorot(rng, fan_in, fan_out, (fan_in, fan_out)))

        def bias(name: str, width: int) -> None:
            p[name] = ad.parameter(np.zeros(width))

        p["feature_table"] = ad.parameter(
            self._glorot(rng, cfg.n_features, cfg.d_var, (cfg.n_features, cfg.d_var))
        )
        for prefix in ("cve_value", "cve_time"):
            weight(f"{prefix}.w1", 1, cfg.cve_hidden)
            bias(f"{prefix}.b1", cfg.cve_hidden)
            weight(f"{prefix}.w2", cfg.cve_hidden, cfg.d_var)
            bias(f"{prefix}.b2", cfg.d_var)
        for i in range(cfg.num_blocks):
            for proj in ("wq", "wk", "wv", "wo"):
                weight(f"block{i}.{proj}", cfg.d_var, cfg.d_var)
            for proj in ("bq", "bk", "bv", "bo"):
                bias(f"block{i}.{proj}", cfg.d_var)
            p[f"block{i}.ln1_gain"] = ad.parameter(np.ones(cfg.d_var))
            bias(f"block{i}.ln1_bias", cfg.d_var)
            weight(f"block{i}.ffn_w1", cfg.d_var, 2 * cfg.d_var)
            bias(f"block{i}.ffn_b1", 2 * cfg.d_var)
            weight(f"block{i}.ffn_w2", 2 * cfg.d_var, cfg.d_var)
            bias(f"block{i}.ffn_b2", cfg.d_var)
            p[f"block{i}.ln2_gain"] = ad.parameter(np.ones(cfg.d_var))
            bias(f"block{i}.ln2_bias", cfg.d_var)
        weight("fusion.w1", cfg.d_var, cfg.cve_hidden)
        bias("fusion.b1", cfg.cve_hidden)
        weight("fusion.w2", cfg.cve_hidden, 1)
        bias("fusion.b2", 1)
        weight("demo.w1", cfg.demo_width, 2 * cfg.d_stat)
        bias("demo.b1", 2 * cfg.d_stat)
        weight("demo.w2", 2 * cfg.d_stat, cfg.d_stat)
        bias("demo.b2", cfg.d_stat)
        weight("demo.w3", cfg.d_stat, cfg.d_stat)
        bias("demo.b3", cfg.d_stat)
        weight("head.w", cfg.d, cfg.n_features)
        bias("head.b", cfg.n_features)

    # -- batched forward ----------------------------------------------------

    def _linear(self, x: Tensor, name: str) -> Tensor:
        return ad.add(ad.matmul(x, self.params[f"{name}.w"]), self.params[f"{name}.b"])

    def embed_triplets_batch(
        self, feat: np.ndarray, times: np.ndarray, values: np.ndarray
    ) -> Tensor:
        """(B, n) arrays -> (B, n, d_var) triplet embeddings."""
        cfg = self.config
        if feat.shape != times.shape or feat.shape != values.shape:
            raise ShapeError(
                f"embed_triplets: mismatched shapes {feat.shape}, {times.shape},"
                f" {values.shape}"
            )
        if feat.ndim != 2 or feat.shape[1] == 0:
            raise DataError("embed_triplets: empty series")
        if feat.shape[1] > cfg.n_features * cfg.max_len:
            raise DataError(
                f"embed_triplets: {feat.shape[1]} triplets exceeds the"
                f" {cfg.n_features * cfg.max_len} supported maximum"
            )
        p = self.params
        e_f = ad.embedding_lookup(p["feature_table"], feat)
        scaled_t = times / cfg.time_scale_hours

        def cve(raw: np.ndarray, prefix: str) -> Tensor:
            col = Tensor(raw[:, :, None])
            h = ad.tanh(ad.add(ad.matmul(col, p[f"{prefix}.w1"]), p[f"{prefix}.b1"]))
            return ad.add(ad.matmul(h, p[f"{prefix}.w2"]), p[f"{prefix}.b2"])

        e_v = cve(values, "cve_value")
        e_t = cve(scaled_t, "cve_time")
        return ad.add(ad.add(e_f, e_v), e_t)

    def contextualize_batch(
        self,
        embeddings: Tensor,
        pad: Optional[np.ndarray] = None,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        """Self-attention blocks over (B, n, d_var); pad marks unused slots."""
        cfg = self.config
        b, n, _ = embeddings.shape
        key_mask = None
        if pad is not None:
            if pad.shape != (b, n):
                raise ShapeError(
                    f"contextualize: pad shape {pad.shape} vs batch ({b}, {n})"
                )
            # -inf on padded keys, broadcast over heads and query positions
            key_mask = np.where(pad, -np.inf, 0.0)[:, None, None, :]
        x = embeddings
        for i in range(cfg.num_blocks):
            x = self._block(x, f"block{i}", key_mask, training, rng)
        return x

    def _block(
        self,
        x: Tensor,
        prefix: str,
        key_mask: Optional[np.ndarray],
        training: bool,
        rng: Optional[np.random.Generator],
    ) -> Tensor:
        cfg = self.config
        p = self.params
        b, n, d = x.shape

        def proj(tag: str) -> Tensor:
            y = ad.add(ad.matmul(x, p[f"{prefix}.w{tag}"]), p[f"{prefix}.b{tag}"])
            y = ad.reshape(y, (b, n, cfg.num_heads, cfg.head_dim))
            return ad.transpose(y, (0, 2, 1, 3))

        q, k, v = proj("q"), proj("k"), proj("v")
        scores = ad.scale(
            ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))),
            1.0 / math.sqrt(cfg.head_dim),
        )
        weights = ad.softmax(scores, axis=-1, mask=key_mask)
        weights = ad.dropout(weights, cfg.dropout, training, rng)
        heads = ad.matmul(weights, v)
        merged = ad.reshape(ad.transpose(heads, (0, 2, 1, 3)), (b, n, d))
        attended = ad.add(ad.matmul(merged, p[f"{prefix}.wo"]), p[f"{prefix}.bo"])
        x = ad.layer_norm(
            ad.add(x, attended), p[f"{prefix}.ln1_gain"], p[f"{prefix}.ln1_bias"]
        )
        hidden = ad.relu(
            ad.add(ad.matmul(x, p[f"{prefix}.ffn_w1"]), p[f"{prefix}.ffn_b1"])
        )
        out = ad.add(ad.matmul(hidden, p[f"{prefix}.ffn_w2"]), p[f"{prefix}.ffn_b2"])
        out = ad.dropout(out, cfg.dropout, training, rng)
        return ad.layer_norm(
            ad.add(x, out), p[f"{prefix}.ln2_gain"], p[f"{prefix}.ln2_bias"]
        )

    def fuse_batch(self, contextual: Tensor, pad: Optional[np.ndarray] = None) -> Tensor:
        """Attention-weighted sum over positions: (B, n, d_var) -> (B, d_var)."""
        p = self.params
        b, n, d = contextual.shape
        hidden = ad.tanh(
            ad.add(ad.matmul(contextual, p["fusion.w1"]), p["fusion.b1"])
        )
        scores = ad.add(ad.matmul(hidden, p["fusion.w2"]), p["fusion.b2"])
        scores = ad.reshape(scores, (b, n))
        mask = None if pad is None else np.where(pad, -np.inf, 0.0)
        alpha = ad.softmax(scores, axis=-1, mask=mask)
        fused = ad.matmul(ad.reshape(alpha, (b, 1, n)), contextual)
        return ad.reshape(fused, (b, d))

    def embed_demographics_batch(self, demo: Union[np.ndarray, Tensor]) -> Tensor:
        cfg = self.config
        x = ad.as_tensor(demo)
        if x.ndim != 2 or x.shape[1] != cfg.demo_width:
            raise ShapeError(
                f"embed_demographics: input shape {x.shape} vs"
                f" expected (batch, {cfg.demo_width})"
            )
        p = self.params
        h1 = ad.tanh(ad.add(ad.matmul(x, p["demo.w1"]), p["demo.b1"]))
        h2 = ad.tanh(ad.add(ad.matmul(h1, p["demo.w2"]), p["demo.b2"]))
        return ad.add(ad.matmul(h2, p["demo.w3"]), p["demo.b3"])

    def encode_batch(
        self,
        feat: np.ndarray,
        times: np.ndarray,
        values: np.ndarray,
        pad: Optional[np.ndarray],
        demo: np.ndarray,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        """Full batched path to the (B, d) series encodings."""
        e = self.embed_triplets_batch(feat, times, values)
        c = self.contextualize_batch(e, pad, training, rng)
        e_t = self.fuse_batch(c, pad)
        e_d = self.embed_demographics_batch(demo)
        return ad.concat([e_t, e_d], axis=1)

    def forecast_batch(self, encoding: Union[Tensor, np.ndarray]) -> Tensor:
        """Linear head; sigmoid only on the supplemental-oxygen output."""
        cfg = self.config
        z = ad.add(ad.matmul(ad.as_tensor(encoding), self.params["head.w"]),
                   self.params["head.b"])
        gate = np.zeros(cfg.n_features)
        if O2_INDEX < cfg.n_features:
            gate[O2_INDEX] = 1.0
        return ad.add(ad.mul(z, Tensor(1.0 - gate)), ad.mul(ad.sigmoid(z), Tensor(gate)))

    # -- single-series wrappers --------------------------------------------

    def _series_arrays(
        self, series: VitalSeries
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        feat, times, values = series.arrays()
        if feat.size == 0:
            raise DataError(f"series {series.series_id}: no triplets to encode")
        return feat[None, :], times[None, :], values[None, :]

    def embed_triplets(self, series: VitalSeries) -> Tensor:
        feat, times, values = self._series_arrays(series)
        out = self.embed_triplets_batch(feat, times, values)
        return ad.reshape(out, out.shape[1:])

    def contextualize(
        self,
        embeddings: Tensor,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        if embeddings.ndim != 2:
            raise ShapeError(
                f"contextualize: expected (n, d_var), got {embeddings.shape}"
            )
        batched = ad.reshape(embeddings, (1,) + embeddings.shape)
        out = self.contextualize_batch(batched, None, training, rng)
        return ad.reshape(out, out.shape[1:])

    def fuse(self, contextual: Tensor) -> Tensor:
        if contextual.ndim != 2:
            raise ShapeError(f"fuse: expected (n, d_var), got {contextual.shape}")
        out = self.fuse_batch(ad.reshape(contextual, (1,) + contextual.shape))
        return ad.reshape(out, (out.shape[1],))

    def embed_demographics(self, demo: np.ndarray) -> Tensor:
        demo = np.asarray(demo, dtype=np.float64)
        if demo.ndim != 1:
            raise ShapeError(f"embed_demographics: expected a vector, got {demo.shape}")
        out = self.embed_demographics_batch(demo[None, :])
        return ad.reshape(out, (out.shape[1],))

    def encode(self, series: VitalSeries, demo: np.ndarray) -> Encoding:
        """Evaluation-mode encoding of one series, as plain arrays."""
        feat, times, values = self._series_arrays(series)
        demo = np.asarray(demo, dtype=np.float64)
        e_e = self.encode_batch(feat, times, values, None, demo[None, :]).data[0]
        d_var = self.config.d_var
        return Encoding(
            e_t=e_e[:d_var].copy(), e_d=e_e[d_var:].copy(), e_e=e_e.copy()
        )

    def forecast(self, encoding: np.ndarray) -> np.ndarray:
        encoding = np.asarray(encoding, dtype=np.float64)
        if encoding.ndim != 1 or encoding.shape[0] != self.config.d:
            raise ShapeError(
                f"forecast: expected a {self.config.d}-vector, got {encoding.shape}"
            )
        return self.forecast_batch(encoding[None, :]).data[0].copy()

    # -- persistence --------------------------------------------------------

    def save(self, path: Union[str, Path]) -> None:
        save_params(path, self.params, meta=asdict(self.config))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "TripletEncoder":
        arrays, meta = load_params(path)
        try:
            config = EncoderConfig(**meta)
        except (TypeError, ConfigError) as exc:
            raise DataError(f"{path}: invalid encoder config in header: {exc}")
        encoder = cls(config, seed=0)
        if set(arrays) != set(encoder.params):
            missing = set(encoder.params) - set(arrays)
            extra = set(arrays) - set(encoder.params)
            raise DataError(
                f"{path}: parameter names do not match config"
                f" (missing {sorted(missing)}, unexpected {sorted(extra)})"
            )
        for name, arr in arrays.items():
            if arr.shape != encoder.params[name].data.shape:
                raise DataError(
                    f"{path}: parameter {name!r} has shape {arr.shape},"
                    f" config implies {encoder.params[name].data.shape}"
                )
            encoder.params[name] = ad.parameter(arr)
        return encoder
