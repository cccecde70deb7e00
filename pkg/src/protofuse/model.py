"""Full model assembly and the ablation-variant factory."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import MODALITIES, Batch, Config
from .diffcore import Module, RngState, Tensor
from .dmr import BackboneTrace, GatedBackbone
from .encoders import ModalityEncoder
from .errors import ConfigError
from .objectives import AuxHead, LossBreakdown, aux_loss_from_predictions, div_loss, reg_loss, total_loss
from .pcs import ModalityScorer, select_and_fuse, uniform_fuse
from .spb import CrossAttentionExtractor, PrototypeBank, extract, mean_pool_fallback


@dataclass
class ModelOutput:
    prediction: Tensor  # (B,)
    aux: Tensor  # (B, K)
    alpha: Tensor  # (B, K, 3)
    fused: Tensor  # (B, K, d)
    responses: tuple  # (Z^t, Z^a, Z^v), each (B, K, d)
    trace: BackboneTrace

    @property
    def gates(self):
        return self.trace.gates


class PrototypeSentimentModel(Module):
    def __init__(self, config: Config, widths: dict):
        variant = config.variant
        self.config = config
        self.variant = variant
        self.widths = {m: int(widths[m]) for m in MODALITIES}
        dtype = np.dtype(config.dtype)
        rng = RngState(config.seed).generator(RngState.INIT)
        c = config
        p = c.dropout

        self.encoders = {
            m: ModalityEncoder(m, self.widths[m], c.d, c.heads, rng, ffn_mult=c.ffn_mult,
                               max_len=c.max_len, positions=c.encoder_positions, p=p, dtype=dtype)
            for m in MODALITIES
        }
        if c.no_shared_proto:
            self.banks = {m: PrototypeBank(c.K, c.d, rng, dtype) for m in MODALITIES}
        else:
            shared = PrototypeBank(c.K, c.d, rng, dtype)
            self.banks = {m: shared for m in MODALITIES}
        self.extractors = None
        if not c.no_spb:
            self.extractors = {
                m: CrossAttentionExtractor(c.d, c.heads, rng, ffn_mult=c.ffn_mult, p=p, dtype=dtype)
                for m in MODALITIES
            }
        self.scorer = None if c.no_selection else ModalityScorer(c.d, rng, dtype)
        self.backbone = GatedBackbone(
            c.d, c.heads, c.layers, c.K, rng, ffn_mult=c.ffn_mult, p=p,
            gated=not c.no_dmr_gates, fine_path=not c.no_fine_path, dtype=dtype,
        )
        self.aux_head = AuxHead(c.d, c.K, rng, per_slot=c.per_slot_aux, dtype=dtype)

    @property
    def shared_bank(self) -> bool:
        b = self.banks
        return b["text"] is b["audio"] is b["visual"]

    @property
    def dtype(self):
        return np.dtype(self.config.dtype)

    def distinct_banks(self):
        seen = []
        for m in MODALITIES:
            if all(self.banks[m] is not b for b in seen):
                seen.append(self.banks[m])
        return seen

    def encode(self, batch: Batch, training=False, rng=None):
        return {
            m: self.encoders[m](batch.features[m].astype(self.dtype, copy=False),
                                batch.masks[m], training, rng)
            for m in MODALITIES
        }

    def responses(self, encoded, training=False, rng=None):
        if self.extractors is None:
            return tuple(mean_pool_fallback(encoded[m], self.config.K) for m in MODALITIES)
        return tuple(
            extract(self.banks[m], encoded[m], self.extractors[m], training, rng)
            for m in MODALITIES
        )

    def select(self, responses):
        if self.scorer is None:
            return uniform_fuse(responses)
        return select_and_fuse(responses, [self.banks[m].M for m in MODALITIES], self.scorer)

    def forward(self, batch: Batch, training=False, rng=None) -> ModelOutput:
        encoded = self.encode(batch, training, rng)
        responses = self.responses(encoded, training, rng)
        selection = self.select(responses)
        tokens = self.backbone.tokens(selection.fused, responses)
        trace = self.backbone(tokens, training, rng)
        aux = self.aux_head(selection.fused)
        return ModelOutput(trace.prediction, aux, selection.alpha, selection.fused, responses, trace)

    __call__ = forward

    def diversity(self) -> Tensor:
        banks = self.distinct_banks()
        total = div_loss(banks[0])
        for bank in banks[1:]:
            total = total + div_loss(bank)
        return total * (1.0 / len(banks)) if len(banks) > 1 else total

    def loss(self, batch: Batch, training=False, rng=None) -> tuple[Tensor, LossBreakdown, ModelOutput]:
        out = self.forward(batch, training, rng)
        y = batch.labels.astype(self.dtype, copy=False)
        l_reg = reg_loss(out.prediction, y)
        l_aux = aux_loss_from_predictions(out.aux, y)
        l_div = self.diversity()
        total, breakdown = total_loss(l_reg, l_aux, l_div, self.config.lambda_aux, self.config.lambda_div)
        return total, breakdown, out


def build_variant(config: Config, widths: dict) -> PrototypeSentimentModel:
    """Model for whichever single ablation flag ``config`` sets (or the full model)."""
    active = config.active_ablations
    if len(active) > 1:
        raise ConfigError(f"ablations run one at a time; got {', '.join(active)}")
    return PrototypeSentimentModel(config, widths)


def block_parameter_counts(config: Config) -> dict:
    """Closed-form parameter counts of the swappable pieces."""
    d, K, L, f = config.d, config.K, config.layers, config.ffn_mult * config.d
    attn = 4 * (d * d + d)
    ffn = d * f + f + f * d + d
    return {
        "extractor": attn + 2 * (2 * d) + ffn,
        "scorer": 2 * d * d + d + d + 1,
        "bank": K * d,
        "fine_positions": 3 * K * d,
        "gates": L * (3 * d + 3),
    }


def predicted_parameter_delta(config: Config, variant: str) -> int:
    """Parameter count of ``variant`` minus that of the full model."""
    n = block_parameter_counts(config)
    return {
        "full": 0,
        "no_spb": -3 * n["extractor"],
        "no_selection": -n["scorer"],
        "no_fine_path": -n["fine_positions"] - n["gates"],
        "no_dmr_gates": -n["gates"],
        "no_shared_proto": 2 * n["bank"],
    }[variant]


def run_inference(model: PrototypeSentimentModel, samples, batch_size=256):
    """Evaluation-mode forward over ``samples`` in order. Returns a dict of
    arrays: prediction (N,), alpha (N, K, 3), gates (N, L, 3)."""
    from .dataio import collate
    from .diffcore import no_grad

    preds, alphas, gates = [], [], []
    with no_grad():
        for start in range(0, len(samples), batch_size):
            batch = collate(samples[start : start + batch_size], model.dtype)
            out = model.forward(batch, training=False)
            preds.append(out.prediction.data.astype(np.float64))
            alphas.append(out.alpha.data.astype(np.float64))
            if out.gates:
                gates.append(np.stack([g.data for g in out.gates], axis=1).astype(np.float64))
            else:
                gates.append(np.zeros((len(batch), 0, 3)))
    if not preds:
        K = model.config.K
        return {"prediction": np.zeros(0), "alpha": np.zeros((0, K, 3)), "gates": np.zeros((0, 0, 3))}
    return {
        "prediction": np.concatenate(preds),
        "alpha": np.concatenate(alphas),
        "gates": np.concatenate(gates),
    }


def predict_samples(model: PrototypeSentimentModel, samples, batch_size=256) -> np.ndarray:
    return run_inference(model, samples, batch_size)["prediction"]


def model_from_checkpoint(ckpt) -> PrototypeSentimentModel:
    from .trainer.checkpoint import load_model_state

    model = build_variant(ckpt.config, ckpt.widths)
    load_model_state(model, ckpt.params)
    return model
