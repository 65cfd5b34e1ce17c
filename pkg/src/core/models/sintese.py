"""
Modelos do gerador sintético de identidades e dos aumentos vetoriais.
"""
import math
from typing import List, Optional, Tuple

import numpy as np

from src.core.erros import ConfigInvalidaError


class SynthConfig:
    """Configuração do conjunto sintético de clusters de identidade."""

    def __init__(
        self,
        num_identities: int = 32,
        samples_per_identity: int = 64,
        input_dim: int = 96,
        quality_tiers: Optional[List[Tuple[float, float]]] = None,
        seed: int = 0
    ):
        self.num_identities = num_identities
        self.samples_per_identity = samples_per_identity
        self.input_dim = input_dim
        self.quality_tiers = [
            (float(f), float(s)) for f, s in (quality_tiers or [(0.5, 0.05), (0.5, 0.6)])
        ]
        self.seed = seed
        self.validar()

    def validar(self):
        if self.num_identities < 2:
            raise ConfigInvalidaError("num_identities deve ser >= 2", campo="sintese.num_identities")
        if self.samples_per_identity < 2:
            raise ConfigInvalidaError(
                "samples_per_identity deve ser >= 2", campo="sintese.samples_per_identity"
            )
        if self.input_dim < 4:
            raise ConfigInvalidaError("input_dim deve ser >= 4", campo="sintese.input_dim")
        if not self.quality_tiers:
            raise ConfigInvalidaError("Ao menos um nível de qualidade", campo="sintese.quality_tiers")
        for fracao, sigma in self.quality_tiers:
            if not 0.0 < fracao <= 1.0 or sigma < 0.0:
                raise ConfigInvalidaError(
                    f"Nível inválido ({fracao}, {sigma})", campo="sintese.quality_tiers"
                )
        total = math.fsum(f for f, _ in self.quality_tiers)
        if abs(total - 1.0) > 1e-9:
            raise ConfigInvalidaError(
                f"Frações dos níveis somam {total}, esperado 1", campo="sintese.quality_tiers"
            )

    def to_dict(self) -> dict:
        return {
            "num_identities": self.num_identities,
            "samples_per_identity": self.samples_per_identity,
            "input_dim": self.input_dim,
            "quality_tiers": [[f, s] for f, s in self.quality_tiers],
            "seed": self.seed
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'SynthConfig':
        padrao = cls()
        return cls(
            num_identities=int(data.get("num_identities", padrao.num_identities)),
            samples_per_identity=int(data.get("samples_per_identity", padrao.samples_per_identity)),
            input_dim=int(data.get("input_dim", padrao.input_dim)),
            quality_tiers=[tuple(t) for t in data.get("quality_tiers", padrao.quality_tiers)],
            seed=int(data.get("seed", padrao.seed))
        )


class SynthSample:
    """Amostra sintética; `true_quality` é o sigma do nível (nunca usado no treino)."""

    def __init__(self, input_vector, label: int, true_quality: float):
        self.input_vector = np.asarray(input_vector, dtype=np.float64)
        self.label = int(label)
        self.true_quality = float(true_quality)


class DatasetSintetico:
    """Conjunto de amostras em forma matricial."""

    def __init__(self, inputs, labels, true_quality, prototypes):
        self.inputs = np.asarray(inputs, dtype=np.float64)
        self.labels = np.asarray(labels, dtype=np.int64)
        self.true_quality = np.asarray(true_quality, dtype=np.float64)
        self.prototypes = np.asarray(prototypes, dtype=np.float64)

    @property
    def tamanho(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    @property
    def num_identities(self) -> int:
        return self.prototypes.shape[0]

    def amostra(self, indice: int) -> SynthSample:
        return SynthSample(self.inputs[indice], self.labels[indice], self.true_quality[indice])

    def indices_nivel(self, sigma: float) -> np.ndarray:
        """Índices das amostras cujo nível tem o sigma informado."""
        return np.flatnonzero(np.isclose(self.true_quality, sigma))


class AugmentConfig:
    """Probabilidades e magnitudes dos aumentos vetoriais."""

    def __init__(
        self,
        p_noise: float = 0.20,
        p_affine: float = 0.20,
        p_mask: float = 0.20,
        p_gray: float = 0.05,
        noise_weight_max: float = 0.5,
        noise_scale: float = 0.3,
        scale_jitter: float = 0.1,
        rotation_max: float = 0.26,
        translation_max: float = 0.05,
        mask_fraction_min: float = 0.1,
        mask_fraction_max: float = 0.3
    ):
        self.p_noise = p_noise
        self.p_affine = p_affine
        self.p_mask = p_mask
        self.p_gray = p_gray
        self.noise_weight_max = noise_weight_max
        self.noise_scale = noise_scale
        self.scale_jitter = scale_jitter
        self.rotation_max = rotation_max
        self.translation_max = translation_max
        self.mask_fraction_min = mask_fraction_min
        self.mask_fraction_max = mask_fraction_max
        self.validar()

    def validar(self):
        for nome in ("p_noise", "p_affine", "p_mask", "p_gray", "noise_weight_max"):
            valor = getattr(self, nome)
            if not 0.0 <= valor <= 1.0:
                raise ConfigInvalidaError(f"{nome} deve estar em [0, 1]", campo=f"aumento.{nome}")
        if not 0.0 <= self.mask_fraction_min <= self.mask_fraction_max <= 1.0:
            raise ConfigInvalidaError(
                "Frações de máscara devem satisfazer 0 <= min <= max <= 1",
                campo="aumento.mask_fraction_min"
            )
        for nome in ("noise_scale", "scale_jitter", "rotation_max", "translation_max"):
            if getattr(self, nome) < 0.0:
                raise ConfigInvalidaError(f"{nome} deve ser >= 0", campo=f"aumento.{nome}")

    @classmethod
    def desligado(cls) -> 'AugmentConfig':
        """Configuração sem nenhum aumento."""
        return cls(p_noise=0.0, p_affine=0.0, p_mask=0.0, p_gray=0.0)

    def to_dict(self) -> dict:
        return dict(vars(self))

    @classmethod
    def from_dict(cls, data: dict) -> 'AugmentConfig':
        dados = cls().to_dict()
        dados.update({k: float(v) for k, v in data.items() if k in dados})
        return cls(**dados)
