"""
Modelos de treino: configuração, checkpoint e métricas por época.
"""
from typing import Dict, List, Optional

import numpy as np

from src.core.erros import ConfigInvalidaError
from src.core.models.estado_normalizador import NormalizerState
from src.core.models.margem import MarginConfig
from src.core.models.sintese import AugmentConfig


class TrainConfig:
    """Configuração do laço de SGD (forma do cronograma de treino em escala de mesa)."""

    def __init__(
        self,
        epochs: int = 30,
        batch_size: int = 256,
        lr: float = 0.1,
        weight_decay: float = 5e-4,
        momentum: float = 0.9,
        lr_drop_epochs: Optional[List[int]] = None,
        lr_drop_factor: float = 10.0,
        seed: int = 0,
        embedding_dim: int = 64,
        hidden_dim: Optional[int] = None,
        ema_momentum: float = 0.99,
        margin_config: Optional[MarginConfig] = None,
        augment_config: Optional[AugmentConfig] = None
    ):
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.weight_decay = weight_decay
        self.momentum = momentum
        self.lr_drop_epochs = list(lr_drop_epochs) if lr_drop_epochs is not None else [14, 23, 28]
        self.lr_drop_factor = lr_drop_factor
        self.seed = seed
        self.embedding_dim = embedding_dim
        self.hidden_dim = hidden_dim if hidden_dim is not None else 4 * embedding_dim
        self.ema_momentum = ema_momentum
        self.margin_config = margin_config or MarginConfig()
        self.augment_config = augment_config or AugmentConfig()
        self.validar()

    def validar(self):
        if self.epochs < 1:
            raise ConfigInvalidaError("epochs deve ser >= 1", campo="treino.epochs")
        if self.batch_size < 1:
            raise ConfigInvalidaError("batch_size deve ser >= 1", campo="treino.batch_size")
        if self.lr < 0:
            raise ConfigInvalidaError("lr deve ser >= 0", campo="treino.lr")
        if self.weight_decay < 0:
            raise ConfigInvalidaError("weight_decay deve ser >= 0", campo="treino.weight_decay")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigInvalidaError("momentum deve estar em [0, 1)", campo="treino.momentum")
        if self.lr_drop_factor <= 0:
            raise ConfigInvalidaError("lr_drop_factor deve ser > 0", campo="treino.lr_drop_factor")
        anteriores = [-1] + self.lr_drop_epochs
        for antes, depois in zip(anteriores, self.lr_drop_epochs):
            if depois <= antes or depois >= self.epochs:
                raise ConfigInvalidaError(
                    "lr_drop_epochs deve ser estritamente crescente e < epochs",
                    campo="treino.lr_drop_epochs"
                )
        if self.embedding_dim < 2:
            raise ConfigInvalidaError("embedding_dim deve ser >= 2", campo="treino.embedding_dim")
        if self.hidden_dim < 1:
            raise ConfigInvalidaError("hidden_dim deve ser >= 1", campo="treino.hidden_dim")
        if not 0.0 < self.ema_momentum < 1.0:
            raise ConfigInvalidaError("ema_momentum deve estar em (0, 1)", campo="treino.ema_momentum")

    def lr_da_epoca(self, epoca: int) -> float:
        """Taxa de aprendizado com as quedas aplicadas ao fim das épocas listadas."""
        quedas = sum(1 for e in self.lr_drop_epochs if epoca >= e)
        return self.lr / (self.lr_drop_factor ** quedas)

    def to_dict(self) -> dict:
        """Converte para dicionário (sem as seções de margem e aumento)."""
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "weight_decay": self.weight_decay,
            "momentum": self.momentum,
            "lr_drop_epochs": list(self.lr_drop_epochs),
            "lr_drop_factor": self.lr_drop_factor,
            "seed": self.seed,
            "embedding_dim": self.embedding_dim,
            "hidden_dim": self.hidden_dim,
            "ema_momentum": self.ema_momentum
        }

    @classmethod
    def from_dict(
        cls,
        data: dict,
        margin_config: Optional[MarginConfig] = None,
        augment_config: Optional[AugmentConfig] = None
    ) -> 'TrainConfig':
        padrao = cls()
        embedding_dim = int(data.get("embedding_dim", padrao.embedding_dim))
        hidden = data.get("hidden_dim")
        return cls(
            epochs=int(data.get("epochs", padrao.epochs)),
            batch_size=int(data.get("batch_size", padrao.batch_size)),
            lr=float(data.get("lr", padrao.lr)),
            weight_decay=float(data.get("weight_decay", padrao.weight_decay)),
            momentum=float(data.get("momentum", padrao.momentum)),
            lr_drop_epochs=[int(e) for e in data.get("lr_drop_epochs", padrao.lr_drop_epochs)],
            lr_drop_factor=float(data.get("lr_drop_factor", padrao.lr_drop_factor)),
            seed=int(data.get("seed", padrao.seed)),
            embedding_dim=embedding_dim,
            hidden_dim=int(hidden) if hidden is not None else None,
            ema_momentum=float(data.get("ema_momentum", padrao.ema_momentum)),
            margin_config=margin_config,
            augment_config=augment_config
        )


class Checkpoint:
    """Estado completo do treino, suficiente para retomar bit a bit."""

    def __init__(
        self,
        encoder: Dict[str, np.ndarray],
        prototipos: np.ndarray,
        velocidade: Dict[str, np.ndarray],
        stats: NormalizerState,
        epoca: int = 0,
        passo: int = 0,
        seed: int = 0
    ):
        self.encoder = encoder
        self.prototipos = prototipos
        self.velocidade = velocidade
        self.stats = stats
        self.epoca = epoca
        self.passo = passo
        self.seed = seed

    def arrays(self) -> Dict[str, np.ndarray]:
        """Todos os arrays do checkpoint com nomes estáveis."""
        dados = {f"encoder.{nome}": valor for nome, valor in self.encoder.items()}
        dados["prototipos"] = self.prototipos
        dados.update({f"velocidade.{nome}": valor for nome, valor in self.velocidade.items()})
        return dados

    def metadados(self) -> dict:
        return {
            "stats": self.stats.to_dict(),
            "epoca": self.epoca,
            "passo": self.passo,
            "seed": self.seed
        }

    @classmethod
    def from_partes(cls, arrays: Dict[str, np.ndarray], metadados: dict) -> 'Checkpoint':
        encoder = {
            nome.split(".", 1)[1]: valor for nome, valor in arrays.items()
            if nome.startswith("encoder.")
        }
        velocidade = {
            nome.split(".", 1)[1]: valor for nome, valor in arrays.items()
            if nome.startswith("velocidade.")
        }
        return cls(
            encoder=encoder,
            prototipos=arrays["prototipos"],
            velocidade=velocidade,
            stats=NormalizerState.from_dict(metadados["stats"]),
            epoca=int(metadados["epoca"]),
            passo=int(metadados["passo"]),
            seed=int(metadados["seed"])
        )

    def igual(self, outro: 'Checkpoint') -> bool:
        """Igualdade bit a bit de todos os arrays e metadados."""
        meus, deles = self.arrays(), outro.arrays()
        if meus.keys() != deles.keys() or self.metadados() != outro.metadados():
            return False
        return all(
            meus[nome].shape == deles[nome].shape
            and meus[nome].tobytes() == deles[nome].tobytes()
            for nome in meus
        )


class MetricaEpoca:
    """Linha do log de métricas de uma época."""

    def __init__(
        self,
        epoca: int,
        perda_media: float,
        norma_media: float,
        cr_medio: float,
        taxa_clamp: float,
        lr: float
    ):
        self.epoca = epoca
        self.perda_media = perda_media
        self.norma_media = norma_media
        self.cr_medio = cr_medio
        self.taxa_clamp = taxa_clamp
        self.lr = lr

    def to_dict(self) -> dict:
        return {
            "epoca": self.epoca,
            "perda_media": self.perda_media,
            "norma_media": self.norma_media,
            "cr_medio": self.cr_medio,
            "taxa_clamp": self.taxa_clamp,
            "lr": self.lr
        }
