"""
Modelos de lote de embeddings e protótipos de classe.
"""
import numpy as np

from src.core.erros import EntradaInvalidaError


class ClassPrototypes:
    """Direções dos centros de classe (C linhas x D colunas)."""

    def __init__(self, centers):
        centers = np.array(centers, dtype=np.float64)
        if centers.ndim != 2:
            raise EntradaInvalidaError(f"Protótipos devem ser matriz 2-D, recebido {centers.shape}")
        if centers.shape[0] < 2:
            raise EntradaInvalidaError(f"São necessárias pelo menos 2 classes, recebido {centers.shape[0]}")
        self.centers = centers

    @property
    def num_classes(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def copia(self) -> 'ClassPrototypes':
        return ClassPrototypes(self.centers.copy())


class EmbeddingBatch:
    """Embeddings brutos (não normalizados) com rótulos de identidade."""

    def __init__(self, features, labels):
        features = np.array(features, dtype=np.float64)
        labels = np.array(labels, dtype=np.int64).reshape(-1)
        if features.ndim != 2:
            raise EntradaInvalidaError(f"Features devem ser matriz 2-D, recebido {features.shape}")
        if features.shape[0] < 1 or features.shape[1] < 2:
            raise EntradaInvalidaError(f"Lote requer B >= 1 e D >= 2, recebido {features.shape}")
        if labels.shape[0] != features.shape[0]:
            raise EntradaInvalidaError(
                f"Número de rótulos ({labels.shape[0]}) difere do número de amostras ({features.shape[0]})"
            )
        if not np.all(np.isfinite(features)):
            raise EntradaInvalidaError("Features contêm valores não finitos")
        self.features = features
        self.labels = labels

    @property
    def tamanho(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def validar_contra(self, protos: ClassPrototypes):
        """Verifica compatibilidade de dimensão e rótulos com os protótipos."""
        if protos.dim != self.dim:
            raise EntradaInvalidaError(
                f"Dimensão do embedding ({self.dim}) difere da dos protótipos ({protos.dim})"
            )
        if np.any(self.labels < 0) or np.any(self.labels >= protos.num_classes):
            raise EntradaInvalidaError(
                f"Rótulos fora de [0, {protos.num_classes})"
            )

    def permutar(self, ordem) -> 'EmbeddingBatch':
        """Retorna o lote com as linhas reordenadas."""
        ordem = np.asarray(ordem)
        return EmbeddingBatch(self.features[ordem], self.labels[ordem])
