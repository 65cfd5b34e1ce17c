"""
Modelos de saída da perda: diagnósticos por amostra e gradientes.
"""
import math
from typing import Dict, List, Optional

import numpy as np

CAMPOS_DIAGNOSTICO = (
    "theta_pos", "cos_pos", "cos_nn", "norm", "norm_hat",
    "cr", "cr_hat", "kappa", "g_angle", "g_add", "pct"
)


class PerSampleDiagnostics:
    """Diagnósticos de uma amostra do lote."""

    def __init__(
        self,
        theta_pos: float,
        cos_pos: float,
        cos_nn: float,
        norm: float,
        norm_hat: float,
        cr: float,
        cr_hat: float,
        kappa: float,
        g_angle: float,
        g_add: float,
        pct: float
    ):
        self.theta_pos = theta_pos
        self.cos_pos = cos_pos
        self.cos_nn = cos_nn
        self.norm = norm
        self.norm_hat = norm_hat
        self.cr = cr
        self.cr_hat = cr_hat
        self.kappa = kappa
        self.g_angle = g_angle
        self.g_add = g_add
        self.pct = pct

    def to_dict(self) -> dict:
        """Converte os diagnósticos para dicionário."""
        return {
            "theta_pos": self.theta_pos,
            "cos_pos": self.cos_pos,
            "cos_nn": self.cos_nn,
            "norm": self.norm,
            "norm_hat": self.norm_hat,
            "cr": self.cr,
            "cr_hat": self.cr_hat,
            "kappa": self.kappa,
            "g_angle": self.g_angle,
            "g_add": self.g_add,
            "pct": self.pct
        }


class ContextoPerda:
    """Intermediários do forward reutilizados pelo backward."""

    def __init__(
        self,
        unit_features: np.ndarray,
        norms: np.ndarray,
        probabilidades: np.ndarray,
        dpct_dcos: np.ndarray,
        labels: np.ndarray
    ):
        self.unit_features = unit_features
        self.norms = norms
        self.probabilidades = probabilidades
        self.dpct_dcos = dpct_dcos
        self.labels = labels


class LossOutput:
    """Perda média do lote, gradientes e diagnósticos por amostra."""

    def __init__(
        self,
        loss: float,
        per_sample_loss: np.ndarray,
        colunas: Dict[str, np.ndarray],
        contexto: Optional[ContextoPerda] = None,
        grad_features: Optional[np.ndarray] = None,
        grad_centers: Optional[np.ndarray] = None
    ):
        self.loss = loss
        self.per_sample_loss = per_sample_loss
        self.colunas = colunas
        self.contexto = contexto
        self.grad_features = grad_features
        self.grad_centers = grad_centers

    def coluna(self, campo: str) -> np.ndarray:
        """
        Extrai um campo dos diagnósticos como vetor.

        Raises:
            KeyError: Campo desconhecido ou não calculado neste forward
                (cos_nn, cr e cr_hat só existem quando a variante usa o CR
                ou quando os diagnósticos completos foram pedidos)
        """
        if campo not in CAMPOS_DIAGNOSTICO:
            raise KeyError(f"Campo de diagnóstico desconhecido: {campo}")
        if campo not in self.colunas:
            raise KeyError(f"Diagnóstico '{campo}' não calculado neste forward")
        return self.colunas[campo]

    @property
    def diagnostics(self) -> List[PerSampleDiagnostics]:
        """Diagnósticos por amostra; campos não calculados ficam como NaN."""
        tamanho = self.per_sample_loss.shape[0]
        return [
            PerSampleDiagnostics(**{
                campo: float(self.colunas[campo][b]) if campo in self.colunas else math.nan
                for campo in CAMPOS_DIAGNOSTICO
            })
            for b in range(tamanho)
        ]
