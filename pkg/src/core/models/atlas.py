"""
Modelos do atlas de gradientes: configuração do corte angular e campos.
"""
import math
from typing import Dict, Optional, Tuple

import numpy as np

from src.core.erros import ConfigInvalidaError
from src.core.models.estado_normalizador import NormalizerState
from src.core.models.margem import MarginConfig, Variante

SNAPSHOTS_PADRAO = {
    "inicio": (0.8, 0.2),
    "meio": (2.5, 1.0),
    "fim": (6.0, 2.0)
}


class AtlasConfig:
    """
    Corte 2-D entre o centro positivo W_i e o negativo W_j.

    Os centros ficam em ±angle_between_centers/2 em torno do eixo x. O eixo
    angular cobre [−α, α] e o radial vai do menor ao maior valor de
    feature_norm_values. Cada snapshot é um par (μ_CR, σ_CR) combinado com
    (mu_z, sigma_z) num estado congelado.
    """

    def __init__(
        self,
        grid_resolution: int = 256,
        angle_between_centers: float = math.pi / 3,
        feature_norm_values: Optional[list] = None,
        mu_z: float = 21.0,
        sigma_z: float = 6.0,
        snapshots: Optional[Dict[str, Tuple[float, float]]] = None,
        margin_config_fun: Optional[MarginConfig] = None,
        margin_config_ada: Optional[MarginConfig] = None
    ):
        self.grid_resolution = grid_resolution
        self.angle_between_centers = angle_between_centers
        self.feature_norm_values = (
            [float(v) for v in feature_norm_values] if feature_norm_values is not None
            else [2.0, 40.0]
        )
        self.mu_z = mu_z
        self.sigma_z = sigma_z
        self.snapshots = {
            nome: (float(par[0]), float(par[1]))
            for nome, par in (snapshots if snapshots is not None else SNAPSHOTS_PADRAO).items()
        }
        self.margin_config_fun = margin_config_fun or MarginConfig(variant=Variante.FUNFACE)
        self.margin_config_ada = margin_config_ada or self.margin_config_fun.com(
            variant=Variante.ADAFACE
        )
        self.validar()

    def validar(self):
        if self.grid_resolution < 16:
            raise ConfigInvalidaError("grid_resolution deve ser >= 16", campo="atlas.grid_resolution")
        if not 0.0 < self.angle_between_centers < math.pi:
            raise ConfigInvalidaError(
                "angle_between_centers deve estar em (0, π)", campo="atlas.angle_between_centers"
            )
        if not self.feature_norm_values or min(self.feature_norm_values) <= 0:
            raise ConfigInvalidaError(
                "feature_norm_values deve conter normas > 0", campo="atlas.feature_norm_values"
            )
        if self.sigma_z < 0:
            raise ConfigInvalidaError("sigma_z deve ser >= 0", campo="atlas.sigma_z")
        if not self.snapshots:
            raise ConfigInvalidaError("ao menos um snapshot é necessário", campo="atlas.snapshots")
        for nome, (_, sigma_cr) in self.snapshots.items():
            if sigma_cr < 0:
                raise ConfigInvalidaError(
                    f"sigma_cr do snapshot '{nome}' deve ser >= 0", campo=f"atlas.snapshots.{nome}"
                )
        fun, ada = self.margin_config_fun, self.margin_config_ada
        if fun.variant != Variante.FUNFACE or ada.variant != Variante.ADAFACE:
            raise ConfigInvalidaError(
                "o atlas compara FunFace com AdaFace", campo="atlas.margin_config"
            )
        if (fun.m, fun.s, fun.h) != (ada.m, ada.s, ada.h):
            raise ConfigInvalidaError(
                "FunFace e AdaFace devem compartilhar m, s e h", campo="atlas.margin_config"
            )

    def estado(self, snapshot: str) -> NormalizerState:
        """Estado congelado do snapshot pedido."""
        mu_cr, sigma_cr = self.snapshots[snapshot]
        return NormalizerState.congelado(self.mu_z, self.sigma_z, mu_cr, sigma_cr)

    def to_dict(self) -> dict:
        return {
            "grid_resolution": self.grid_resolution,
            "angle_between_centers": self.angle_between_centers,
            "feature_norm_values": list(self.feature_norm_values),
            "mu_z": self.mu_z,
            "sigma_z": self.sigma_z,
            "snapshots": {nome: list(par) for nome, par in self.snapshots.items()}
        }

    @classmethod
    def from_dict(cls, data: dict, margin_config: Optional[MarginConfig] = None) -> 'AtlasConfig':
        """A seção de margem do RunConfig define m, s, h e λ do lado FunFace."""
        padrao = cls()
        base = margin_config or MarginConfig()
        return cls(
            grid_resolution=int(data.get("grid_resolution", padrao.grid_resolution)),
            angle_between_centers=float(
                data.get("angle_between_centers", padrao.angle_between_centers)
            ),
            feature_norm_values=data.get("feature_norm_values", padrao.feature_norm_values),
            mu_z=float(data.get("mu_z", padrao.mu_z)),
            sigma_z=float(data.get("sigma_z", padrao.sigma_z)),
            snapshots=data.get("snapshots", padrao.snapshots),
            margin_config_fun=base.com(variant=Variante.FUNFACE),
            margin_config_ada=base.com(variant=Variante.ADAFACE)
        )


class GradientField:
    """Grade de escalas de gradiente (linhas = norma, colunas = ângulo)."""

    def __init__(self, x, y, scale, on_b0, on_b1, pct=None):
        self.x = np.asarray(x)
        self.y = np.asarray(y)
        self.scale = np.asarray(scale)
        self.on_b0 = np.asarray(on_b0, dtype=bool)
        self.on_b1 = np.asarray(on_b1, dtype=bool)
        # PCT da variante em cada célula
        self.pct = None if pct is None else np.asarray(pct)

    def boundary_b0(self) -> np.ndarray:
        """Pontos (x, y) da fronteira sem margem."""
        return np.stack([self.x[self.on_b0], self.y[self.on_b0]], axis=1)

    def boundary_b1(self) -> np.ndarray:
        """Pontos (x, y) da fronteira após a margem."""
        return np.stack([self.x[self.on_b1], self.y[self.on_b1]], axis=1)


class MapaDiferenca:
    """Campos FunFace e AdaFace de um snapshot e a diferença Fun − Ada."""

    def __init__(self, snapshot: str, fun: GradientField, ada: GradientField, faixa):
        self.snapshot = snapshot
        self.fun = fun
        self.ada = ada
        self.diff = fun.scale - ada.scale
        self.faixa = np.asarray(faixa, dtype=bool)

    @property
    def media_faixa(self) -> Optional[float]:
        """Média de Fun − Ada na faixa entre B0 e B1 (None se vazia)."""
        if not self.faixa.any():
            return None
        return float(np.mean(self.diff[self.faixa]))

    @property
    def angulo_medio_b1(self) -> Optional[float]:
        """Ângulo médio (rad) dos pontos de B1 em relação à bissetriz B0."""
        pontos = self.fun.boundary_b1()
        if pontos.shape[0] == 0:
            return None
        return float(np.mean(np.arctan2(pontos[:, 1], pontos[:, 0])))

    def resumo(self) -> dict:
        return {
            "snapshot": self.snapshot,
            "media_faixa": self.media_faixa,
            "celulas_faixa": int(np.sum(self.faixa)),
            "celulas_b0": int(self.fun.boundary_b0().shape[0]),
            "celulas_b1": int(self.fun.boundary_b1().shape[0]),
            "angulo_medio_b1": self.angulo_medio_b1,
            "max_abs_diff": float(np.max(np.abs(self.diff)))
        }
