"""
Serviço do atlas de gradientes.

A escala do gradiente num ponto é |∂L/∂cos θ_i| com os termos de adaptação
congelados, calculada numa fatia 2-D entre o centro positivo W_i e o
negativo mais próximo W_j.
"""
import logging
from typing import Dict, Optional

import numpy as np

from src.core.erros import EntradaInvalidaError
from src.core.models.atlas import AtlasConfig, GradientField, MapaDiferenca
from src.core.models.estado_normalizador import NormalizerState
from src.core.models.lote import ClassPrototypes, EmbeddingBatch
from src.core.models.margem import MarginConfig
from src.core.services import margem_service as margem

logger = logging.getLogger(__name__)

COLUNAS_CSV = ["x", "y", "scale_fun", "scale_ada", "diff", "on_b0", "on_b1"]


def gradient_scale(
    ponto,
    protos: ClassPrototypes,
    config: MarginConfig,
    stats: Optional[NormalizerState]
) -> float:
    """
    |∂L/∂cos θ_i| de um único embedding.

    Args:
        ponto: Embedding bruto no plano da fatia
        protos: Exatamente dois centros (positivo na linha 0)
        config: Configuração da perda
        stats: Snapshot congelado do normalizador

    Returns:
        float: Escala do gradiente (>= 0)
    """
    if protos.num_classes != 2:
        raise EntradaInvalidaError("gradient_scale requer exatamente dois protótipos")
    ponto = np.asarray(ponto, dtype=np.float64).reshape(1, -1)
    if not np.linalg.norm(ponto) > 0.0:
        raise EntradaInvalidaError("Ponto coincide com a origem")
    batch = EmbeddingBatch(ponto, np.zeros(1, dtype=np.int64))
    saida = margem.margin_loss_forward(batch, protos, config, stats)
    # ∂L/∂cos_i da perda média de um lote unitário
    return float(abs(margem.gradiente_cossenos(saida, config)[0, 0]))


def escalas(
    cos_i: np.ndarray,
    cos_j: np.ndarray,
    norms: np.ndarray,
    config: MarginConfig,
    stats: Optional[NormalizerState]
) -> tuple:
    """
    Versão vetorizada de gradient_scale sobre cossenos já conhecidos.

    Returns:
        tuple: (escala, pct) com a forma de cos_i
    """
    termos = margem.termos_adaptacao(cos_i, cos_j, norms, config, stats)
    cos_i = np.clip(np.asarray(cos_i, dtype=np.float64), -1.0, 1.0)
    pct, dpct = margem.pct_com_derivada(
        cos_i, np.arccos(cos_i), config, termos["g_angle"], termos["g_add"]
    )
    logit_pos = config.s * pct
    logit_neg = config.s * cos_j
    # 1 − p_i = p_j
    p_neg = np.exp(logit_neg - np.logaddexp(logit_pos, logit_neg))
    return np.abs(config.s * p_neg * dpct), pct


def grade(atlas: AtlasConfig) -> Dict[str, np.ndarray]:
    """
    Coordenadas da fatia.

    Linhas seguem a norma e colunas seguem o ângulo φ em torno do eixo x
    (células centradas em [−α, α]).
    """
    alfa = atlas.angle_between_centers
    n = atlas.grid_resolution
    passo = 2.0 * alfa / n
    phi = -alfa + passo * (np.arange(n) + 0.5)
    raios = np.linspace(min(atlas.feature_norm_values), max(atlas.feature_norm_values), n)
    raio, angulo = np.meshgrid(raios, phi, indexing="ij")
    return {
        "raio": raio,
        "phi": angulo,
        "passo": passo,
        "x": raio * np.cos(angulo),
        "y": raio * np.sin(angulo),
        "cos_i": np.cos(angulo - alfa / 2.0),
        "cos_j": np.cos(angulo + alfa / 2.0)
    }


def prototipos_fatia(atlas: AtlasConfig) -> ClassPrototypes:
    """W_i em +α/2 e W_j em −α/2 no plano."""
    meio = atlas.angle_between_centers / 2.0
    return ClassPrototypes(np.array([
        [np.cos(meio), np.sin(meio)],
        [np.cos(-meio), np.sin(-meio)]
    ]))


def _fronteira_b1(diferenca: np.ndarray) -> np.ndarray:
    # célula de menor |d| em cada troca de sinal ao longo do eixo angular
    marcado = np.zeros(diferenca.shape, dtype=bool)
    sinal = np.sign(diferenca)
    linhas, colunas = np.nonzero(sinal[:, :-1] != sinal[:, 1:])
    escolha = np.where(
        np.abs(diferenca[linhas, colunas]) <= np.abs(diferenca[linhas, colunas + 1]),
        colunas, colunas + 1
    )
    marcado[linhas, escolha] = True
    return marcado


def campo(
    atlas: AtlasConfig,
    config: MarginConfig,
    stats: NormalizerState,
    coords=None,
    pct_fun: Optional[np.ndarray] = None
) -> GradientField:
    """
    Campo de escalas de uma variante com as fronteiras B0 e B1.

    B1 é sempre a da margem FunFace. `pct_fun` reaproveita o PCT FunFace já
    calculado na mesma grade; sem ele, o PCT é calculado aqui (uma única vez
    quando `config` já é a margem FunFace do atlas).
    """
    coords = coords if coords is not None else grade(atlas)
    escala, pct = escalas(coords["cos_i"], coords["cos_j"], coords["raio"], config, stats)
    if pct_fun is None:
        if config.to_dict() == atlas.margin_config_fun.to_dict():
            pct_fun = pct
        else:
            _, pct_fun = escalas(
                coords["cos_i"], coords["cos_j"], coords["raio"], atlas.margin_config_fun, stats
            )
    on_b0 = np.abs(coords["phi"]) <= coords["passo"] / 2.0 + 1e-12
    on_b1 = _fronteira_b1(pct_fun - coords["cos_j"])
    return GradientField(coords["x"], coords["y"], escala, on_b0, on_b1, pct=pct)


def difference_map(atlas: AtlasConfig) -> Dict[str, MapaDiferenca]:
    """
    Campos FunFace, AdaFace e a diferença Fun − Ada para cada snapshot.

    A faixa entre B0 e B1 é a região do lado positivo de B0 (cos θ_i > cos θ_j)
    onde o termo positivo com margem FunFace ainda perde para o negativo.
    """
    coords = grade(atlas)
    mapas = {}
    for nome in atlas.snapshots:
        stats = atlas.estado(nome)
        fun = campo(atlas, atlas.margin_config_fun, stats, coords)
        ada = campo(atlas, atlas.margin_config_ada, stats, coords, pct_fun=fun.pct)
        faixa = (coords["cos_i"] > coords["cos_j"]) & (fun.pct < coords["cos_j"])
        mapa = MapaDiferenca(nome, fun, ada, faixa)
        logger.info(
            f"Atlas '{nome}': média Fun−Ada na faixa B0–B1 = {mapa.media_faixa} "
            f"({int(faixa.sum())} células, {mapa.fun.boundary_b1().shape[0]} em B1)"
        )
        mapas[nome] = mapa
    return mapas


def linhas_csv(mapa: MapaDiferenca):
    """Linhas (x, y, scale_fun, scale_ada, diff, on_b0, on_b1) em ordem de linha."""
    fun, ada = mapa.fun, mapa.ada
    return zip(
        fun.x.ravel(), fun.y.ravel(), fun.scale.ravel(), ada.scale.ravel(),
        mapa.diff.ravel(), fun.on_b0.ravel(), fun.on_b1.ravel()
    )

