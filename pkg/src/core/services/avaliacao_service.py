"""
Serviço de avaliação biométrica: verificação, identificação, curvas EDC e
mapas de densidade norma × utilidade.

Toda comparação usa similaridade de cosseno entre embeddings normalizados.
Um par é aceito quando score > limiar.
"""
import logging
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from src.core.erros import AlvoInatingivelError, EntradaInvalidaError
from src.core.models.avaliacao import (
    EDCCurve,
    MapaDensidade,
    PairProtocol,
    ResultadoIdentificacao,
    ResultadoVerificacao,
)
from src.core.models.estado_normalizador import NormalizerState
from src.core.models.lote import ClassPrototypes, EmbeddingBatch
from src.core.models.margem import MarginConfig
from src.core.services import estatisticas_service as estatisticas
from src.core.services import margem_service as margem

logger = logging.getLogger(__name__)

MODO_MELHOR_LIMIAR = "best-threshold"
MODO_TAR_FAR = "tar-at-far"


def normalizar_linhas(embeddings) -> np.ndarray:
    """Normaliza cada embedding para norma unitária."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2:
        raise EntradaInvalidaError(f"Embeddings devem ser 2-D, recebido {embeddings.shape}")
    normas = np.linalg.norm(embeddings, axis=1)
    zeros = np.flatnonzero(~(normas > 0.0))
    if zeros.size:
        raise EntradaInvalidaError(f"Embedding com norma zero na amostra {int(zeros[0])}")
    return embeddings / normas[:, None]


def similaridades_pares(embeddings, protocolo: PairProtocol) -> np.ndarray:
    """Cosseno de cada par do protocolo."""
    unit = normalizar_linhas(embeddings)
    protocolo.validar(unit.shape[0])
    return np.einsum("ij,ij->i", unit[protocolo.index_a], unit[protocolo.index_b])


def varredura_acuracia(scores, mated) -> Tuple[np.ndarray, np.ndarray]:
    """
    Acurácia para cada limiar candidato.

    Candidatos: pontos médios entre scores distintos adjacentes mais um
    limiar abaixo do mínimo e outro acima do máximo.

    Returns:
        Tuple[np.ndarray, np.ndarray]: Limiares e acurácias correspondentes
    """
    scores = np.asarray(scores, dtype=np.float64)
    mated = np.asarray(mated, dtype=bool)
    distintos = np.unique(scores)
    limiares = np.concatenate([
        [distintos[0] - 1.0],
        (distintos[:-1] + distintos[1:]) / 2.0,
        [distintos[-1] + 1.0]
    ])
    s_mated = np.sort(scores[mated])
    s_nao = np.sort(scores[~mated])
    aceitos = s_mated.size - np.searchsorted(s_mated, limiares, side="right")
    rejeitados = np.searchsorted(s_nao, limiares, side="right")
    return limiares, (aceitos + rejeitados) / scores.size


def limiar_por_far(scores_nao_mated, alvo: float) -> Optional[float]:
    """
    Menor score cuja taxa de não-mated acima dele é ≤ alvo.

    Returns:
        Optional[float]: O limiar, ou None se alvo < 1/#não-mated
    """
    ordenados = np.sort(np.asarray(scores_nao_mated, dtype=np.float64))
    total = ordenados.size
    if total == 0:
        raise EntradaInvalidaError("Nenhum par não-mated para fixar o limiar")
    if alvo < 1.0 / total:
        return None
    permitidos = int(np.floor(alvo * total + 1e-9))
    if permitidos >= total:
        return float(ordenados[0])
    return float(ordenados[total - permitidos - 1])


def verify(
    embeddings,
    protocolo: PairProtocol,
    modo: str = MODO_MELHOR_LIMIAR,
    far_targets: Sequence[float] = (1e-3, 1e-2, 1e-1)
) -> ResultadoVerificacao:
    """
    Avaliação de verificação 1:1.

    Args:
        embeddings: Matriz N×D de embeddings (normalizados internamente)
        protocolo: Pares a comparar
        modo: "best-threshold" ou "tar-at-far"
        far_targets: Alvos de FAR para o modo tar-at-far

    Returns:
        ResultadoVerificacao: Acurácia e limiar, ou lista de TAR por alvo
    """
    scores = similaridades_pares(embeddings, protocolo)
    mated = protocolo.mated

    if modo == MODO_MELHOR_LIMIAR:
        limiares, acuracias = varredura_acuracia(scores, mated)
        melhor = int(np.argmax(acuracias))
        return ResultadoVerificacao(
            modo=modo, acuracia=float(acuracias[melhor]), limiar=float(limiares[melhor])
        )

    if modo != MODO_TAR_FAR:
        raise EntradaInvalidaError(f"Modo de verificação desconhecido: {modo}")

    s_mated = scores[mated]
    s_nao = scores[~mated]
    linhas = []
    for alvo in sorted(float(a) for a in far_targets):
        limiar = limiar_por_far(s_nao, alvo)
        if limiar is None:
            logger.warning(
                f"FAR {alvo:g} inatingível com {s_nao.size} pares não-mated "
                f"(mínimo {1.0 / s_nao.size:g})"
            )
            linhas.append({"far": alvo, "atingivel": False, "limiar": None, "tar": None})
            continue
        linhas.append({
            "far": alvo,
            "atingivel": True,
            "limiar": limiar,
            "tar": float(np.mean(s_mated > limiar))
        })
    return ResultadoVerificacao(modo=modo, tar_por_far=linhas)


def identify(
    probe_embeddings,
    probe_labels,
    gallery_embeddings,
    gallery_labels,
    ranks: Iterable[int] = (1, 5)
) -> ResultadoIdentificacao:
    """
    Identificação 1:N em nível de identidade.

    A galeria é reduzida ao melhor score por identidade. Empates ficam com a
    identidade de menor índice. Sondas cuja identidade não está na galeria
    são excluídas e contadas.
    """
    galeria = normalizar_linhas(gallery_embeddings)
    sondas = normalizar_linhas(probe_embeddings)
    gallery_labels = np.asarray(gallery_labels, dtype=np.int64)
    probe_labels = np.asarray(probe_labels, dtype=np.int64)
    if galeria.shape[0] == 0:
        raise EntradaInvalidaError("Galeria vazia")
    if galeria.shape[1] != sondas.shape[1]:
        raise EntradaInvalidaError("Sondas e galeria com dimensões diferentes")
    ranks = sorted(set(int(r) for r in ranks))
    if not ranks or ranks[0] < 1:
        raise EntradaInvalidaError("Ranks devem ser inteiros >= 1")

    identidades = np.unique(gallery_labels)
    similaridades = sondas @ galeria.T
    melhores = np.stack(
        [similaridades[:, gallery_labels == ident].max(axis=1) for ident in identidades],
        axis=1
    )

    presentes = np.isin(probe_labels, identidades)
    excluidos = int(np.sum(~presentes))
    if excluidos:
        logger.warning(f"{excluidos} sondas sem identidade na galeria foram excluídas")
    melhores = melhores[presentes]
    verdadeiros = np.searchsorted(identidades, probe_labels[presentes])

    score_certo = melhores[np.arange(melhores.shape[0]), verdadeiros]
    acima = np.sum(melhores > score_certo[:, None], axis=1)
    empatados_antes = np.sum(
        (melhores == score_certo[:, None])
        & (np.arange(identidades.size)[None, :] < verdadeiros[:, None]),
        axis=1
    )
    posicao = acima + empatados_antes

    avaliados = int(posicao.size)
    taxas = {
        r: (float(np.mean(posicao < r)) if avaliados else 0.0)
        for r in ranks
    }
    return ResultadoIdentificacao(taxas=taxas, excluidos=excluidos, avaliados=avaliados)


def edc(
    embeddings,
    protocolo: PairProtocol,
    quality_scores,
    fmr_target: float,
    discard_fractions: Sequence[float],
    quality_source: str = "external"
) -> EDCCurve:
    """
    Curva erro-versus-descarte.

    O limiar é fixado uma vez no conjunto completo para o FMR alvo. Para cada
    fração f são descartadas floor(f·N) amostras de menor qualidade (empate:
    menor índice primeiro) e o FNMR é recalculado nos pares mated restantes.
    """
    unit = normalizar_linhas(embeddings)
    qualidade = np.asarray(quality_scores, dtype=np.float64).reshape(-1)
    if qualidade.size != unit.shape[0]:
        raise EntradaInvalidaError(
            f"{qualidade.size} escores de qualidade para {unit.shape[0]} amostras"
        )
    if not np.all(np.isfinite(qualidade)):
        raise EntradaInvalidaError("Escores de qualidade não finitos")
    fracoes = [float(f) for f in discard_fractions]
    if any(f < 0.0 or f >= 1.0 for f in fracoes) or any(
        b <= a for a, b in zip(fracoes, fracoes[1:])
    ):
        raise EntradaInvalidaError("Frações de descarte devem ser crescentes em [0, 1)")

    scores = similaridades_pares(unit, protocolo)
    limiar = limiar_por_far(scores[~protocolo.mated], fmr_target)
    if limiar is None:
        raise AlvoInatingivelError(
            f"FMR {fmr_target:g} inatingível com {int(np.sum(~protocolo.mated))} pares não-mated"
        )

    total = qualidade.size
    ordem_descarte = np.lexsort((np.arange(total), qualidade))
    usadas, fnmrs = [], []
    truncado = False
    for fracao in fracoes:
        vivos = np.ones(total, dtype=bool)
        vivos[ordem_descarte[:int(np.floor(fracao * total + 1e-9))]] = False
        restantes = protocolo.mated & vivos[protocolo.index_a] & vivos[protocolo.index_b]
        if not restantes.any():
            logger.warning(f"Curva EDC truncada em {fracao:.0%}: nenhum par mated restante")
            truncado = True
            break
        usadas.append(fracao)
        fnmrs.append(float(np.mean(scores[restantes] <= limiar)))

    return EDCCurve(
        fmr_target=fmr_target,
        discard_fractions=usadas,
        fnmr_values=fnmrs,
        quality_source=quality_source,
        limiar=limiar,
        truncado=truncado
    )


def qualidade_cr(embeddings, labels, protos: ClassPrototypes, epsilon: float) -> np.ndarray:
    """CR de cada amostra contra os protótipos treinados."""
    cos, _ = margem.cosine_logits(EmbeddingBatch(embeddings, labels), protos)
    cos_pos = cos[np.arange(cos.shape[0]), np.asarray(labels)]
    cos_nn = margem.cos_vizinho_negativo(cos, np.asarray(labels))
    return np.asarray(estatisticas.certainty_ratio(cos_pos, cos_nn, epsilon))


def norm_utility_map(
    embeddings,
    labels,
    protos: ClassPrototypes,
    stats: Optional[NormalizerState],
    config: MarginConfig,
    bins: Tuple[int, int] = (20, 20),
    legado: bool = False
) -> MapaDensidade:
    """
    Pares (‖z‖, CR) por amostra e histograma 2-D para gráfico externo.

    Args:
        embeddings: Embeddings brutos N×D
        labels: Identidade de cada amostra
        protos: Protótipos do checkpoint
        stats: Estado EMA usado para ẑ e ĈR (None → zeros)
        config: Fornece epsilon e h
        bins: Número de faixas (norma, CR)
        legado: Usa a forma original do CR em vez da forma limitada
    """
    labels = np.asarray(labels, dtype=np.int64)
    cos, norms = margem.cosine_logits(EmbeddingBatch(embeddings, labels), protos)
    linhas = np.arange(cos.shape[0])
    cos_pos = cos[linhas, labels]
    cos_nn = margem.cos_vizinho_negativo(cos, labels)
    calcular = estatisticas.certainty_ratio_legacy if legado else estatisticas.certainty_ratio
    crs = np.asarray(calcular(cos_pos, cos_nn, config.epsilon))

    histograma, bordas_norma, bordas_cr = np.histogram2d(norms, crs, bins=bins)
    return MapaDensidade(
        norms=norms,
        crs=crs,
        norm_hat=np.asarray(estatisticas.normalizar_norma(stats, norms, config.h)),
        cr_hat=np.asarray(estatisticas.normalizar_cr(stats, crs, config.h)),
        histograma=histograma,
        bordas_norma=bordas_norma,
        bordas_cr=bordas_cr
    )


def protocolo_todos_pares(labels, indices=None) -> PairProtocol:
    """
    Todos os pares i < j entre as amostras indicadas (padrão: todas).
    """
    labels = np.asarray(labels, dtype=np.int64)
    indices = np.arange(labels.size) if indices is None else np.sort(np.asarray(indices, dtype=np.int64))
    a, b = np.triu_indices(indices.size, k=1)
    index_a, index_b = indices[a], indices[b]
    return PairProtocol(index_a, index_b, labels[index_a] == labels[index_b])
