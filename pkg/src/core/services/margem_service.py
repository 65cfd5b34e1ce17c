"""
Serviço de margem: geometria de logits por cosseno e a família de perdas
softmax com margem (CE, Sphere, Arc, Cos, Generalized, AdaFace, FunFace),
com forward e backward analíticos.

Os termos de adaptação (ẑ, CR, ĈR, κ, g_angle, g_add) não recebem gradiente.
"""
import logging
from typing import Optional, Tuple

import numpy as np

from src.core.erros import EntradaInvalidaError, FalhaNumericaError
from src.core.models.estado_normalizador import NormalizerState
from src.core.models.lote import ClassPrototypes, EmbeddingBatch
from src.core.models.margem import MarginConfig, Variante
from src.core.models.saida_perda import ContextoPerda, LossOutput
from src.core.services import estatisticas_service as estatisticas

logger = logging.getLogger(__name__)

# piso de sen(θ) na derivada de arccos
SENO_MINIMO = 1e-12


def _normalizar_lote(batch: EmbeddingBatch, protos: ClassPrototypes) -> Tuple[np.ndarray, np.ndarray]:
    batch.validar_contra(protos)
    norms = np.linalg.norm(batch.features, axis=1)
    zeros = np.flatnonzero(norms <= 0.0)
    if zeros.size:
        raise EntradaInvalidaError(f"Embedding com norma zero na amostra {int(zeros[0])}")
    return batch.features / norms[:, None], norms


def cosine_logits(batch: EmbeddingBatch, protos: ClassPrototypes) -> Tuple[np.ndarray, np.ndarray]:
    """
    Calcula os cossenos entre embeddings e centros de classe.

    Args:
        batch: Lote de embeddings brutos
        protos: Protótipos de classe (linhas unitárias)

    Returns:
        Tuple[np.ndarray, np.ndarray]: Matriz B×C de cossenos em [-1, 1] e
        vetor com as normas ‖z_b‖
    """
    unit, norms = _normalizar_lote(batch, protos)
    return np.clip(unit @ protos.centers.T, -1.0, 1.0), norms


def geometria_lote(
    batch: EmbeddingBatch,
    protos: ClassPrototypes,
    epsilon: float,
    com_cr: bool = True
) -> dict:
    """
    Cossenos, normas e, se pedido, vizinho negativo e CR de um lote.

    O resultado pode ser repassado a `margin_loss_forward` (argumento
    `geometria`) para que a matriz de cossenos seja calculada uma única vez.

    Returns:
        dict: unit, cos, norms, cos_pos e, com `com_cr`, cos_nn e cr
    """
    unit, norms = _normalizar_lote(batch, protos)
    cos = np.clip(unit @ protos.centers.T, -1.0, 1.0)
    geometria = {
        "unit": unit,
        "cos": cos,
        "norms": norms,
        "cos_pos": cos[np.arange(batch.tamanho), batch.labels]
    }
    if com_cr:
        _completar_cr(geometria, batch.labels, epsilon)
    return geometria


def _completar_cr(geometria: dict, labels: np.ndarray, epsilon: float):
    if "cr" in geometria:
        return
    cos_nn = cos_vizinho_negativo(geometria["cos"], labels)
    geometria["cos_nn"] = cos_nn
    geometria["cr"] = np.asarray(
        estatisticas.certainty_ratio(geometria["cos_pos"], cos_nn, epsilon), dtype=np.float64
    )


def _parametros_angulo(config: MarginConfig, g_angle, g_add) -> tuple:
    # PCT = cos(clamp(a·θ + b, 0, π)) − c
    if config.variant.adaptativa:
        return 1.0, g_angle, g_add
    return config.margens_estaticas()


def generalized_pct(cos_pos, config: MarginConfig, g_angle=0.0, g_add=0.0):
    """
    Termo da classe positiva com margem.

    Variantes estáticas: cos(m_sph·θ + m_arc) − m_cos. Variantes adaptativas:
    cos(θ + g_angle) − g_add. O argumento angular é limitado a [0, π].
    """
    cos_pos = np.clip(np.asarray(cos_pos, dtype=np.float64), -1.0, 1.0)
    if config.variant == Variante.CE:
        return cos_pos[()]
    a, b, c = _parametros_angulo(config, g_angle, g_add)
    theta = np.arccos(cos_pos)
    argumento = np.clip(a * theta + b, 0.0, np.pi)
    return (np.cos(argumento) - c)[()]


def derivada_pct(cos_pos, config: MarginConfig, g_angle=0.0, g_add=0.0):
    """dPCT/dcos(θ_i) com g_angle e g_add constantes."""
    cos_pos = np.clip(np.asarray(cos_pos, dtype=np.float64), -1.0, 1.0)
    if config.variant == Variante.CE:
        return np.ones_like(cos_pos)[()]
    a, b, _ = _parametros_angulo(config, g_angle, g_add)
    theta = np.arccos(cos_pos)
    return _derivada_com_theta(cos_pos, theta, a, b)[()]


def _derivada_com_theta(cos_pos, theta, a, b):
    bruto = a * theta + b
    livre = (bruto > 0.0) & (bruto < np.pi)
    seno = np.maximum(np.sqrt(np.maximum(1.0 - cos_pos ** 2, 0.0)), SENO_MINIMO)
    return np.where(livre, a * np.sin(bruto) / seno, 0.0)


def pct_com_derivada(cos_pos: np.ndarray, theta: np.ndarray, config: MarginConfig, g_angle, g_add) -> tuple:
    """PCT e dPCT/dcos juntos, com θ = arccos(cos_pos) já calculado."""
    if config.variant == Variante.CE:
        return cos_pos, np.ones_like(cos_pos)
    a, b, c = _parametros_angulo(config, g_angle, g_add)
    pct = np.cos(np.clip(a * theta + b, 0.0, np.pi)) - c
    return pct, _derivada_com_theta(cos_pos, theta, a, b)


def cos_vizinho_negativo(cos: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Maior cosseno entre as classes negativas; empate fica com o menor índice."""
    mascarado = cos.copy()
    mascarado[np.arange(cos.shape[0]), labels] = -np.inf
    indices = np.argmax(mascarado, axis=1)
    return mascarado[np.arange(cos.shape[0]), indices]


def termos_adaptacao(
    cos_pos: np.ndarray,
    cos_nn: Optional[np.ndarray],
    norms: np.ndarray,
    config: MarginConfig,
    stats: Optional[NormalizerState],
    norm_hat=None,
    cr_hat=None,
    cr=None,
    completo: bool = False
) -> dict:
    """
    Calcula ẑ, CR, ĈR, κ, g_angle e g_add por amostra.

    Só o que a variante usa é calculado: ẑ para AdaFace e FunFace, CR e ĈR
    para FunFace com λ < 1. Com `completo=True` todos os termos são
    calculados, inclusive para as variantes estáticas.

    `norm_hat`, `cr_hat` e `cr`, quando fornecidos, substituem os valores
    calculados.
    """
    precisa_norma = config.variant.adaptativa or completo
    precisa_cr = config.usa_cr or completo
    termos = {}

    if precisa_cr:
        if cr is None and cos_nn is not None:
            cr = estatisticas.certainty_ratio(cos_pos, cos_nn, config.epsilon)
        if cr is not None:
            termos["cr"] = np.asarray(cr, dtype=np.float64)
        if cr_hat is None:
            if cr is None:
                raise EntradaInvalidaError("ĈR requer o cosseno do vizinho negativo ou o CR")
            cr_hat = estatisticas.normalizar_cr(stats, cr, config.h)
        termos["cr_hat"] = np.broadcast_to(np.asarray(cr_hat, dtype=np.float64), cos_pos.shape)
    if precisa_norma:
        if norm_hat is None:
            norm_hat = estatisticas.normalizar_norma(stats, norms, config.h)
        termos["norm_hat"] = np.broadcast_to(np.asarray(norm_hat, dtype=np.float64), cos_pos.shape)

    if config.variant == Variante.ADAFACE or (config.variant == Variante.FUNFACE and not config.usa_cr):
        kappa = termos["norm_hat"].copy()
    elif config.variant == Variante.FUNFACE:
        kappa = np.asarray(estatisticas.mix_kappa(termos["norm_hat"], termos["cr_hat"], config.lambda_))
    else:
        kappa = np.zeros_like(cos_pos)

    if config.variant.adaptativa:
        termos["g_angle"] = -config.m * kappa
        termos["g_add"] = config.m + config.m * kappa
    else:
        _, b, c = config.margens_estaticas()
        termos["g_angle"] = np.full_like(cos_pos, b)
        termos["g_add"] = np.full_like(cos_pos, c)
    termos["kappa"] = kappa
    return termos


def _verificar_finito(valores: np.ndarray, descricao: str):
    if valores.ndim > 1:
        ruins = ~np.all(np.isfinite(valores), axis=tuple(range(1, valores.ndim)))
    else:
        ruins = ~np.isfinite(valores)
    indices = np.flatnonzero(ruins)
    if indices.size:
        indice = int(indices[0])
        raise FalhaNumericaError(
            f"Valor não finito em {descricao} na amostra {indice}",
            indice_amostra=indice
        )


def margin_loss_forward(
    batch: EmbeddingBatch,
    protos: ClassPrototypes,
    config: MarginConfig,
    stats: Optional[NormalizerState] = None,
    norm_hat=None,
    cr_hat=None,
    diagnosticos: bool = False,
    geometria: Optional[dict] = None
) -> LossOutput:
    """
    Forward da perda com margem.

    Args:
        batch: Lote de embeddings brutos
        protos: Protótipos de classe
        config: Hiperparâmetros da perda
        stats: Estado EMA (somente leitura); obrigatório para variantes
            adaptativas salvo quando `norm_hat`/`cr_hat` são fornecidos
        norm_hat: ẑ fixo por amostra (opcional)
        cr_hat: ĈR fixo por amostra (opcional)
        diagnosticos: Calcula todos os campos de diagnóstico, inclusive os
            que a variante não usa (cos_nn, CR, ĈR)
        geometria: Resultado de `geometria_lote` para o mesmo lote e os
            mesmos protótipos (evita recalcular os cossenos)

    Returns:
        LossOutput: Perda média, perdas por amostra e diagnósticos
    """
    if config.variant.adaptativa and stats is None:
        if norm_hat is None or (config.usa_cr and cr_hat is None):
            raise EntradaInvalidaError(
                f"Variante {config.variant.value} requer o estado do normalizador"
            )

    precisa_cr = (config.usa_cr and cr_hat is None) or diagnosticos
    if geometria is None:
        geometria = geometria_lote(batch, protos, config.epsilon, com_cr=precisa_cr)
    else:
        if geometria["cos"].shape != (batch.tamanho, protos.num_classes):
            raise EntradaInvalidaError("Geometria fornecida não corresponde ao lote")
        if precisa_cr:
            geometria = dict(geometria)
            _completar_cr(geometria, batch.labels, config.epsilon)

    cos, norms, cos_pos = geometria["cos"], geometria["norms"], geometria["cos_pos"]
    linhas = np.arange(batch.tamanho)
    labels = batch.labels

    if config.variant.adaptativa or diagnosticos:
        termos = termos_adaptacao(
            cos_pos, geometria.get("cos_nn"), norms, config, stats,
            norm_hat, cr_hat, geometria.get("cr"), completo=diagnosticos
        )
        g_angle, g_add = termos["g_angle"], termos["g_add"]
    else:
        termos = {}
        g_angle = g_add = 0.0

    theta_pos = np.arccos(cos_pos)
    pct, dpct = pct_com_derivada(cos_pos, theta_pos, config, g_angle, g_add)
    _verificar_finito(pct, "PCT")

    logits = config.s * cos
    logits[linhas, labels] = config.s * pct
    maximo = np.max(logits, axis=1, keepdims=True)
    lse = maximo[:, 0] + np.log(np.sum(np.exp(logits - maximo), axis=1))
    perdas = lse - logits[linhas, labels]
    _verificar_finito(perdas, "perda")
    probabilidades = np.exp(logits - lse[:, None])

    colunas = {"theta_pos": theta_pos, "cos_pos": cos_pos, "norm": norms, "pct": pct}
    if "cos_nn" in geometria and (diagnosticos or config.usa_cr):
        colunas["cos_nn"] = geometria["cos_nn"]
    colunas.update(termos)

    contexto = ContextoPerda(
        unit_features=geometria["unit"],
        norms=norms,
        probabilidades=probabilidades,
        dpct_dcos=dpct,
        labels=labels.copy()
    )
    return LossOutput(
        loss=float(np.mean(perdas)),
        per_sample_loss=perdas,
        colunas=colunas,
        contexto=contexto
    )


def gradiente_cossenos(saida: LossOutput, config: MarginConfig) -> np.ndarray:
    """∂L/∂cos(θ_bj) da perda média do lote (matriz B×C)."""
    ctx = saida.contexto
    tamanho = ctx.probabilidades.shape[0]
    linhas = np.arange(tamanho)
    grad = config.s * ctx.probabilidades / tamanho
    grad[linhas, ctx.labels] = (
        config.s * (ctx.probabilidades[linhas, ctx.labels] - 1.0) * ctx.dpct_dcos / tamanho
    )
    return grad


def margin_loss_backward(
    batch: EmbeddingBatch,
    protos: ClassPrototypes,
    config: MarginConfig,
    saida: LossOutput
) -> LossOutput:
    """
    Preenche os gradientes analíticos da perda média.

    O gradiente dos protótipos é calculado nas linhas como fornecidas
    (antes de qualquer renormalização).

    Returns:
        LossOutput: A mesma saída com grad_features e grad_centers preenchidos
    """
    if saida.contexto is None:
        raise EntradaInvalidaError("Backward requer a saída de margin_loss_forward")
    ctx = saida.contexto
    if ctx.unit_features.shape != batch.features.shape:
        raise EntradaInvalidaError("Saída do forward não corresponde ao lote")

    grad_cos = gradiente_cossenos(saida, config)
    _verificar_finito(grad_cos, "gradiente dos cossenos")

    grad_unit = grad_cos @ protos.centers
    radial = np.sum(grad_unit * ctx.unit_features, axis=1, keepdims=True)
    grad_features = (grad_unit - radial * ctx.unit_features) / ctx.norms[:, None]
    grad_centers = grad_cos.T @ ctx.unit_features

    _verificar_finito(grad_features, "gradiente das features")
    if not np.all(np.isfinite(grad_centers)):
        raise FalhaNumericaError("Valor não finito no gradiente dos protótipos")

    saida.grad_features = grad_features
    saida.grad_centers = grad_centers
    return saida


def renormalize_prototypes(protos: ClassPrototypes) -> ClassPrototypes:
    """Escala cada linha dos protótipos para norma L2 unitária."""
    normas = np.linalg.norm(protos.centers, axis=1)
    zeros = np.flatnonzero(~(normas > 0.0))
    if zeros.size:
        raise FalhaNumericaError(f"Protótipo com norma zero na classe {int(zeros[0])}")
    return ClassPrototypes(protos.centers / normas[:, None])
