"""
Serviço de estatísticas adaptativas: EMA, normalização, certainty ratio e κ.

As funções aceitam escalares ou vetores numpy.
"""
import logging

import numpy as np

from src.core.erros import EntradaInvalidaError
from src.core.models.estado_normalizador import NormalizerState

logger = logging.getLogger(__name__)

SIGMA_MINIMO = 1e-6


def _estatisticas_lote(valores) -> tuple:
    valores = np.asarray(valores, dtype=np.float64).reshape(-1)
    if valores.size == 0:
        raise EntradaInvalidaError("Vetor vazio para atualização EMA")
    if not np.all(np.isfinite(valores)):
        raise EntradaInvalidaError("Vetor com valores não finitos para atualização EMA")
    # desvio populacional (divisão por N)
    return float(np.mean(valores)), float(np.std(valores))


def ema_update(state: NormalizerState, batch_norms, batch_crs) -> NormalizerState:
    """
    Atualiza as estatísticas móveis com as estatísticas do lote.

    Na primeira chamada as médias móveis recebem diretamente as do lote.

    Args:
        state: Estado atual (não é modificado)
        batch_norms: Normas ‖z‖ do lote
        batch_crs: Certainty ratios do lote

    Returns:
        NormalizerState: Novo estado
    """
    mu_z, sigma_z = _estatisticas_lote(batch_norms)
    mu_cr, sigma_cr = _estatisticas_lote(batch_crs)

    if not state.initialized:
        logger.debug(f"EMA inicializada: mu_z={mu_z:.4f}, mu_cr={mu_cr:.4f}")
        return NormalizerState(
            mu_z, sigma_z, mu_cr, sigma_cr,
            ema_momentum=state.ema_momentum,
            initialized=True
        )

    a = state.ema_momentum
    return NormalizerState(
        mu_z=a * state.mu_z + (1.0 - a) * mu_z,
        sigma_z=a * state.sigma_z + (1.0 - a) * sigma_z,
        mu_cr=a * state.mu_cr + (1.0 - a) * mu_cr,
        sigma_cr=a * state.sigma_cr + (1.0 - a) * sigma_cr,
        ema_momentum=a,
        initialized=True
    )


def normalize_clip(value, mu: float, sigma: float, h: float):
    """Retorna clamp((value − mu) / (sigma / h), −1, 1); 0 se sigma < 1e-6."""
    if h <= 0:
        raise EntradaInvalidaError(f"h deve ser > 0, recebido {h}")
    if sigma < SIGMA_MINIMO:
        return np.zeros_like(np.asarray(value, dtype=np.float64))[()]
    normalizado = (np.asarray(value, dtype=np.float64) - mu) / (sigma / h)
    return np.clip(normalizado, -1.0, 1.0)[()]


def normalizar_norma(state: NormalizerState, norms, h: float):
    """ẑ com o estado atual; zero enquanto o estado não foi inicializado."""
    if state is None or not state.initialized:
        return np.zeros_like(np.asarray(norms, dtype=np.float64))[()]
    return normalize_clip(norms, state.mu_z, state.sigma_z, h)


def normalizar_cr(state: NormalizerState, crs, h: float):
    """ĈR com o estado atual; zero enquanto o estado não foi inicializado."""
    if state is None or not state.initialized:
        return np.zeros_like(np.asarray(crs, dtype=np.float64))[()]
    return normalize_clip(crs, state.mu_cr, state.sigma_cr, h)


def certainty_ratio(cos_pos, cos_neg_max, epsilon: float):
    """CR com cossenos limitados a [0, 1]: ⌊CCS⌉ / (⌊NNCCS⌉ + ε)."""
    numerador = np.clip(np.asarray(cos_pos, dtype=np.float64), 0.0, 1.0)
    denominador = np.clip(np.asarray(cos_neg_max, dtype=np.float64), 0.0, 1.0) + epsilon
    return (numerador / denominador)[()]


def certainty_ratio_legacy(cos_pos, cos_neg_max, epsilon: float):
    """Forma original do CR-FIQA: CCS / (NNCCS + 1 + ε)."""
    cos_pos = np.asarray(cos_pos, dtype=np.float64)
    cos_neg_max = np.asarray(cos_neg_max, dtype=np.float64)
    return (cos_pos / (cos_neg_max + 1.0 + epsilon))[()]


def mix_kappa(norm_hat, cr_hat, lambda_: float):
    """κ = λ·ẑ + (1 − λ)·ĈR."""
    if not 0.0 <= lambda_ <= 1.0:
        raise EntradaInvalidaError(f"lambda deve estar em [0, 1], recebido {lambda_}")
    norm_hat = np.asarray(norm_hat, dtype=np.float64)
    cr_hat = np.asarray(cr_hat, dtype=np.float64)
    return (lambda_ * norm_hat + (1.0 - lambda_) * cr_hat)[()]


def taxa_ativacao_clamp(cos_pos, cos_neg_max) -> float:
    """Fração de amostras em que o clamp [0, 1] do CR altera CCS ou NNCCS."""
    cos_pos = np.asarray(cos_pos, dtype=np.float64)
    cos_neg_max = np.asarray(cos_neg_max, dtype=np.float64)
    if cos_pos.size == 0:
        return 0.0
    ativo = (cos_pos < 0.0) | (cos_pos > 1.0) | (cos_neg_max < 0.0) | (cos_neg_max > 1.0)
    return float(np.mean(ativo))
