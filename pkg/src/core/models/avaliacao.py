"""
Modelos da avaliação biométrica.
"""
from typing import Dict, List, Optional

import numpy as np

from src.core.erros import EntradaInvalidaError


class PairProtocol:
    """Lista de comparações (index_a, index_b, mated)."""

    def __init__(self, index_a, index_b, mated):
        self.index_a = np.asarray(index_a, dtype=np.int64).reshape(-1)
        self.index_b = np.asarray(index_b, dtype=np.int64).reshape(-1)
        self.mated = np.asarray(mated, dtype=bool).reshape(-1)
        if not (self.index_a.size == self.index_b.size == self.mated.size):
            raise EntradaInvalidaError("Colunas do protocolo com tamanhos diferentes")
        if not self.mated.any() or self.mated.all():
            raise EntradaInvalidaError(
                "Protocolo requer ao menos um par mated e um par não-mated"
            )

    @property
    def tamanho(self) -> int:
        return self.mated.size

    def validar(self, num_amostras: int):
        """Verifica se todos os índices referem amostras existentes."""
        indices = np.concatenate([self.index_a, self.index_b])
        if np.any(indices < 0) or np.any(indices >= num_amostras):
            raise EntradaInvalidaError(
                f"Protocolo referencia índices fora de [0, {num_amostras})"
            )

    def invertido(self) -> 'PairProtocol':
        """Protocolo com os rótulos mated/não-mated trocados."""
        return PairProtocol(self.index_a, self.index_b, ~self.mated)


class ResultadoVerificacao:
    """Acurácia de melhor limiar ou TAR em alvos de FAR."""

    def __init__(
        self,
        modo: str,
        acuracia: Optional[float] = None,
        limiar: Optional[float] = None,
        tar_por_far: Optional[List[dict]] = None
    ):
        self.modo = modo
        self.acuracia = acuracia
        self.limiar = limiar
        self.tar_por_far = tar_por_far or []

    def to_dict(self) -> dict:
        return {
            "modo": self.modo,
            "acuracia": self.acuracia,
            "limiar": self.limiar,
            "tar_por_far": self.tar_por_far
        }


class ResultadoIdentificacao:
    """Taxas Rank-N e contagem de sondas excluídas."""

    def __init__(self, taxas: Dict[int, float], excluidos: int, avaliados: int):
        self.taxas = taxas
        self.excluidos = excluidos
        self.avaliados = avaliados

    def to_dict(self) -> dict:
        return {
            "rank": {str(n): taxa for n, taxa in sorted(self.taxas.items())},
            "excluidos": self.excluidos,
            "avaliados": self.avaliados
        }


class EDCCurve:
    """Curva erro-versus-descarte (FNMR em FMR fixo)."""

    def __init__(
        self,
        fmr_target: float,
        discard_fractions: List[float],
        fnmr_values: List[float],
        quality_source: str,
        limiar: float,
        truncado: bool = False
    ):
        if len(discard_fractions) != len(fnmr_values):
            raise EntradaInvalidaError("Frações e FNMR com tamanhos diferentes")
        self.fmr_target = fmr_target
        self.discard_fractions = list(discard_fractions)
        self.fnmr_values = list(fnmr_values)
        self.quality_source = quality_source
        self.limiar = limiar
        self.truncado = truncado

    def to_dict(self) -> dict:
        return {
            "fmr_target": self.fmr_target,
            "discard_fractions": self.discard_fractions,
            "fnmr_values": self.fnmr_values,
            "quality_source": self.quality_source,
            "limiar": self.limiar,
            "truncado": self.truncado
        }


class MapaDensidade:
    """Pares (‖z‖, CR) por amostra e histograma 2-D."""

    def __init__(self, norms, crs, norm_hat, cr_hat, histograma, bordas_norma, bordas_cr):
        self.norms = np.asarray(norms)
        self.crs = np.asarray(crs)
        self.norm_hat = np.asarray(norm_hat)
        self.cr_hat = np.asarray(cr_hat)
        self.histograma = np.asarray(histograma)
        self.bordas_norma = np.asarray(bordas_norma)
        self.bordas_cr = np.asarray(bordas_cr)
