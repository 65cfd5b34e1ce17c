"""
Modelo de configuração das perdas softmax com margem.
"""
import math
from enum import Enum

from src.core.erros import ConfigInvalidaError


class Variante(Enum):
    CE = "ce"
    SPHERE = "sphere"
    ARC = "arc"
    COS = "cos"
    GENERALIZED = "generalized"
    ADAFACE = "adaface"
    FUNFACE = "funface"

    @property
    def adaptativa(self) -> bool:
        return self in (Variante.ADAFACE, Variante.FUNFACE)

    @classmethod
    def from_str(cls, valor: str, campo: str = "margem.variant") -> 'Variante':
        """Converte texto (sem diferenciar maiúsculas) para a variante."""
        try:
            return cls(str(valor).lower())
        except ValueError:
            opcoes = ", ".join(v.value for v in cls)
            raise ConfigInvalidaError(
                f"Variante inválida '{valor}' (opções: {opcoes})", campo=campo
            )


class MarginConfig:
    """Hiperparâmetros da família de perdas com margem."""

    def __init__(
        self,
        variant: Variante = Variante.FUNFACE,
        m: float = 0.4,
        m_sph: float = 1.0,
        m_arc: float = 0.5,
        m_cos: float = 0.35,
        s: float = 64.0,
        h: float = 0.333,
        lambda_: float = 0.1,
        epsilon: float = 1e-4
    ):
        self.variant = variant
        self.m = m
        self.m_sph = m_sph
        self.m_arc = m_arc
        self.m_cos = m_cos
        self.s = s
        self.h = h
        self.lambda_ = lambda_
        self.epsilon = epsilon
        self.validar()

    def validar(self):
        """Verifica os invariantes da configuração."""
        if not isinstance(self.variant, Variante):
            raise ConfigInvalidaError(
                f"Variante inválida: {self.variant}", campo="margem.variant"
            )
        valores = {
            "m": self.m, "m_sph": self.m_sph, "m_arc": self.m_arc,
            "m_cos": self.m_cos, "s": self.s, "h": self.h,
            "lambda": self.lambda_, "epsilon": self.epsilon
        }
        for nome, valor in valores.items():
            if not isinstance(valor, (int, float)) or not math.isfinite(valor):
                raise ConfigInvalidaError(
                    f"Valor não numérico para {nome}: {valor}", campo=f"margem.{nome}"
                )
        if self.m < 0:
            raise ConfigInvalidaError("m deve ser >= 0", campo="margem.m")
        if self.s <= 0:
            raise ConfigInvalidaError("s deve ser > 0", campo="margem.s")
        if self.h <= 0:
            raise ConfigInvalidaError("h deve ser > 0", campo="margem.h")
        if self.epsilon <= 0:
            raise ConfigInvalidaError("epsilon deve ser > 0", campo="margem.epsilon")
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ConfigInvalidaError("lambda deve estar em [0, 1]", campo="margem.lambda")
        if self.variant == Variante.SPHERE and self.m_sph < 1:
            raise ConfigInvalidaError(
                "m_sph deve ser >= 1 para a variante sphere", campo="margem.m_sph"
            )

    @property
    def usa_cr(self) -> bool:
        """Só o FunFace com λ < 1 depende do certainty ratio."""
        return self.variant == Variante.FUNFACE and self.lambda_ < 1.0

    def margens_estaticas(self) -> tuple:
        """
        Retorna (m_sph, m_arc, m_cos) efetivos para a variante.

        Cada variante estática usa apenas a própria margem; CE usa a identidade.
        """
        if self.variant == Variante.SPHERE:
            return self.m_sph, 0.0, 0.0
        if self.variant == Variante.ARC:
            return 1.0, self.m_arc, 0.0
        if self.variant == Variante.COS:
            return 1.0, 0.0, self.m_cos
        if self.variant == Variante.GENERALIZED:
            return self.m_sph, self.m_arc, self.m_cos
        return 1.0, 0.0, 0.0

    def com(self, **alteracoes) -> 'MarginConfig':
        """Cria uma cópia com campos alterados."""
        dados = self.to_dict()
        for chave, valor in alteracoes.items():
            dados["lambda" if chave == "lambda_" else chave] = (
                valor.value if isinstance(valor, Variante) else valor
            )
        return MarginConfig.from_dict(dados)

    def to_dict(self) -> dict:
        """Converte a configuração para dicionário."""
        return {
            "variant": self.variant.value,
            "m": self.m,
            "m_sph": self.m_sph,
            "m_arc": self.m_arc,
            "m_cos": self.m_cos,
            "s": self.s,
            "h": self.h,
            "lambda": self.lambda_,
            "epsilon": self.epsilon
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'MarginConfig':
        """Cria a configuração a partir de um dicionário."""
        padrao = cls()
        return cls(
            variant=Variante.from_str(data.get("variant", padrao.variant.value)),
            m=float(data.get("m", padrao.m)),
            m_sph=float(data.get("m_sph", padrao.m_sph)),
            m_arc=float(data.get("m_arc", padrao.m_arc)),
            m_cos=float(data.get("m_cos", padrao.m_cos)),
            s=float(data.get("s", padrao.s)),
            h=float(data.get("h", padrao.h)),
            lambda_=float(data.get("lambda", padrao.lambda_)),
            epsilon=float(data.get("epsilon", padrao.epsilon))
        )
