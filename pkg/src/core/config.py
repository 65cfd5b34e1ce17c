"""
Configuração unificada do laboratório (RunConfig).

Um único documento YAML com as seções sintese, aumento, margem, treino,
avaliacao, atlas, ablacao, bench e saida. Todo campo tem padrão e chaves
desconhecidas são rejeitadas. Overrides de linha de comando usam a forma
`secao.chave=valor`, com o valor interpretado como YAML.
"""
import copy
import logging
import os
from typing import Callable, Iterable, List, Optional

import yaml

from src.core.erros import ArquivoInvalidoError, ConfigInvalidaError
from src.core.models.atlas import AtlasConfig
from src.core.models.margem import MarginConfig
from src.core.models.sintese import AugmentConfig, SynthConfig
from src.core.models.treino import TrainConfig

logger = logging.getLogger(__name__)

NIVEIS_VERIFICACAO = ("limpo", "degradado", "todos")
FONTES_QUALIDADE = ("cr", "true_noise", "anti_oracle")
# seções cujo conteúdo é um mapa livre (nome → valor)
CHAVES_LIVRES = {"atlas.snapshots"}


def _booleano(valor, campo: str) -> bool:
    if isinstance(valor, bool):
        return valor
    raise ConfigInvalidaError(f"Valor booleano esperado, recebido {valor!r}", campo=campo)


def _lista_floats(valor, campo: str) -> List[float]:
    if not isinstance(valor, (list, tuple)):
        raise ConfigInvalidaError(f"Lista esperada, recebido {valor!r}", campo=campo)
    try:
        return [float(v) for v in valor]
    except (TypeError, ValueError):
        raise ConfigInvalidaError(f"Lista numérica inválida: {valor!r}", campo=campo)


class AvaliacaoConfig:
    """Conjunto de avaliação e parâmetros das métricas."""

    def __init__(
        self,
        seed: int = 1000,
        samples_per_identity: int = 16,
        far_targets: Optional[List[float]] = None,
        ranks: Optional[List[int]] = None,
        fmr_target: float = 1e-3,
        discard_fractions: Optional[List[float]] = None,
        quality_source: str = "cr",
        nivel_verificacao: str = "limpo",
        bins: Optional[List[int]] = None,
        cr_legado: bool = False
    ):
        self.seed = seed
        self.samples_per_identity = samples_per_identity
        self.far_targets = far_targets if far_targets is not None else [1e-3, 1e-2, 1e-1]
        self.ranks = ranks if ranks is not None else [1, 5]
        self.fmr_target = fmr_target
        self.discard_fractions = (
            discard_fractions if discard_fractions is not None
            else [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
        )
        self.quality_source = quality_source
        self.nivel_verificacao = nivel_verificacao
        self.bins = bins if bins is not None else [20, 20]
        self.cr_legado = cr_legado
        self.validar()

    def validar(self):
        if self.samples_per_identity < 2:
            raise ConfigInvalidaError(
                "samples_per_identity deve ser >= 2", campo="avaliacao.samples_per_identity"
            )
        if any(not 0.0 < f <= 1.0 for f in self.far_targets):
            raise ConfigInvalidaError("far_targets deve estar em (0, 1]", campo="avaliacao.far_targets")
        if not self.ranks or any(r < 1 for r in self.ranks):
            raise ConfigInvalidaError("ranks devem ser >= 1", campo="avaliacao.ranks")
        if not 0.0 < self.fmr_target <= 1.0:
            raise ConfigInvalidaError("fmr_target deve estar em (0, 1]", campo="avaliacao.fmr_target")
        fracoes = self.discard_fractions
        if any(not 0.0 <= f < 1.0 for f in fracoes) or any(b <= a for a, b in zip(fracoes, fracoes[1:])):
            raise ConfigInvalidaError(
                "discard_fractions deve ser crescente em [0, 1)", campo="avaliacao.discard_fractions"
            )
        if self.quality_source not in FONTES_QUALIDADE:
            raise ConfigInvalidaError(
                f"quality_source deve ser um de {', '.join(FONTES_QUALIDADE)}",
                campo="avaliacao.quality_source"
            )
        if self.nivel_verificacao not in NIVEIS_VERIFICACAO:
            raise ConfigInvalidaError(
                f"nivel_verificacao deve ser um de {', '.join(NIVEIS_VERIFICACAO)}",
                campo="avaliacao.nivel_verificacao"
            )
        if len(self.bins) != 2 or any(b < 1 for b in self.bins):
            raise ConfigInvalidaError("bins deve ter dois inteiros >= 1", campo="avaliacao.bins")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "samples_per_identity": self.samples_per_identity,
            "far_targets": list(self.far_targets),
            "ranks": list(self.ranks),
            "fmr_target": self.fmr_target,
            "discard_fractions": list(self.discard_fractions),
            "quality_source": self.quality_source,
            "nivel_verificacao": self.nivel_verificacao,
            "bins": list(self.bins),
            "cr_legado": self.cr_legado
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'AvaliacaoConfig':
        padrao = cls().to_dict()
        dados = {**padrao, **data}
        return cls(
            seed=int(dados["seed"]),
            samples_per_identity=int(dados["samples_per_identity"]),
            far_targets=_lista_floats(dados["far_targets"], "avaliacao.far_targets"),
            ranks=[int(r) for r in dados["ranks"]],
            fmr_target=float(dados["fmr_target"]),
            discard_fractions=_lista_floats(dados["discard_fractions"], "avaliacao.discard_fractions"),
            quality_source=str(dados["quality_source"]),
            nivel_verificacao=str(dados["nivel_verificacao"]),
            bins=[int(b) for b in dados["bins"]],
            cr_legado=_booleano(dados["cr_legado"], "avaliacao.cr_legado")
        )


class AblacaoConfig:
    """Varredura de λ (e linhas de comparação opcionais)."""

    def __init__(
        self,
        lambdas: Optional[List[float]] = None,
        incluir_adaface: bool = False,
        sem_aumento: bool = False
    ):
        self.lambdas = lambdas if lambdas is not None else [0.1, 0.3, 0.5, 0.7, 0.9]
        self.incluir_adaface = incluir_adaface
        self.sem_aumento = sem_aumento
        if not self.lambdas or any(not 0.0 <= v <= 1.0 for v in self.lambdas):
            raise ConfigInvalidaError("lambdas deve conter valores em [0, 1]", campo="ablacao.lambdas")

    def to_dict(self) -> dict:
        return {
            "lambdas": list(self.lambdas),
            "incluir_adaface": self.incluir_adaface,
            "sem_aumento": self.sem_aumento
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'AblacaoConfig':
        dados = {**cls().to_dict(), **data}
        return cls(
            lambdas=_lista_floats(dados["lambdas"], "ablacao.lambdas"),
            incluir_adaface=_booleano(dados["incluir_adaface"], "ablacao.incluir_adaface"),
            sem_aumento=_booleano(dados["sem_aumento"], "ablacao.sem_aumento")
        )


class BenchConfig:
    """Lote sintético usado para cronometrar forward+backward da perda."""

    def __init__(
        self,
        batch_size: int = 256,
        num_classes: int = 32,
        embedding_dim: int = 64,
        repeticoes: int = 50,
        seed: int = 0
    ):
        self.batch_size = batch_size
        self.num_classes = num_classes
        self.embedding_dim = embedding_dim
        self.repeticoes = repeticoes
        self.seed = seed
        for nome, minimo in (("batch_size", 1), ("num_classes", 2), ("embedding_dim", 2), ("repeticoes", 1)):
            if getattr(self, nome) < minimo:
                raise ConfigInvalidaError(f"{nome} deve ser >= {minimo}", campo=f"bench.{nome}")

    def to_dict(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "num_classes": self.num_classes,
            "embedding_dim": self.embedding_dim,
            "repeticoes": self.repeticoes,
            "seed": self.seed
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'BenchConfig':
        dados = {**cls().to_dict(), **data}
        return cls(**{chave: int(valor) for chave, valor in dados.items()})


class SaidaConfig:
    def __init__(self, diretorio: str = "resultados"):
        self.diretorio = diretorio

    def to_dict(self) -> dict:
        return {"diretorio": self.diretorio}

    @classmethod
    def from_dict(cls, data: dict) -> 'SaidaConfig':
        return cls(diretorio=str(data.get("diretorio", "resultados")))


class RunConfig:
    """Documento de configuração completo de uma execução."""

    SECOES = (
        "sintese", "aumento", "margem", "treino", "avaliacao",
        "atlas", "ablacao", "bench", "saida"
    )

    def __init__(
        self,
        sintese: Optional[SynthConfig] = None,
        aumento: Optional[AugmentConfig] = None,
        margem: Optional[MarginConfig] = None,
        treino: Optional[TrainConfig] = None,
        avaliacao: Optional[AvaliacaoConfig] = None,
        atlas: Optional[AtlasConfig] = None,
        ablacao: Optional[AblacaoConfig] = None,
        bench: Optional[BenchConfig] = None,
        saida: Optional[SaidaConfig] = None
    ):
        self.sintese = sintese or SynthConfig()
        self.aumento = aumento or AugmentConfig()
        self.margem = margem or MarginConfig()
        self.treino = treino or TrainConfig(
            margin_config=self.margem, augment_config=self.aumento
        )
        self.avaliacao = avaliacao or AvaliacaoConfig()
        self.atlas = atlas or AtlasConfig.from_dict({}, self.margem)
        self.ablacao = ablacao or AblacaoConfig()
        self.bench = bench or BenchConfig()
        self.saida = saida or SaidaConfig()

    def to_dict(self) -> dict:
        return {
            "sintese": self.sintese.to_dict(),
            "aumento": self.aumento.to_dict(),
            "margem": self.margem.to_dict(),
            "treino": self.treino.to_dict(),
            "avaliacao": self.avaliacao.to_dict(),
            "atlas": self.atlas.to_dict(),
            "ablacao": self.ablacao.to_dict(),
            "bench": self.bench.to_dict(),
            "saida": self.saida.to_dict()
        }

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> 'RunConfig':
        """
        Cria a configuração validando seções e chaves.

        Raises:
            ConfigInvalidaError: Seção ou chave desconhecida, ou valor inválido
        """
        data = data or {}
        if not isinstance(data, dict):
            raise ConfigInvalidaError("O documento de configuração deve ser um mapa")
        _validar_chaves(data, cls().to_dict())

        secoes = {nome: data.get(nome) or {} for nome in cls.SECOES}
        margem = _construir_secao("margem", MarginConfig.from_dict, secoes["margem"])
        aumento = _construir_secao("aumento", AugmentConfig.from_dict, secoes["aumento"])
        fabricas = {
            "sintese": SynthConfig.from_dict,
            "treino": lambda valores: TrainConfig.from_dict(valores, margem, aumento),
            "avaliacao": AvaliacaoConfig.from_dict,
            "atlas": lambda valores: AtlasConfig.from_dict(valores, margem),
            "ablacao": AblacaoConfig.from_dict,
            "bench": BenchConfig.from_dict,
            "saida": SaidaConfig.from_dict
        }
        return cls(
            margem=margem,
            aumento=aumento,
            **{nome: _construir_secao(nome, fabrica, secoes[nome]) for nome, fabrica in fabricas.items()}
        )

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True, allow_unicode=True)


def _construir_secao(nome: str, fabrica: Callable[[dict], object], valores: dict):
    """Constrói uma seção; em erro de tipo, nomeia a primeira chave culpada."""
    try:
        return fabrica(valores)
    except (TypeError, ValueError) as e:
        campo = nome
        for chave in valores:
            try:
                fabrica({chave: valores[chave]})
            except (TypeError, ValueError):
                campo = f"{nome}.{chave}"
                break
            except ConfigInvalidaError:
                continue
        raise ConfigInvalidaError(f"Valor inválido para {campo}: {e}", campo=campo) from e


def _validar_chaves(data: dict, modelo: dict, prefixo: str = ""):
    for chave, valor in data.items():
        campo = f"{prefixo}{chave}"
        if chave not in modelo:
            raise ConfigInvalidaError(f"Chave desconhecida: {campo}", campo=campo)
        if campo in CHAVES_LIVRES:
            if not isinstance(valor, dict):
                raise ConfigInvalidaError(f"{campo} deve ser um mapa", campo=campo)
            continue
        if isinstance(modelo[chave], dict):
            if valor is None:
                continue
            if not isinstance(valor, dict):
                raise ConfigInvalidaError(f"{campo} deve ser um mapa", campo=campo)
            _validar_chaves(valor, modelo[chave], f"{campo}.")


def aplicar_overrides(dados: dict, overrides: Iterable[str]) -> dict:
    """
    Aplica overrides `secao.chave=valor` sobre um documento.

    Returns:
        dict: Cópia do documento com os valores sobrepostos
    """
    resultado = copy.deepcopy(dados or {})
    for override in overrides:
        if "=" not in override:
            raise ConfigInvalidaError(f"Override sem '=': {override}", campo=override)
        caminho, texto = override.split("=", 1)
        partes = caminho.strip().split(".")
        if len(partes) < 2 or not all(partes):
            raise ConfigInvalidaError(f"Override deve ter a forma secao.chave=valor: {override}", campo=caminho)
        try:
            valor = yaml.safe_load(texto)
        except yaml.YAMLError as e:
            raise ConfigInvalidaError(f"Valor inválido em {caminho}: {e}", campo=caminho)
        alvo = resultado
        for parte in partes[:-1]:
            if not isinstance(alvo.get(parte), dict):
                alvo[parte] = {}
            alvo = alvo[parte]
        alvo[partes[-1]] = valor
        logger.debug(f"Override aplicado: {caminho} = {valor!r}")
    return resultado


def carregar_config(caminho: Optional[str] = None, overrides: Iterable[str] = ()) -> RunConfig:
    """
    Lê o YAML (opcional), aplica overrides e valida.

    Args:
        caminho: Arquivo YAML; None usa apenas os padrões
        overrides: Lista de `secao.chave=valor`

    Returns:
        RunConfig: Configuração resolvida
    """
    dados = {}
    if caminho:
        if not os.path.exists(caminho):
            raise ArquivoInvalidoError(f"Arquivo de configuração não encontrado: {caminho}")
        with open(caminho, "r", encoding="utf-8") as f:
            try:
                dados = yaml.safe_load(f) or {}
            except yaml.YAMLError as e:
                raise ConfigInvalidaError(f"YAML inválido em {caminho}: {e}")
        if not isinstance(dados, dict):
            raise ConfigInvalidaError(f"{caminho} deve conter um mapa de seções")
    return RunConfig.from_dict(aplicar_overrides(dados, overrides))


def chaves_planas(dados: Optional[dict] = None, prefixo: str = "") -> List[str]:
    """Lista `secao.chave = padrão` para todas as chaves (texto do --help)."""
    dados = RunConfig().to_dict() if dados is None else dados
    linhas = []
    for chave in sorted(dados):
        valor = dados[chave]
        campo = f"{prefixo}{chave}"
        if isinstance(valor, dict) and campo not in CHAVES_LIVRES:
            linhas.extend(chaves_planas(valor, f"{campo}."))
        else:
            linhas.append(f"{campo} = {valor}")
    return linhas
