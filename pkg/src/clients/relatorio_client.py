"""
Cliente de relatórios: escrita de tabelas CSV e documentos JSON, e leitura
e escrita de protocolos de pares.
"""
import csv
import json
import logging
import os
from typing import Iterable, List, Sequence, Union

import numpy as np

from src.core.erros import ArquivoInvalidoError
from src.core.models.avaliacao import PairProtocol

logger = logging.getLogger(__name__)

Caminho = Union[str, os.PathLike]

COLUNAS_PROTOCOLO = ["index_a", "index_b", "mated"]


def _para_json(valor):
    if isinstance(valor, np.generic):
        return valor.item()
    if isinstance(valor, np.ndarray):
        return valor.tolist()
    raise TypeError(f"Tipo não serializável: {type(valor).__name__}")


def _formatar(valor):
    if isinstance(valor, (bool, np.bool_)):
        return int(valor)
    if isinstance(valor, (float, np.floating)):
        return repr(float(valor))
    if isinstance(valor, np.integer):
        return int(valor)
    return valor


def _garantir_diretorio(caminho: Caminho):
    pasta = os.path.dirname(os.fspath(caminho))
    if pasta:
        os.makedirs(pasta, exist_ok=True)


class RelatorioClient:
    """Relatórios de um diretório de saída."""

    def __init__(self, diretorio: Caminho = ".", indentacao: int = 2):
        self.diretorio = os.fspath(diretorio)
        self.indentacao = indentacao
        os.makedirs(self.diretorio, exist_ok=True)

    def caminho(self, nome: str) -> str:
        """Resolve um nome de arquivo no diretório de saída."""
        return os.path.join(self.diretorio, nome)

    def escrever_json(self, dados: dict, caminho: Caminho):
        """Grava JSON com chaves ordenadas (saída reprodutível)."""
        _garantir_diretorio(caminho)
        with open(caminho, "w", encoding="utf-8") as f:
            json.dump(dados, f, indent=self.indentacao, sort_keys=True, default=_para_json)
            f.write("\n")
        logger.info(f"Relatório JSON gravado em {caminho}")

    def ler_json(self, caminho: Caminho) -> dict:
        if not os.path.exists(caminho):
            raise ArquivoInvalidoError(f"Arquivo não encontrado: {caminho}")
        with open(caminho, "r", encoding="utf-8") as f:
            try:
                return json.load(f)
            except json.JSONDecodeError as e:
                raise ArquivoInvalidoError(f"JSON inválido em {caminho}: {e}")

    def escrever_csv(self, colunas: Sequence[str], linhas: Iterable[Sequence], caminho: Caminho):
        """Grava uma tabela CSV com cabeçalho."""
        _garantir_diretorio(caminho)
        total = 0
        with open(caminho, "w", newline="", encoding="utf-8") as f:
            escritor = csv.writer(f)
            escritor.writerow(list(colunas))
            for linha in linhas:
                escritor.writerow([_formatar(v) for v in linha])
                total += 1
        logger.info(f"Tabela CSV gravada em {caminho} ({total} linhas)")

    def ler_csv(self, caminho: Caminho) -> List[dict]:
        if not os.path.exists(caminho):
            raise ArquivoInvalidoError(f"Arquivo não encontrado: {caminho}")
        with open(caminho, "r", newline="", encoding="utf-8") as f:
            return list(csv.DictReader(f))

    def salvar_protocolo(self, protocolo: PairProtocol, caminho: Caminho):
        self.escrever_csv(
            COLUNAS_PROTOCOLO,
            zip(protocolo.index_a, protocolo.index_b, protocolo.mated),
            caminho
        )

    def carregar_protocolo(self, caminho: Caminho) -> PairProtocol:
        """Lê um protocolo com colunas index_a, index_b, mated."""
        linhas = self.ler_csv(caminho)
        if not linhas or any(c not in linhas[0] for c in COLUNAS_PROTOCOLO):
            raise ArquivoInvalidoError(
                f"Protocolo em {caminho} deve ter as colunas {', '.join(COLUNAS_PROTOCOLO)}"
            )
        try:
            index_a = [int(linha["index_a"]) for linha in linhas]
            index_b = [int(linha["index_b"]) for linha in linhas]
            mated = [linha["mated"].strip().lower() in ("1", "true") for linha in linhas]
        except (TypeError, ValueError) as e:
            raise ArquivoInvalidoError(f"Valor inválido no protocolo {caminho}: {e}")
        return PairProtocol(index_a, index_b, mated)
