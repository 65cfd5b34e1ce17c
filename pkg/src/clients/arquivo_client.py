"""
Cliente de arquivos binários: conjunto sintético e checkpoints de treino.

Ambos os formatos são little-endian.

Conjunto:
    cabeçalho de 5 inteiros u64 (magic, versão, N, D_in, C), seguido de
    N×D_in float64 (linha a linha), N rótulos int32, N qualidades float64 e
    C×D_in float64 com os protótipos de identidade.

Checkpoint:
    3 inteiros u64 (magic, versão, tamanho do JSON), o JSON UTF-8 com o
    manifesto dos arrays (nome e forma) e os metadados, e os arrays float64
    na ordem do manifesto.
"""
import json
import logging
import os
import struct
from typing import Optional, Union

import numpy as np

from src.core.erros import ArquivoInvalidoError
from src.core.models.sintese import DatasetSintetico
from src.core.models.treino import Checkpoint

logger = logging.getLogger(__name__)

MAGIC_DATASET = int.from_bytes(b"FFSYNTH\0", "little")
MAGIC_CHECKPOINT = int.from_bytes(b"FFCKPT\0\0", "little")
VERSAO_DATASET = 1
VERSAO_CHECKPOINT = 1

Caminho = Union[str, os.PathLike]


def _ler_bytes(caminho: Caminho) -> bytes:
    if not os.path.exists(caminho):
        raise ArquivoInvalidoError(f"Arquivo não encontrado: {caminho}")
    with open(caminho, "rb") as f:
        return f.read()


def _ler_array(dados: bytes, offset: int, dtype: str, quantidade: int) -> tuple:
    tamanho = np.dtype(dtype).itemsize * quantidade
    if offset + tamanho > len(dados):
        raise ArquivoInvalidoError("Arquivo truncado")
    array = np.frombuffer(dados, dtype=dtype, count=quantidade, offset=offset)
    return array.astype(dtype[1:] if dtype.startswith("<") else dtype), offset + tamanho


class ArquivoClient:
    """Leitura e escrita dos formatos binários do laboratório."""

    NOME_DATASET = "dataset.bin"
    NOME_CHECKPOINT = "checkpoint.bin"

    def __init__(self, diretorio: Caminho = "."):
        self.diretorio = os.fspath(diretorio)

    def caminho_dataset(self, caminho: Optional[Caminho] = None) -> str:
        """Caminho informado ou o dataset.bin do diretório do cliente."""
        return os.fspath(caminho) if caminho else os.path.join(self.diretorio, self.NOME_DATASET)

    def caminho_checkpoint(self, caminho: Optional[Caminho] = None) -> str:
        """Caminho informado ou o checkpoint.bin do diretório do cliente."""
        return os.fspath(caminho) if caminho else os.path.join(self.diretorio, self.NOME_CHECKPOINT)

    def salvar_dataset(self, dataset: DatasetSintetico, caminho: Optional[Caminho] = None) -> str:
        """Grava o conjunto no formato binário."""
        destino = self.caminho_dataset(caminho)
        n, d = dataset.inputs.shape
        c = dataset.prototypes.shape[0]
        with open(destino, "wb") as f:
            f.write(struct.pack("<5Q", MAGIC_DATASET, VERSAO_DATASET, n, d, c))
            f.write(dataset.inputs.astype("<f8").tobytes(order="C"))
            f.write(dataset.labels.astype("<i4").tobytes())
            f.write(dataset.true_quality.astype("<f8").tobytes())
            f.write(dataset.prototypes.astype("<f8").tobytes(order="C"))
        logger.info(f"Conjunto salvo em {destino} ({n} amostras)")
        return destino

    def carregar_dataset(self, caminho: Optional[Caminho] = None) -> DatasetSintetico:
        """Lê o conjunto do formato binário."""
        origem = self.caminho_dataset(caminho)
        dados = _ler_bytes(origem)
        if len(dados) < 40:
            raise ArquivoInvalidoError(f"Cabeçalho incompleto em {origem}")
        magic, versao, n, d, c = struct.unpack_from("<5Q", dados, 0)
        if magic != MAGIC_DATASET:
            raise ArquivoInvalidoError(f"Magic inválido em {origem}")
        if versao != VERSAO_DATASET:
            raise ArquivoInvalidoError(f"Versão {versao} não suportada em {origem}")

        offset = 40
        inputs, offset = _ler_array(dados, offset, "<f8", n * d)
        labels, offset = _ler_array(dados, offset, "<i4", n)
        qualidade, offset = _ler_array(dados, offset, "<f8", n)
        prototipos, offset = _ler_array(dados, offset, "<f8", c * d)
        logger.info(f"Conjunto carregado de {origem} ({n} amostras)")
        return DatasetSintetico(
            inputs.reshape(n, d), labels.astype(np.int64), qualidade, prototipos.reshape(c, d)
        )

    def salvar_checkpoint(self, checkpoint: Checkpoint, caminho: Optional[Caminho] = None) -> str:
        """Grava o checkpoint no formato binário versionado."""
        destino = self.caminho_checkpoint(caminho)
        arrays = checkpoint.arrays()
        nomes = sorted(arrays)
        cabecalho = {
            "arrays": [{"nome": nome, "forma": list(arrays[nome].shape)} for nome in nomes],
            "metadados": checkpoint.metadados()
        }
        texto = json.dumps(cabecalho, sort_keys=True).encode("utf-8")
        with open(destino, "wb") as f:
            f.write(struct.pack("<3Q", MAGIC_CHECKPOINT, VERSAO_CHECKPOINT, len(texto)))
            f.write(texto)
            for nome in nomes:
                f.write(np.ascontiguousarray(arrays[nome], dtype="<f8").tobytes(order="C"))
        logger.info(f"Checkpoint salvo em {destino} (época {checkpoint.epoca})")
        return destino

    def carregar_checkpoint(self, caminho: Optional[Caminho] = None) -> Checkpoint:
        """Lê um checkpoint gravado por salvar_checkpoint."""
        origem = self.caminho_checkpoint(caminho)
        dados = _ler_bytes(origem)
        if len(dados) < 24:
            raise ArquivoInvalidoError(f"Cabeçalho incompleto em {origem}")
        magic, versao, tamanho = struct.unpack_from("<3Q", dados, 0)
        if magic != MAGIC_CHECKPOINT:
            raise ArquivoInvalidoError(f"Magic inválido em {origem}")
        if versao != VERSAO_CHECKPOINT:
            raise ArquivoInvalidoError(f"Versão {versao} não suportada em {origem}")
        try:
            cabecalho = json.loads(dados[24:24 + tamanho].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ArquivoInvalidoError(f"Cabeçalho JSON inválido em {origem}: {e}")

        offset = 24 + tamanho
        arrays = {}
        for item in cabecalho["arrays"]:
            forma = tuple(item["forma"])
            quantidade = int(np.prod(forma)) if forma else 1
            valores, offset = _ler_array(dados, offset, "<f8", quantidade)
            arrays[item["nome"]] = valores.reshape(forma)
        logger.info(f"Checkpoint carregado de {origem}")
        return Checkpoint.from_partes(arrays, cabecalho["metadados"])
