"""
Exceções do laboratório de perdas com margem adaptativa.
"""
from typing import Optional


class LaboratorioError(Exception):
    """Erro base do laboratório."""

    codigo_saida = 1

    def to_dict(self) -> dict:
        """Converte o erro para dicionário (saída estruturada do CLI)."""
        return {
            "erro": type(self).__name__,
            "mensagem": str(self),
        }


class EntradaInvalidaError(LaboratorioError):
    """Entrada rejeitada: formas incompatíveis, norma zero, rótulos inválidos."""

    codigo_saida = 5


class FalhaNumericaError(LaboratorioError):
    """Valor não finito encontrado durante o cálculo."""

    codigo_saida = 4

    def __init__(
        self,
        mensagem: str,
        indice_amostra: Optional[int] = None,
        epoca: Optional[int] = None,
        lote: Optional[int] = None
    ):
        super().__init__(mensagem)
        self.indice_amostra = indice_amostra
        self.epoca = epoca
        self.lote = lote

    def com_contexto(self, epoca: int, lote: int) -> 'FalhaNumericaError':
        """Retorna uma cópia do erro com o contexto de época/lote."""
        return FalhaNumericaError(
            f"{self} (época {epoca}, lote {lote})",
            indice_amostra=self.indice_amostra,
            epoca=epoca,
            lote=lote
        )

    def to_dict(self) -> dict:
        dados = super().to_dict()
        dados.update({
            "indice_amostra": self.indice_amostra,
            "epoca": self.epoca,
            "lote": self.lote
        })
        return dados


class ConfigInvalidaError(LaboratorioError):
    """Configuração inválida; `campo` nomeia a chave ofensora."""

    codigo_saida = 2

    def __init__(self, mensagem: str, campo: Optional[str] = None):
        super().__init__(mensagem)
        self.campo = campo

    def to_dict(self) -> dict:
        dados = super().to_dict()
        dados["campo"] = self.campo
        return dados


class ArquivoInvalidoError(LaboratorioError):
    """Arquivo ausente ou com cabeçalho incorreto."""

    codigo_saida = 3


class AlvoInatingivelError(LaboratorioError):
    """Alvo de FMR/FAR menor que a resolução dos pares não-mated."""

    codigo_saida = 5
