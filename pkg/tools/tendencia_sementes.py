"""
Varredura multi-semente: AdaFace vs FunFace(λ) no nível degradado.

Para cada semente treina cada variante com a mesma configuração e mede o
Rank-1 das sondas degradadas contra a galeria limpa. Reporta medianas e,
por semente, a diferença FunFace − AdaFace.

Uso:
    python3 tools/tendencia_sementes.py --sementes 0 1 2 3 4 --lambdas 0.1 0.3 0.9
"""
import argparse
import json
import logging
import os
import sys
from typing import Dict, List, Optional

import numpy as np

# Adiciona o diretório raiz ao path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.core.config import RunConfig, carregar_config
from src.core.erros import LaboratorioError
from src.core.laboratorio import Laboratorio, configurar_logging
from src.core.models.margem import Variante

logger = logging.getLogger(__name__)


class TendenciaSementes:
    """Executa a comparação de variantes sobre várias sementes."""

    def __init__(self, config: RunConfig):
        self.config = config

    def _config_semente(self, semente: int) -> RunConfig:
        dados = self.config.to_dict()
        dados["sintese"]["seed"] = semente
        dados["treino"]["seed"] = semente
        return RunConfig.from_dict(dados)

    def rank1_degradado(self, config: RunConfig, variante: Variante, lambda_: Optional[float] = None) -> float:
        laboratorio = Laboratorio(config)
        alteracoes = {"variant": variante}
        if lambda_ is not None:
            alteracoes["lambda_"] = lambda_
        margem = config.margem.com(**alteracoes)
        dataset = laboratorio.obter_dataset()
        linha = laboratorio.linha_ablacao(dataset, margem, config.aumento)
        return float(linha["rank1"])

    def executar(self, sementes: List[int], lambdas: List[float]) -> dict:
        """
        Returns:
            dict: Rank-1 por semente e variante, medianas e pior regressão
        """
        por_semente: Dict[str, Dict[str, float]] = {}
        for semente in sementes:
            config = self._config_semente(semente)
            linha = {"adaface": self.rank1_degradado(config, Variante.ADAFACE)}
            for valor in lambdas:
                linha[f"funface_{valor:g}"] = self.rank1_degradado(config, Variante.FUNFACE, valor)
            por_semente[str(semente)] = linha
            logger.info(f"Semente {semente}: {linha}")

        chaves = list(next(iter(por_semente.values())).keys())
        medianas = {
            chave: float(np.median([linha[chave] for linha in por_semente.values()]))
            for chave in chaves
        }
        pior_regressao = {
            chave: float(min(linha[chave] - linha["adaface"] for linha in por_semente.values()))
            for chave in chaves if chave != "adaface"
        }
        return {"por_semente": por_semente, "medianas": medianas, "pior_regressao": pior_regressao}


def main(argv: Optional[List[str]] = None) -> int:
    configurar_logging()
    parser = argparse.ArgumentParser(description="Tendência multi-semente AdaFace vs FunFace")
    parser.add_argument("overrides", nargs="*", help="Overrides secao.chave=valor")
    parser.add_argument("--config", help="Arquivo YAML com o RunConfig")
    parser.add_argument("--sementes", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    parser.add_argument("--lambdas", type=float, nargs="+", default=[0.1, 0.3, 0.9])
    args = parser.parse_intermixed_args(argv)
    try:
        config = carregar_config(args.config, args.overrides)
        resultado = TendenciaSementes(config).executar(args.sementes, args.lambdas)
    except LaboratorioError as e:
        logger.error(f"Falha na varredura: {e}")
        print(json.dumps(e.to_dict(), sort_keys=True, ensure_ascii=False), file=sys.stderr)
        return e.codigo_saida
    print(json.dumps(resultado, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
