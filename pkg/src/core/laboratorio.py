"""
Laboratório FunFace - orquestra geração, treino, avaliação e análises.

Uso:
    python3 -m src.core.laboratorio <subcomando> [--config arquivo.yaml] [secao.chave=valor ...]
"""
import argparse
import json
import logging
import os
import sys
import time
from typing import List, Optional, Tuple

import numpy as np
from dotenv import load_dotenv

# Adiciona o diretório raiz ao path
sys.path.append(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from src.clients.arquivo_client import ArquivoClient
from src.clients.relatorio_client import RelatorioClient
from src.core.config import RunConfig, carregar_config, chaves_planas
from src.core.erros import LaboratorioError
from src.core.models.avaliacao import PairProtocol
from src.core.models.estado_normalizador import NormalizerState
from src.core.models.lote import ClassPrototypes, EmbeddingBatch
from src.core.models.margem import MarginConfig, Variante
from src.core.models.sintese import AugmentConfig, DatasetSintetico, SynthConfig
from src.core.models.treino import Checkpoint, MetricaEpoca, TrainConfig
from src.core.services import atlas_service, avaliacao_service
from src.core.services import estatisticas_service as estatisticas
from src.core.services import margem_service as margem
from src.core.services import sintese_service as sintese
from src.core.services import treino_service as treino

# Carrega variáveis de ambiente
load_dotenv()

logger = logging.getLogger(__name__)

SUBCOMANDOS = ("generate", "train", "eval", "edc", "atlas", "density", "ablate", "bench-loss")
VARIANTES_BENCH = (Variante.ARC, Variante.ADAFACE, Variante.FUNFACE)


def configurar_logging():
    """Logging em arquivo (LOG_DIR/laboratorio.log) e no console."""
    root = logging.getLogger()
    if root.handlers:
        return
    log_dir = os.getenv("LOG_DIR", "logs")
    os.makedirs(log_dir, exist_ok=True)
    logging.basicConfig(
        level=getattr(logging, os.getenv("LOG_LEVEL", "INFO").upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(os.path.join(log_dir, "laboratorio.log")),
            logging.StreamHandler()
        ]
    )


class ConjuntoAvaliacao:
    """Amostras novas em torno dos protótipos de treino, com embeddings."""

    def __init__(self, dataset: DatasetSintetico, embeddings: np.ndarray):
        self.dataset = dataset
        self.embeddings = embeddings
        sigmas = sorted(set(float(s) for s in dataset.true_quality))
        self.indices_limpos = dataset.indices_nivel(sigmas[0])
        self.indices_degradados = dataset.indices_nivel(sigmas[-1])

    def indices(self, nivel: str) -> Optional[np.ndarray]:
        if nivel == "limpo":
            return self.indices_limpos
        if nivel == "degradado":
            return self.indices_degradados
        return None


class Laboratorio:
    """Executa os subcomandos sobre uma configuração resolvida."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.output_dir = os.getenv("LAB_OUTPUT_DIR", config.saida.diretorio)
        config.saida.diretorio = self.output_dir
        self.relatorios = RelatorioClient(self.output_dir)
        self.arquivos = ArquivoClient(self.output_dir)

    def caminho(self, nome: str) -> str:
        return self.relatorios.caminho(nome)

    def _documento(self, resultados: dict) -> dict:
        """Resultados acompanhados do eco completo da configuração."""
        return {"config": self.config.to_dict(), "resultados": resultados}

    # --- etapas reutilizáveis ---

    def obter_dataset(self, caminho: Optional[str] = None) -> DatasetSintetico:
        if caminho:
            return self.arquivos.carregar_dataset(caminho)
        return sintese.generate(self.config.sintese)

    def obter_checkpoint(self, caminho: Optional[str] = None) -> Checkpoint:
        return self.arquivos.carregar_checkpoint(caminho)

    def executar_treino(
        self,
        dataset: DatasetSintetico,
        config_treino: Optional[TrainConfig] = None,
        checkpoint: Optional[Checkpoint] = None,
        ate_epoca: Optional[int] = None
    ) -> Tuple[Checkpoint, List[MetricaEpoca]]:
        return treino.train(dataset, config_treino or self.config.treino, checkpoint, ate_epoca)

    def conjunto_avaliacao(self, dataset: DatasetSintetico, checkpoint: Checkpoint) -> ConjuntoAvaliacao:
        """Gera o conjunto de avaliação com semente própria e extrai os embeddings."""
        aval = self.config.avaliacao
        config = SynthConfig(
            num_identities=dataset.num_identities,
            samples_per_identity=aval.samples_per_identity,
            input_dim=dataset.input_dim,
            quality_tiers=self.config.sintese.quality_tiers,
            seed=aval.seed
        )
        conjunto = sintese.generate(config, prototipos=dataset.prototypes)
        return ConjuntoAvaliacao(conjunto, treino.extrair_embeddings(checkpoint, conjunto.inputs))

    def protocolo(self, conjunto: ConjuntoAvaliacao, nivel: str, caminho: Optional[str] = None) -> PairProtocol:
        if caminho:
            return self.relatorios.carregar_protocolo(caminho)
        return avaliacao_service.protocolo_todos_pares(
            conjunto.dataset.labels, conjunto.indices(nivel)
        )

    def metricas(
        self,
        conjunto: ConjuntoAvaliacao,
        caminho_protocolo: Optional[str] = None
    ) -> dict:
        """Verificação (acurácia e TAR@FAR) e identificação limpo → degradado."""
        aval = self.config.avaliacao
        protocolo = self.protocolo(conjunto, aval.nivel_verificacao, caminho_protocolo)
        melhor = avaliacao_service.verify(conjunto.embeddings, protocolo)
        tar = avaliacao_service.verify(
            conjunto.embeddings, protocolo, modo=avaliacao_service.MODO_TAR_FAR,
            far_targets=aval.far_targets
        )
        labels = conjunto.dataset.labels
        galeria, sondas = conjunto.indices_limpos, conjunto.indices_degradados
        identificacao = avaliacao_service.identify(
            conjunto.embeddings[sondas], labels[sondas],
            conjunto.embeddings[galeria], labels[galeria],
            aval.ranks
        )
        return {
            "verificacao": {
                "nivel": aval.nivel_verificacao if caminho_protocolo is None else "protocolo",
                "pares": protocolo.tamanho,
                "acuracia": melhor.acuracia,
                "limiar": melhor.limiar,
                "tar_por_far": tar.tar_por_far
            },
            "identificacao": identificacao.to_dict()
        }

    def qualidade(self, conjunto: ConjuntoAvaliacao, checkpoint: Checkpoint) -> np.ndarray:
        fonte = self.config.avaliacao.quality_source
        if fonte == "cr":
            return avaliacao_service.qualidade_cr(
                conjunto.embeddings, conjunto.dataset.labels,
                ClassPrototypes(checkpoint.prototipos), self.config.margem.epsilon
            )
        if fonte == "true_noise":
            return -conjunto.dataset.true_quality
        return conjunto.dataset.true_quality

    # --- subcomandos ---

    def generate(self, args) -> dict:
        dataset = sintese.generate(self.config.sintese)
        destino = self.arquivos.salvar_dataset(dataset, args.saida)
        return {"dataset": destino, "amostras": dataset.tamanho, "identidades": dataset.num_identities}

    def train(self, args) -> dict:
        dataset = self.obter_dataset(args.dataset)
        inicial = self.arquivos.carregar_checkpoint(args.retomar) if args.retomar else None
        checkpoint, metricas = self.executar_treino(dataset, checkpoint=inicial, ate_epoca=args.ate_epoca)

        destino = self.arquivos.salvar_checkpoint(checkpoint, args.saida)
        self.relatorios.escrever_csv(
            ["epoca", "perda_media", "norma_media", "cr_medio", "taxa_clamp", "lr"],
            ([m.epoca, m.perda_media, m.norma_media, m.cr_medio, m.taxa_clamp, m.lr] for m in metricas),
            self.caminho("metricas_treino.csv")
        )
        return {
            "checkpoint": destino,
            "epoca": checkpoint.epoca,
            "stats": checkpoint.stats.to_dict(),
            "metricas": [m.to_dict() for m in metricas]
        }

    def eval(self, args) -> dict:
        dataset = self.obter_dataset(args.dataset)
        checkpoint = self.obter_checkpoint(args.checkpoint)
        conjunto = self.conjunto_avaliacao(dataset, checkpoint)
        resultados = self.metricas(conjunto, args.protocolo)
        self.relatorios.escrever_json(self._documento(resultados), self.caminho("avaliacao.json"))
        return resultados

    def edc(self, args) -> dict:
        aval = self.config.avaliacao
        dataset = self.obter_dataset(args.dataset)
        checkpoint = self.obter_checkpoint(args.checkpoint)
        conjunto = self.conjunto_avaliacao(dataset, checkpoint)
        protocolo = self.protocolo(conjunto, "todos", args.protocolo)
        curva = avaliacao_service.edc(
            conjunto.embeddings, protocolo, self.qualidade(conjunto, checkpoint),
            aval.fmr_target, aval.discard_fractions, aval.quality_source
        )
        self.relatorios.escrever_csv(
            ["discard_fraction", "fnmr"],
            zip(curva.discard_fractions, curva.fnmr_values),
            self.caminho("edc.csv")
        )
        self.relatorios.escrever_json(self._documento(curva.to_dict()), self.caminho("edc.json"))
        return curva.to_dict()

    def atlas(self, args) -> dict:
        mapas = atlas_service.difference_map(self.config.atlas)
        resumo = {}
        for nome, mapa in mapas.items():
            self.relatorios.escrever_csv(
                atlas_service.COLUNAS_CSV, atlas_service.linhas_csv(mapa),
                self.caminho(f"atlas_{nome}.csv")
            )
            resumo[nome] = mapa.resumo()
        self.relatorios.escrever_json(self._documento(resumo), self.caminho("atlas_resumo.json"))
        return resumo

    def density(self, args) -> dict:
        aval = self.config.avaliacao
        dataset = self.obter_dataset(args.dataset)
        checkpoint = self.obter_checkpoint(args.checkpoint)
        conjunto = self.conjunto_avaliacao(dataset, checkpoint)
        mapa = avaliacao_service.norm_utility_map(
            conjunto.embeddings, conjunto.dataset.labels,
            ClassPrototypes(checkpoint.prototipos), checkpoint.stats,
            self.config.margem, bins=tuple(aval.bins), legado=aval.cr_legado
        )
        self.relatorios.escrever_csv(
            ["norm", "cr", "norm_hat", "cr_hat", "label", "true_quality"],
            zip(mapa.norms, mapa.crs, mapa.norm_hat, mapa.cr_hat,
                conjunto.dataset.labels, conjunto.dataset.true_quality),
            self.caminho("densidade.csv")
        )
        bn, bc = mapa.bordas_norma, mapa.bordas_cr
        self.relatorios.escrever_csv(
            ["norm_min", "norm_max", "cr_min", "cr_max", "contagem"],
            (
                [bn[i], bn[i + 1], bc[j], bc[j + 1], int(mapa.histograma[i, j])]
                for i in range(mapa.histograma.shape[0])
                for j in range(mapa.histograma.shape[1])
            ),
            self.caminho("densidade_histograma.csv")
        )
        resultados = {
            "amostras": int(mapa.norms.size),
            "celulas_ocupadas": int(np.count_nonzero(mapa.histograma)),
            "cr_legado": aval.cr_legado
        }
        self.relatorios.escrever_json(self._documento(resultados), self.caminho("densidade.json"))
        return resultados

    def linha_ablacao(
        self,
        dataset: DatasetSintetico,
        margem_config: MarginConfig,
        aumento: AugmentConfig
    ) -> dict:
        """Treina do zero com a margem dada e resume as métricas."""
        base = self.config.treino
        config_treino = TrainConfig.from_dict(base.to_dict(), margem_config, aumento)
        checkpoint, metricas = self.executar_treino(dataset, config_treino)
        resultados = self.metricas(self.conjunto_avaliacao(dataset, checkpoint))
        rank = resultados["identificacao"]["rank"]
        return {
            "variant": margem_config.variant.value,
            "lambda": margem_config.lambda_ if margem_config.variant == Variante.FUNFACE else None,
            "aumento": aumento.p_noise + aumento.p_affine + aumento.p_mask + aumento.p_gray > 0,
            "perda_final": metricas[-1].perda_media,
            "acuracia": resultados["verificacao"]["acuracia"],
            **{f"rank{n}": taxa for n, taxa in rank.items()}
        }

    def ablate(self, args) -> dict:
        abl = self.config.ablacao
        dataset = self.obter_dataset(args.dataset)
        aumentos = [self.config.aumento]
        if abl.sem_aumento:
            aumentos.append(AugmentConfig.desligado())

        linhas = []
        for aumento in aumentos:
            if abl.incluir_adaface:
                linhas.append(self.linha_ablacao(
                    dataset, self.config.margem.com(variant=Variante.ADAFACE), aumento
                ))
            for valor in abl.lambdas:
                logger.info(f"Ablação: FunFace λ={valor}")
                linhas.append(self.linha_ablacao(
                    dataset, self.config.margem.com(variant=Variante.FUNFACE, lambda_=valor), aumento
                ))

        colunas = list(linhas[0].keys())
        self.relatorios.escrever_csv(
            colunas, ([linha[c] for c in colunas] for linha in linhas), self.caminho("ablacao.csv")
        )
        self.relatorios.escrever_json(self._documento({"linhas": linhas}), self.caminho("ablacao.json"))
        return {"linhas": linhas}

    def bench_loss(self, args) -> dict:
        """Cronometra forward+backward da perda por variante no mesmo lote."""
        bench = self.config.bench
        rng = np.random.default_rng(bench.seed)
        centros = rng.standard_normal((bench.num_classes, bench.embedding_dim))
        protos = margem.renormalize_prototypes(ClassPrototypes(centros))
        batch = EmbeddingBatch(
            rng.standard_normal((bench.batch_size, bench.embedding_dim)) * 3.0,
            rng.integers(0, bench.num_classes, size=bench.batch_size)
        )
        geometria = margem.geometria_lote(batch, protos, self.config.margem.epsilon)
        stats = estatisticas.ema_update(NormalizerState(), geometria["norms"], geometria["cr"])

        configs = {variante: self.config.margem.com(variant=variante) for variante in VARIANTES_BENCH}
        tempos = {variante: [] for variante in VARIANTES_BENCH}
        # variantes intercaladas a cada repetição
        for _ in range(bench.repeticoes):
            for variante, config in configs.items():
                inicio = time.perf_counter()
                saida = margem.margin_loss_forward(batch, protos, config, stats)
                margem.margin_loss_backward(batch, protos, config, saida)
                tempos[variante].append(time.perf_counter() - inicio)

        resultados = {}
        for variante in VARIANTES_BENCH:
            resultados[variante.value] = {
                "media_s": float(np.mean(tempos[variante])),
                "desvio_s": float(np.std(tempos[variante])),
                "mediana_s": float(np.median(tempos[variante]))
            }
            logger.info(f"bench-loss {variante.value}: {resultados[variante.value]['mediana_s']:.6f} s (mediana)")
        self.relatorios.escrever_json(self._documento(resultados), self.caminho("bench_loss.json"))
        return resultados

    def executar(self, subcomando: str, args) -> dict:
        metodo = getattr(self, subcomando.replace("-", "_"))
        logger.info(f"Subcomando '{subcomando}' iniciado (saída em {self.output_dir})")
        resultado = metodo(args)
        logger.info(f"Subcomando '{subcomando}' concluído")
        return resultado


def criar_parser() -> argparse.ArgumentParser:
    epilogo = "Chaves de configuração (padrão):\n  " + "\n  ".join(chaves_planas())
    parser = argparse.ArgumentParser(
        prog="laboratorio",
        description="Laboratório de perdas softmax com margem adaptativa (FunFace).",
        epilog=epilogo,
        formatter_class=argparse.RawDescriptionHelpFormatter
    )
    parser.add_argument("subcomando", choices=SUBCOMANDOS)
    parser.add_argument("overrides", nargs="*", help="Overrides secao.chave=valor")
    parser.add_argument("--config", help="Arquivo YAML com o RunConfig")
    parser.add_argument("--dataset", help="Conjunto binário (padrão: gerado da configuração)")
    parser.add_argument("--checkpoint", help="Checkpoint binário (padrão: <saida>/checkpoint.bin)")
    parser.add_argument("--protocolo", help="CSV index_a,index_b,mated")
    parser.add_argument("--retomar", help="Checkpoint a partir do qual retomar o treino")
    parser.add_argument("--ate-epoca", type=int, help="Época (exclusiva) em que interromper o treino")
    parser.add_argument("--saida", help="Arquivo de saída principal (generate/train)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Ponto de entrada do CLI; retorna o código de saída."""
    configurar_logging()
    args = criar_parser().parse_intermixed_args(argv)
    try:
        config = carregar_config(args.config, args.overrides)
        resultado = Laboratorio(config).executar(args.subcomando, args)
    except LaboratorioError as e:
        logger.error(f"Falha em '{args.subcomando}': {e}")
        print(json.dumps(e.to_dict(), sort_keys=True, ensure_ascii=False), file=sys.stderr)
        return e.codigo_saida
    print(json.dumps(resultado, sort_keys=True, ensure_ascii=False, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
