"""
Serviço de treino: laço determinístico de SGD com momento ligando encoder,
perda com margem e estado EMA.
"""
import logging
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from src.core.erros import EntradaInvalidaError, FalhaNumericaError
from src.core.models.estado_normalizador import NormalizerState
from src.core.models.lote import ClassPrototypes, EmbeddingBatch
from src.core.models.sintese import DatasetSintetico
from src.core.models.treino import Checkpoint, MetricaEpoca, TrainConfig
from src.core.services import encoder_service as encoder
from src.core.services import estatisticas_service as estatisticas
from src.core.services import margem_service as margem
from src.core.services import sintese_service as sintese

logger = logging.getLogger(__name__)

TAXA_CLAMP_ALTA = 0.5


def sgd_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    velocity: Dict[str, np.ndarray],
    lr: float,
    momentum: float,
    weight_decay: float
) -> Tuple[Dict[str, np.ndarray], Dict[str, np.ndarray]]:
    """
    Passo de SGD com momento clássico.

    v ← momentum·v + g + wd·p;  p ← p − lr·v

    Returns:
        Tuple[dict, dict]: Novos parâmetros e nova velocidade
    """
    novos_params = {}
    nova_velocidade = {}
    for nome, valor in params.items():
        grad = grads[nome]
        if grad.shape != valor.shape or velocity[nome].shape != valor.shape:
            raise EntradaInvalidaError(
                f"Formas incompatíveis em '{nome}': parâmetro {valor.shape}, "
                f"gradiente {grad.shape}, velocidade {velocity[nome].shape}"
            )
        if not np.all(np.isfinite(grad)):
            raise FalhaNumericaError(f"Gradiente não finito no parâmetro '{nome}'")
        v = momentum * velocity[nome] + grad + weight_decay * valor
        nova_velocidade[nome] = v
        novos_params[nome] = valor - lr * v
    return novos_params, nova_velocidade


def inicializar_checkpoint(dataset: DatasetSintetico, config: TrainConfig) -> Checkpoint:
    """Encoder aleatório, protótipos uniformes na esfera e velocidades nulas."""
    rng = sintese.gerador_contador(config.seed, sintese.DOMINIO_INICIALIZACAO)
    params = encoder.inicializar_encoder(
        dataset.input_dim, config.embedding_dim, config.hidden_dim, rng
    )
    prototipos = rng.standard_normal((dataset.num_identities, config.embedding_dim))
    prototipos /= np.linalg.norm(prototipos, axis=1, keepdims=True)

    velocidade = {nome: np.zeros_like(valor) for nome, valor in params.items()}
    velocidade["prototipos"] = np.zeros_like(prototipos)
    return Checkpoint(
        encoder=params,
        prototipos=prototipos,
        velocidade=velocidade,
        stats=NormalizerState(ema_momentum=config.ema_momentum),
        epoca=0,
        passo=0,
        seed=config.seed
    )


def _passo_lote(
    ckpt: Checkpoint,
    inputs: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig,
    lr: float
) -> dict:
    z, cache = encoder.toy_encoder_forward(ckpt.encoder, inputs)
    batch = EmbeddingBatch(z, labels)
    protos = ClassPrototypes(ckpt.prototipos)
    mc = config.margin_config

    # atualiza a EMA com o lote atual e só depois normaliza
    geometria = margem.geometria_lote(batch, protos, mc.epsilon, com_cr=True)
    ckpt.stats = estatisticas.ema_update(ckpt.stats, geometria["norms"], geometria["cr"])

    saida = margem.margin_loss_forward(batch, protos, mc, ckpt.stats, geometria=geometria)
    margem.margin_loss_backward(batch, protos, mc, saida)
    grads, _ = encoder.toy_encoder_backward(ckpt.encoder, cache, saida.grad_features)

    vel_encoder = {nome: ckpt.velocidade[nome] for nome in ckpt.encoder}
    ckpt.encoder, vel_encoder = sgd_step(
        ckpt.encoder, grads, vel_encoder, lr, config.momentum, config.weight_decay
    )
    novos, vel_protos = sgd_step(
        {"prototipos": ckpt.prototipos},
        {"prototipos": saida.grad_centers},
        {"prototipos": ckpt.velocidade["prototipos"]},
        lr, config.momentum, config.weight_decay
    )
    ckpt.prototipos = margem.renormalize_prototypes(ClassPrototypes(novos["prototipos"])).centers
    ckpt.velocidade = {**vel_encoder, **vel_protos}
    ckpt.passo += 1

    return {
        "perdas": saida.per_sample_loss,
        "norms": geometria["norms"],
        "crs": geometria["cr"],
        "clamp": estatisticas.taxa_ativacao_clamp(geometria["cos_pos"], geometria["cos_nn"]) * batch.tamanho
    }


def train(
    dataset: DatasetSintetico,
    config: TrainConfig,
    checkpoint: Optional[Checkpoint] = None,
    ate_epoca: Optional[int] = None,
    ao_fim_epoca: Optional[Callable[[MetricaEpoca], None]] = None
) -> Tuple[Checkpoint, List[MetricaEpoca]]:
    """
    Treina o encoder e os protótipos com mini-lotes embaralhados.

    Por lote: aumento → encoder → atualização EMA → forward/backward da
    perda → passo de SGD → renormalização dos protótipos.

    Args:
        dataset: Conjunto de treino
        config: Configuração de treino
        checkpoint: Checkpoint a retomar (None inicia do zero)
        ate_epoca: Época (exclusiva) em que parar; padrão config.epochs
        ao_fim_epoca: Callback chamado com a métrica de cada época

    Returns:
        Tuple[Checkpoint, List[MetricaEpoca]]: Estado final e métricas das
        épocas executadas nesta chamada
    """
    ckpt = checkpoint if checkpoint is not None else inicializar_checkpoint(dataset, config)
    if ckpt.prototipos.shape[0] != dataset.num_identities:
        raise EntradaInvalidaError(
            f"Checkpoint com {ckpt.prototipos.shape[0]} classes para conjunto com "
            f"{dataset.num_identities} identidades"
        )
    fim = config.epochs if ate_epoca is None else min(ate_epoca, config.epochs)
    metricas = []

    logger.info(
        f"Iniciando treino: variante {config.margin_config.variant.value}, "
        f"épocas {ckpt.epoca}..{fim - 1}, {dataset.tamanho} amostras"
    )

    while ckpt.epoca < fim:
        epoca = ckpt.epoca
        lr = config.lr_da_epoca(epoca)
        ordem = sintese.gerador_contador(
            config.seed, sintese.DOMINIO_EMBARALHAMENTO, 0, epoca
        ).permutation(dataset.tamanho)

        soma_perda = soma_norma = soma_cr = soma_clamp = 0.0
        for lote, inicio in enumerate(range(0, dataset.tamanho, config.batch_size)):
            indices = ordem[inicio:inicio + config.batch_size]
            inputs = sintese.augmentar_lote(
                dataset, indices, config.augment_config, config.seed, epoca
            )
            try:
                resultado = _passo_lote(ckpt, inputs, dataset.labels[indices], config, lr)
            except FalhaNumericaError as e:
                logger.error(f"Falha numérica na época {epoca}, lote {lote}: {e}")
                raise e.com_contexto(epoca, lote) from e

            soma_perda += float(np.sum(resultado["perdas"]))
            soma_norma += float(np.sum(resultado["norms"]))
            soma_cr += float(np.sum(resultado["crs"]))
            soma_clamp += resultado["clamp"]
            logger.debug(
                f"Época {epoca} lote {lote}: perda {np.mean(resultado['perdas']):.4f}"
            )

        ckpt.epoca += 1
        n = dataset.tamanho
        metrica = MetricaEpoca(
            epoca=epoca,
            perda_media=soma_perda / n,
            norma_media=soma_norma / n,
            cr_medio=soma_cr / n,
            taxa_clamp=soma_clamp / n,
            lr=lr
        )
        metricas.append(metrica)
        logger.info(
            f"Época {epoca}: perda {metrica.perda_media:.4f} - ‖z‖ {metrica.norma_media:.3f} - "
            f"CR {metrica.cr_medio:.3f} - clamp {metrica.taxa_clamp:.2%} - lr {lr:g}"
        )
        if metrica.taxa_clamp > TAXA_CLAMP_ALTA:
            logger.warning(f"Época {epoca}: clamp do CR ativo em {metrica.taxa_clamp:.0%} das amostras")
        if ao_fim_epoca is not None:
            ao_fim_epoca(metrica)

    return ckpt, metricas


def extrair_embeddings(checkpoint: Checkpoint, inputs: np.ndarray) -> np.ndarray:
    """Embeddings brutos do encoder treinado (sem aumento; EMA intocada)."""
    z, _ = encoder.toy_encoder_forward(checkpoint.encoder, inputs)
    return z
