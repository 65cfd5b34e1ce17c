"""
Serviço de síntese: gerador de clusters de identidade e aumentos vetoriais.

Os aumentos são análogos vetoriais dos aumentos de imagem (ruído, escala de
cinza, máscara e transformação afim), mantendo as probabilidades de treino.
"""
import logging
from typing import Optional

import numpy as np

from src.core.models.sintese import AugmentConfig, DatasetSintetico, SynthConfig, SynthSample

logger = logging.getLogger(__name__)

MASCARA_64 = (1 << 64) - 1

# domínios do RNG por contador
DOMINIO_AUMENTO = 1
DOMINIO_EMBARALHAMENTO = 2
DOMINIO_INICIALIZACAO = 3


def gerador_contador(seed: int, dominio: int, indice: int = 0, epoca: int = 0) -> np.random.Generator:
    """
    Cria um gerador Philox indexado por (seed, domínio, índice, época).

    O índice e a época ocupam as palavras altas do contador, de modo que o
    fluxo de cada chave é independente da ordem em que as chaves são usadas.
    """
    bit_gen = np.random.Philox(
        key=np.array([seed & MASCARA_64, dominio & MASCARA_64], dtype=np.uint64),
        counter=np.array([0, 0, indice & MASCARA_64, epoca & MASCARA_64], dtype=np.uint64)
    )
    return np.random.Generator(bit_gen)


class EstadoRng:
    """Chave do RNG de aumento de uma amostra em uma época."""

    def __init__(self, seed: int, indice: int, epoca: int):
        self.seed = seed
        self.indice = indice
        self.epoca = epoca

    def gerador(self) -> np.random.Generator:
        return gerador_contador(self.seed, DOMINIO_AUMENTO, self.indice, self.epoca)


def _contagens_niveis(n: int, fracoes) -> np.ndarray:
    # arredondamento pelo maior resto, soma exata n
    brutas = np.asarray(fracoes, dtype=np.float64) * n
    contagens = np.floor(brutas).astype(np.int64)
    restantes = n - int(contagens.sum())
    ordem = np.argsort(-(brutas - contagens), kind="stable")
    contagens[ordem[:restantes]] += 1
    return contagens


def generate(config: SynthConfig, prototipos: Optional[np.ndarray] = None) -> DatasetSintetico:
    """
    Gera o conjunto sintético.

    Cada amostra é o protótipo unitário da identidade mais ruído gaussiano
    isotrópico com o sigma do seu nível de qualidade, reprojetada na esfera
    unitária: o ruído reduz o alinhamento com o protótipo sem inflar a norma
    da entrada.

    Args:
        config: Configuração do conjunto
        prototipos: Protótipos de identidade a reutilizar (conjunto de
            avaliação); se None, são sorteados na esfera unitária

    Returns:
        DatasetSintetico: Amostras, rótulos, qualidade verdadeira e protótipos
    """
    rng = np.random.default_rng(config.seed)
    if prototipos is None:
        prototipos = rng.standard_normal((config.num_identities, config.input_dim))
        prototipos /= np.linalg.norm(prototipos, axis=1, keepdims=True)
    else:
        prototipos = np.asarray(prototipos, dtype=np.float64)

    n = config.samples_per_identity
    contagens = _contagens_niveis(n, [f for f, _ in config.quality_tiers])
    sigmas = np.repeat([s for _, s in config.quality_tiers], contagens)

    inputs = np.empty((config.num_identities * n, config.input_dim))
    for identidade in range(config.num_identities):
        ruido = rng.standard_normal((n, config.input_dim)) * sigmas[:, None]
        inputs[identidade * n:(identidade + 1) * n] = prototipos[identidade] + ruido
    inputs /= np.linalg.norm(inputs, axis=1, keepdims=True)

    labels = np.repeat(np.arange(config.num_identities), n)
    qualidade = np.tile(sigmas, config.num_identities)

    logger.info(
        f"Conjunto gerado: {inputs.shape[0]} amostras, {config.num_identities} identidades, "
        f"níveis {contagens.tolist()} por identidade"
    )
    return DatasetSintetico(inputs, labels, qualidade, prototipos)


def _escala_cinza(x: np.ndarray) -> np.ndarray:
    completo = (x.size // 3) * 3
    saida = x.copy()
    if completo:
        trincas = x[:completo].reshape(-1, 3)
        saida[:completo] = np.repeat(trincas.mean(axis=1), 3)
    if completo < x.size:
        saida[completo:] = x[completo:].mean()
    return saida


def _afim(x: np.ndarray, config: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    i, j = rng.choice(x.size, size=2, replace=False)
    angulo = rng.uniform(-config.rotation_max, config.rotation_max)
    c, s = np.cos(angulo), np.sin(angulo)
    saida = x.copy()
    saida[i] = c * x[i] - s * x[j]
    saida[j] = s * x[i] + c * x[j]
    saida += rng.uniform(-config.translation_max, config.translation_max, size=x.size)
    return saida


def _ruido(x: np.ndarray, config: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    # média ponderada da amostra com uma máscara de ruído; o jitter de escala
    # cobre os aumentos fotométricos/de escala
    peso = rng.uniform(0.0, config.noise_weight_max)
    mascara = rng.standard_normal(x.size) * config.noise_scale
    fator = rng.uniform(1.0 - config.scale_jitter, 1.0 + config.scale_jitter)
    return ((1.0 - peso) * x + peso * mascara) * fator


def _mascara(x: np.ndarray, config: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    fracao = rng.uniform(config.mask_fraction_min, config.mask_fraction_max)
    comprimento = min(x.size, max(0, int(round(fracao * x.size))))
    inicio = int(rng.integers(0, x.size - comprimento + 1))
    saida = x.copy()
    saida[inicio:inicio + comprimento] = 0.0
    return saida


def augment(sample: SynthSample, config: AugmentConfig, rng_state) -> SynthSample:
    """
    Aplica os aumentos vetoriais de forma independente.

    As quatro decisões (cinza, afim, ruído, máscara) são sorteadas antes das
    magnitudes, então dependem apenas do estado do RNG.

    Args:
        sample: Amostra original
        config: Probabilidades e magnitudes
        rng_state: EstadoRng ou np.random.Generator

    Returns:
        SynthSample: Nova amostra (mesmo rótulo e qualidade)
    """
    rng = rng_state.gerador() if isinstance(rng_state, EstadoRng) else rng_state
    decisoes = rng.random(4)
    x = sample.input_vector.copy()

    if decisoes[0] < config.p_gray:
        x = _escala_cinza(x)
    if decisoes[1] < config.p_affine:
        x = _afim(x, config, rng)
    if decisoes[2] < config.p_noise:
        x = _ruido(x, config, rng)
    if decisoes[3] < config.p_mask:
        x = _mascara(x, config, rng)

    return SynthSample(x, sample.label, sample.true_quality)


def augmentar_lote(
    dataset: DatasetSintetico,
    indices: np.ndarray,
    config: AugmentConfig,
    seed: int,
    epoca: int
) -> np.ndarray:
    """Aumenta as amostras indicadas; cada uma usa o RNG (seed, índice, época)."""
    saida = np.empty((len(indices), dataset.input_dim))
    for linha, indice in enumerate(indices):
        amostra = augment(dataset.amostra(int(indice)), config, EstadoRng(seed, int(indice), epoca))
        saida[linha] = amostra.input_vector
    return saida
