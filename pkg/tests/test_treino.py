"""
Testes do laço de treino, do encoder e da retomada por checkpoint.
"""
import os
import shutil
import tempfile

import numpy as np
import pytest

from src.clients.arquivo_client import ArquivoClient
from src.core.erros import ConfigInvalidaError, EntradaInvalidaError, FalhaNumericaError
from src.core.models.margem import MarginConfig, Variante
from src.core.models.sintese import AugmentConfig, SynthConfig
from src.core.models.treino import TrainConfig
from src.core.services import avaliacao_service as avaliacao
from src.core.services import encoder_service as encoder
from src.core.services import sintese_service as sintese
from src.core.services import treino_service as treino


def dataset_pequeno():
    return sintese.generate(SynthConfig(num_identities=4, samples_per_identity=12, input_dim=10, seed=1))


def config_pequena(**alteracoes) -> TrainConfig:
    dados = dict(
        epochs=4,
        batch_size=16,
        lr=0.05,
        lr_drop_epochs=[2],
        embedding_dim=6,
        hidden_dim=12,
        margin_config=MarginConfig(variant=Variante.FUNFACE, s=16.0),
        augment_config=AugmentConfig()
    )
    dados.update(alteracoes)
    return TrainConfig(**dados)


class TestSgdStep:
    """Testes do passo de SGD com momento."""

    def test_dois_passos(self):
        """Testa v ← μv + g + wd·p e p ← p − lr·v em dois passos."""
        params = {"p": np.array([1.0])}
        grads = {"p": np.array([0.5])}
        velocidade = {"p": np.array([0.0])}
        params, velocidade = treino.sgd_step(params, grads, velocidade, 0.1, 0.9, 0.1)
        assert velocidade["p"][0] == pytest.approx(0.6)
        assert params["p"][0] == pytest.approx(0.94)
        params, velocidade = treino.sgd_step(params, grads, velocidade, 0.1, 0.9, 0.1)
        assert velocidade["p"][0] == pytest.approx(1.134)
        assert params["p"][0] == pytest.approx(0.8266)

    def test_lr_zero_mantem_parametros(self):
        """Testa que lr=0 não altera os parâmetros."""
        params = {"p": np.array([1.0, -2.0])}
        novos, _ = treino.sgd_step(params, {"p": np.ones(2)}, {"p": np.zeros(2)}, 0.0, 0.9, 0.0)
        assert np.array_equal(novos["p"], params["p"])

    def test_decaimento_geometrico(self):
        """Testa que gradiente nulo com momentum=0 decai por (1 − lr·wd) a cada passo."""
        inicial = np.array([2.0, -1.0, 0.5])
        params = {"p": inicial.copy()}
        velocidade = {"p": np.zeros(3)}
        for _ in range(10):
            params, velocidade = treino.sgd_step(params, {"p": np.zeros(3)}, velocidade, 0.1, 0.0, 5e-4)
        assert np.allclose(params["p"], inicial * (1.0 - 0.1 * 5e-4) ** 10, rtol=1e-12)

    def test_formas_incompativeis(self):
        """Testa rejeição de gradiente com forma diferente."""
        with pytest.raises(EntradaInvalidaError):
            treino.sgd_step({"p": np.zeros(2)}, {"p": np.zeros(3)}, {"p": np.zeros(2)}, 0.1, 0.9, 0.0)

    def test_gradiente_nao_finito(self):
        """Testa FalhaNumericaError com gradiente NaN."""
        with pytest.raises(FalhaNumericaError):
            treino.sgd_step(
                {"p": np.zeros(2)}, {"p": np.array([np.nan, 0.0])}, {"p": np.zeros(2)}, 0.1, 0.9, 0.0
            )


class TestEncoder:
    """Testes do encoder de brinquedo."""

    def setup_method(self):
        rng = np.random.default_rng(11)
        self.params = encoder.inicializar_encoder(5, 3, 7, rng)
        self.params["b1"] = rng.standard_normal(7) * 0.1
        self.params["b2"] = rng.standard_normal(3) * 0.1
        self.x = rng.standard_normal((4, 5))
        self.peso = rng.standard_normal((4, 3))

    def _perda(self, params, x) -> float:
        z, _ = encoder.toy_encoder_forward(params, x)
        return float(np.sum(z * self.peso))

    def test_gradiente_diferencas_finitas(self):
        """Testa gradientes analíticos contra diferenças centrais (passo 1e-5)."""
        _, cache = encoder.toy_encoder_forward(self.params, self.x)
        grads, grad_x = encoder.toy_encoder_backward(self.params, cache, self.peso)
        passo = 1e-5
        for nome, valor in self.params.items():
            numerico = np.zeros_like(valor)
            for indice in np.ndindex(valor.shape):
                mais = {k: v.copy() for k, v in self.params.items()}
                menos = {k: v.copy() for k, v in self.params.items()}
                mais[nome][indice] += passo
                menos[nome][indice] -= passo
                numerico[indice] = (self._perda(mais, self.x) - self._perda(menos, self.x)) / (2 * passo)
            assert np.allclose(grads[nome], numerico, rtol=1e-5, atol=1e-8), nome

        numerico_x = np.zeros_like(self.x)
        for indice in np.ndindex(self.x.shape):
            mais, menos = self.x.copy(), self.x.copy()
            mais[indice] += passo
            menos[indice] -= passo
            numerico_x[indice] = (self._perda(self.params, mais) - self._perda(self.params, menos)) / (2 * passo)
        assert np.allclose(grad_x, numerico_x, rtol=1e-5, atol=1e-8)

    def test_vetor_unico(self):
        """Testa entrada 1-D com saída 1-D."""
        z, cache = encoder.toy_encoder_forward(self.params, self.x[0])
        assert z.shape == (3,)
        _, grad_x = encoder.toy_encoder_backward(self.params, cache, self.peso[0])
        assert grad_x.shape == (5,)

    def test_identidade(self):
        """Testa z = tanh(x) no encoder identidade."""
        params = encoder.inicializar_identidade(5, 8)
        z, _ = encoder.toy_encoder_forward(params, self.x)
        assert np.allclose(z, np.tanh(self.x))

    def test_dimensao_incompativel(self):
        """Testa rejeição de entrada com dimensão errada."""
        with pytest.raises(EntradaInvalidaError):
            encoder.toy_encoder_forward(self.params, np.zeros((2, 6)))


class TestTrainConfig:
    """Testes da configuração de treino."""

    def test_cronograma_lr(self):
        """Testa as quedas de lr ao fim das épocas listadas."""
        config = TrainConfig(lr=0.1)
        assert config.lr_da_epoca(13) == pytest.approx(0.1)
        assert config.lr_da_epoca(14) == pytest.approx(0.01)
        assert config.lr_da_epoca(28) == pytest.approx(1e-4)

    def test_quedas_fora_de_ordem(self):
        """Testa rejeição de lr_drop_epochs não crescente."""
        with pytest.raises(ConfigInvalidaError) as erro:
            TrainConfig(epochs=10, lr_drop_epochs=[5, 3])
        assert erro.value.campo == "treino.lr_drop_epochs"

    def test_hidden_padrao(self):
        """Testa hidden_dim padrão de 4× embedding_dim."""
        assert TrainConfig(embedding_dim=16).hidden_dim == 64


class TestTrain:
    """Testes do laço de treino."""

    def setup_method(self):
        self.dataset = dataset_pequeno()
        self.temp_dir = tempfile.mkdtemp()

    def teardown_method(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_deterministico(self):
        """Testa que duas execuções produzem checkpoints idênticos bit a bit."""
        a, metricas_a = treino.train(self.dataset, config_pequena())
        b, metricas_b = treino.train(self.dataset, config_pequena())
        assert a.igual(b)
        assert [m.to_dict() for m in metricas_a] == [m.to_dict() for m in metricas_b]

    def test_metricas_por_epoca(self):
        """Testa uma métrica por época com o lr do cronograma."""
        _, metricas = treino.train(self.dataset, config_pequena())
        assert [m.epoca for m in metricas] == [0, 1, 2, 3]
        assert [m.lr for m in metricas] == pytest.approx([0.05, 0.05, 0.005, 0.005])
        for metrica in metricas:
            assert np.isfinite(metrica.perda_media)
            assert 0.0 <= metrica.taxa_clamp <= 1.0

    def test_prototipos_unitarios(self):
        """Testa que os protótipos permanecem na esfera unitária."""
        ckpt, _ = treino.train(self.dataset, config_pequena())
        assert np.allclose(np.linalg.norm(ckpt.prototipos, axis=1), 1.0)
        assert ckpt.stats.initialized
        assert ckpt.epoca == 4
        assert ckpt.passo == 4 * 3

    def test_lr_zero_congela_parametros(self):
        """Testa que train com lr=0 mantém encoder e protótipos iniciais."""
        config = config_pequena(lr=0.0)
        inicial = treino.inicializar_checkpoint(self.dataset, config)
        ckpt, metricas = treino.train(self.dataset, config)
        for nome, valor in inicial.encoder.items():
            assert np.array_equal(ckpt.encoder[nome], valor), nome
        # protótipos já unitários; a renormalização só mexe no último bit
        assert np.allclose(ckpt.prototipos, inicial.prototipos, rtol=0.0, atol=1e-12)
        assert all(np.isfinite(m.perda_media) for m in metricas)

    def test_retomada_bit_identica(self):
        """Testa salvar → carregar → retomar idêntico ao treino sem interrupção."""
        config = config_pequena()
        completo, metricas_completo = treino.train(self.dataset, config)

        parcial, metricas_parte1 = treino.train(self.dataset, config, ate_epoca=2)
        arquivos = ArquivoClient(self.temp_dir)
        arquivos.salvar_checkpoint(parcial)
        carregado = arquivos.carregar_checkpoint()
        retomado, metricas_parte2 = treino.train(self.dataset, config, checkpoint=carregado)

        assert retomado.igual(completo)
        assert [m.to_dict() for m in metricas_parte1 + metricas_parte2] == [
            m.to_dict() for m in metricas_completo
        ]

    def test_callback_fim_epoca(self):
        """Testa o callback chamado ao fim de cada época."""
        vistas = []
        treino.train(self.dataset, config_pequena(epochs=2, lr_drop_epochs=[]), ao_fim_epoca=vistas.append)
        assert [m.epoca for m in vistas] == [0, 1]

    def test_checkpoint_incompativel(self):
        """Testa rejeição de checkpoint com número de classes diferente."""
        outro = sintese.generate(SynthConfig(num_identities=3, samples_per_identity=4, input_dim=10))
        ckpt = treino.inicializar_checkpoint(outro, config_pequena())
        with pytest.raises(EntradaInvalidaError):
            treino.train(self.dataset, config_pequena(), checkpoint=ckpt)

    def test_extrair_embeddings(self):
        """Testa que a extração não altera o estado EMA."""
        ckpt, _ = treino.train(self.dataset, config_pequena(epochs=1, lr_drop_epochs=[]))
        antes = ckpt.stats.to_dict()
        z = treino.extrair_embeddings(ckpt, self.dataset.inputs)
        assert z.shape == (self.dataset.tamanho, 6)
        assert ckpt.stats.to_dict() == antes

    @pytest.mark.lento
    def test_treino_completo(self):
        """Testa a configuração padrão: perda final < 0.3× inicial e acurácia limpa ≥ 0.95."""
        dataset = sintese.generate(SynthConfig())
        config = TrainConfig(margin_config=MarginConfig(variant=Variante.FUNFACE, lambda_=0.1))
        ckpt, metricas = treino.train(dataset, config)
        assert metricas[-1].perda_media < 0.3 * metricas[0].perda_media

        avaliacao_ds = sintese.generate(
            SynthConfig(samples_per_identity=16, seed=1000), prototipos=dataset.prototypes
        )
        limpos = avaliacao_ds.indices_nivel(0.05)
        z = treino.extrair_embeddings(ckpt, avaliacao_ds.inputs)
        protocolo = avaliacao.protocolo_todos_pares(avaliacao_ds.labels, limpos)
        resultado = avaliacao.verify(z, protocolo, avaliacao.MODO_MELHOR_LIMIAR)
        assert resultado.acuracia >= 0.95

        repetido, _ = treino.train(dataset, config)
        assert repetido.igual(ckpt)


class TestTendenciasTreino:
    """Testes de tendência do treino padrão (lentos)."""

    @pytest.mark.lento
    @pytest.mark.parametrize("variante", list(Variante))
    def test_perda_finita_em_todas_as_variantes(self, variante):
        """Testa perda finita em todas as épocas para cada variante com a configuração padrão."""
        dataset = sintese.generate(SynthConfig())
        config = TrainConfig(margin_config=MarginConfig().com(variant=variante))
        _, metricas = treino.train(dataset, config)
        assert len(metricas) == config.epochs
        assert all(np.isfinite(m.perda_media) for m in metricas)

    @pytest.mark.lento
    def test_cr_cresce_ao_longo_do_treino(self):
        """Testa CR médio do último terço das épocas maior que o do primeiro terço."""
        dataset = sintese.generate(SynthConfig())
        config = TrainConfig()
        _, metricas = treino.train(dataset, config)
        terco = config.epochs // 3
        inicio = np.mean([m.cr_medio for m in metricas[:terco]])
        fim = np.mean([m.cr_medio for m in metricas[-terco:]])
        assert fim > inicio

    @pytest.mark.lento
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_norma_limpa_excede_degradada(self, seed):
        """Testa ‖z‖ médio do nível limpo acima do nível degradado após o treino."""
        dataset = sintese.generate(SynthConfig(seed=seed))
        ckpt, _ = treino.train(dataset, TrainConfig(seed=seed))
        avaliacao_ds = sintese.generate(
            SynthConfig(samples_per_identity=16, seed=1000 + seed), prototipos=dataset.prototypes
        )
        normas = np.linalg.norm(treino.extrair_embeddings(ckpt, avaliacao_ds.inputs), axis=1)
        limpo = normas[avaliacao_ds.indices_nivel(0.05)].mean()
        degradado = normas[avaliacao_ds.indices_nivel(0.6)].mean()
        assert limpo > degradado
