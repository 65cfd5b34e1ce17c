"""
Testes da avaliação biométrica contra enumerações de força bruta.
"""
import math

import numpy as np
import pytest

from src.core.erros import AlvoInatingivelError, EntradaInvalidaError
from src.core.models.avaliacao import PairProtocol
from src.core.models.estado_normalizador import NormalizerState
from src.core.models.lote import ClassPrototypes
from src.core.models.margem import MarginConfig
from src.core.services import avaliacao_service as avaliacao


def instancia(rng, identidades=8, por_identidade=5, dim=6, ruido=0.8):
    centros = rng.standard_normal((identidades, dim))
    labels = np.repeat(np.arange(identidades), por_identidade)
    embeddings = centros[labels] + ruido * rng.standard_normal((labels.size, dim))
    return embeddings, labels


def unitarios(embeddings):
    return embeddings / np.linalg.norm(embeddings, axis=1, keepdims=True)


def oracle_scores(embeddings, protocolo):
    unit = unitarios(embeddings)
    return np.array([
        float(np.dot(unit[a], unit[b])) for a, b in zip(protocolo.index_a, protocolo.index_b)
    ])


def oracle_melhor_acuracia(scores, mated):
    # cada score como limiar, mais um abaixo de todos
    candidatos = np.concatenate([[scores.min() - 1.0], scores])
    corretos = (scores[None, :] > candidatos[:, None]) == mated[None, :]
    return float(corretos.mean(axis=1).max())


def oracle_limiar(nao_mated, alvo):
    nao_mated = np.asarray(nao_mated)
    if alvo < 1.0 / nao_mated.size:
        return None
    taxas = (nao_mated[None, :] > nao_mated[:, None]).mean(axis=1)
    return float(nao_mated[taxas <= alvo].min())


def oracle_rank(similaridades, gallery_labels, probe_labels, ranks):
    identidades = sorted(set(gallery_labels.tolist()))
    acertos = {r: 0 for r in ranks}
    avaliados = excluidos = 0
    for linha, verdadeiro in enumerate(probe_labels):
        if verdadeiro not in identidades:
            excluidos += 1
            continue
        avaliados += 1
        melhor = {
            ident: max(similaridades[linha, j] for j in range(len(gallery_labels)) if gallery_labels[j] == ident)
            for ident in identidades
        }
        # ordenação decrescente de score; empate → menor identidade primeiro
        ordem = sorted(identidades, key=lambda ident: (-melhor[ident], ident))
        posicao = ordem.index(verdadeiro)
        for r in ranks:
            acertos[r] += posicao < r
    return {r: (acertos[r] / avaliados if avaliados else 0.0) for r in ranks}, excluidos, avaliados


def oracle_edc(embeddings, protocolo, qualidade, alvo, fracoes):
    scores = oracle_scores(embeddings, protocolo)
    limiar = oracle_limiar(list(scores[~protocolo.mated]), alvo)
    ordem = sorted(range(len(qualidade)), key=lambda i: (qualidade[i], i))
    curva = []
    for fracao in fracoes:
        descartados = set(ordem[:math.floor(fracao * len(qualidade) + 1e-9)])
        restantes = [
            s for s, a, b, m in zip(scores, protocolo.index_a, protocolo.index_b, protocolo.mated)
            if m and a not in descartados and b not in descartados
        ]
        if not restantes:
            break
        curva.append(sum(s <= limiar for s in restantes) / len(restantes))
    return limiar, curva


class TestVarreduraAcuracia:
    """Testes da acurácia de melhor limiar."""

    def test_exemplo_manual(self):
        """Testa mated {0.9, 0.4} e não-mated {0.6, 0.1} → 0.75."""
        _, acuracias = avaliacao.varredura_acuracia([0.9, 0.4, 0.6, 0.1], [True, True, False, False])
        assert acuracias.max() == pytest.approx(0.75)

    def test_separavel(self):
        """Testa acurácia 1 com limiar entre as populações."""
        limiares, acuracias = avaliacao.varredura_acuracia([0.9, 0.8, 0.3, 0.2], [True, True, False, False])
        melhor = int(np.argmax(acuracias))
        assert acuracias[melhor] == 1.0
        assert 0.3 < limiares[melhor] < 0.8

    def test_rotulos_trocados_complementam(self):
        """Testa que trocar mated/não-mated dá 1 − acurácia em cada limiar."""
        rng = np.random.default_rng(2)
        scores = rng.uniform(-1, 1, 50)
        mated = rng.random(50) < 0.4
        limiares, acuracias = avaliacao.varredura_acuracia(scores, mated)
        limiares_t, acuracias_t = avaliacao.varredura_acuracia(scores, ~mated)
        assert np.array_equal(limiares, limiares_t)
        assert np.allclose(acuracias + acuracias_t, 1.0)


class TestVerify:
    """Testes da verificação 1:1."""

    def test_oracle_melhor_limiar(self):
        """Testa a acurácia contra a enumeração de todos os limiares (20 instâncias)."""
        rng = np.random.default_rng(100)
        for _ in range(20):
            embeddings, labels = instancia(rng)
            protocolo = avaliacao.protocolo_todos_pares(labels)
            resultado = avaliacao.verify(embeddings, protocolo, avaliacao.MODO_MELHOR_LIMIAR)
            esperado = oracle_melhor_acuracia(oracle_scores(embeddings, protocolo), protocolo.mated)
            assert resultado.acuracia == pytest.approx(esperado, abs=1e-12)

    def test_oracle_tar_far(self):
        """Testa TAR@FAR contra a busca exaustiva do menor limiar válido."""
        rng = np.random.default_rng(101)
        for _ in range(20):
            embeddings, labels = instancia(rng)
            protocolo = avaliacao.protocolo_todos_pares(labels)
            scores = oracle_scores(embeddings, protocolo)
            resultado = avaliacao.verify(
                embeddings, protocolo, avaliacao.MODO_TAR_FAR, far_targets=(1e-2, 5e-2, 1e-1)
            )
            for linha in resultado.tar_por_far:
                limiar = oracle_limiar(list(scores[~protocolo.mated]), linha["far"])
                assert linha["limiar"] == pytest.approx(limiar, abs=1e-12)
                tar = float(np.mean(scores[protocolo.mated] > limiar))
                assert linha["tar"] == pytest.approx(tar, abs=1e-12)

    def test_tar_monotono(self):
        """Testa TAR não decrescente com o FAR."""
        rng = np.random.default_rng(7)
        embeddings, labels = instancia(rng, identidades=10, por_identidade=8)
        protocolo = avaliacao.protocolo_todos_pares(labels)
        resultado = avaliacao.verify(
            embeddings, protocolo, avaliacao.MODO_TAR_FAR, far_targets=(0.1, 0.001, 0.01, 0.3)
        )
        tars = [linha["tar"] for linha in resultado.tar_por_far]
        assert [linha["far"] for linha in resultado.tar_por_far] == [0.001, 0.01, 0.1, 0.3]
        assert all(a <= b for a, b in zip(tars, tars[1:]))

    def test_alvo_inatingivel(self):
        """Testa FAR abaixo de 1/#não-mated → linha marcada como inatingível."""
        rng = np.random.default_rng(3)
        embeddings, labels = instancia(rng, identidades=3, por_identidade=3)
        protocolo = avaliacao.protocolo_todos_pares(labels)
        resultado = avaliacao.verify(embeddings, protocolo, avaliacao.MODO_TAR_FAR, far_targets=(1e-3,))
        linha = resultado.tar_por_far[0]
        assert linha["atingivel"] is False
        assert linha["tar"] is None and linha["limiar"] is None

    def test_invariante_a_rotacao(self):
        """Testa que uma rotação comum dos embeddings preserva a acurácia."""
        rng = np.random.default_rng(4)
        embeddings, labels = instancia(rng)
        rotacao, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        protocolo = avaliacao.protocolo_todos_pares(labels)
        original = avaliacao.verify(embeddings, protocolo)
        rodado = avaliacao.verify(embeddings @ rotacao, protocolo)
        assert rodado.acuracia == pytest.approx(original.acuracia)

    def test_invariante_a_escala(self):
        """Testa que reescalar cada embedding não altera o resultado."""
        rng = np.random.default_rng(5)
        embeddings, labels = instancia(rng)
        protocolo = avaliacao.protocolo_todos_pares(labels)
        escalas = rng.uniform(0.1, 50.0, size=(embeddings.shape[0], 1))
        assert avaliacao.verify(embeddings * escalas, protocolo).acuracia == pytest.approx(
            avaliacao.verify(embeddings, protocolo).acuracia
        )

    def test_modo_desconhecido(self):
        """Testa rejeição de modo inválido."""
        embeddings, labels = instancia(np.random.default_rng(0), identidades=2, por_identidade=2)
        with pytest.raises(EntradaInvalidaError):
            avaliacao.verify(embeddings, avaliacao.protocolo_todos_pares(labels), "roc")

    def test_norma_zero(self):
        """Testa rejeição de embedding nulo."""
        embeddings, labels = instancia(np.random.default_rng(0), identidades=2, por_identidade=2)
        embeddings[1] = 0.0
        with pytest.raises(EntradaInvalidaError):
            avaliacao.verify(embeddings, avaliacao.protocolo_todos_pares(labels))


class TestIdentify:
    """Testes da identificação 1:N."""

    def test_oracle(self):
        """Testa Rank-1/Rank-5 contra a ordenação explícita (20 instâncias)."""
        rng = np.random.default_rng(200)
        for _ in range(20):
            galeria, labels_g = instancia(rng, identidades=10, por_identidade=3)
            sondas, labels_s = instancia(rng, identidades=12, por_identidade=4, ruido=1.5)
            resultado = avaliacao.identify(sondas, labels_s, galeria, labels_g, ranks=(1, 5))
            similaridades = unitarios(sondas) @ unitarios(galeria).T
            taxas, excluidos, avaliados = oracle_rank(similaridades, labels_g, labels_s, (1, 5))
            assert resultado.excluidos == excluidos == 8
            assert resultado.avaliados == avaliados
            for r in (1, 5):
                assert resultado.taxas[r] == pytest.approx(taxas[r], abs=1e-12)

    def test_empate_menor_indice(self):
        """Testa que empates favorecem a identidade de menor índice."""
        galeria = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        labels_g = np.array([0, 1, 2])
        sondas = np.array([[1.0, 0.1], [1.0, 0.1]])
        resultado = avaliacao.identify(sondas, [0, 1], galeria, labels_g, ranks=(1, 2))
        assert resultado.taxas[1] == pytest.approx(0.5)
        assert resultado.taxas[2] == pytest.approx(1.0)

    def test_galeria_por_identidade(self):
        """Testa que várias amostras da mesma identidade contam como uma."""
        galeria = np.array([[1.0, 0.0], [0.9, 0.1], [0.8, 0.2], [0.0, 1.0]])
        resultado = avaliacao.identify([[0.0, 1.0]], [1], galeria, [0, 0, 0, 1], ranks=(1,))
        assert resultado.taxas[1] == 1.0

    def test_rank_monotono(self):
        """Testa Rank-N não decrescente em N."""
        rng = np.random.default_rng(9)
        galeria, labels_g = instancia(rng, identidades=10, por_identidade=2)
        sondas, labels_s = instancia(rng, identidades=10, por_identidade=3, ruido=2.0)
        taxas = avaliacao.identify(sondas, labels_s, galeria, labels_g, ranks=(1, 2, 5, 10)).taxas
        valores = [taxas[r] for r in (1, 2, 5, 10)]
        assert all(a <= b for a, b in zip(valores, valores[1:]))
        assert taxas[10] == 1.0

    def test_ranks_invalidos(self):
        """Testa rejeição de rank < 1."""
        with pytest.raises(EntradaInvalidaError):
            avaliacao.identify([[1.0, 0.0]], [0], [[1.0, 0.0]], [0], ranks=(0,))


class TestEDC:
    """Testes da curva erro-versus-descarte."""

    FRACOES = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]

    def test_oracle(self):
        """Testa a curva contra descarte explícito por (qualidade, índice)."""
        rng = np.random.default_rng(300)
        for _ in range(20):
            embeddings, labels = instancia(rng, identidades=10, por_identidade=6)
            protocolo = avaliacao.protocolo_todos_pares(labels)
            qualidade = np.round(rng.uniform(0, 1, labels.size), 1)
            curva = avaliacao.edc(embeddings, protocolo, qualidade, 1e-2, self.FRACOES)
            limiar, esperado = oracle_edc(embeddings, protocolo, qualidade, 1e-2, self.FRACOES)
            assert curva.limiar == pytest.approx(limiar, abs=1e-12)
            assert curva.discard_fractions == self.FRACOES[:len(esperado)]
            assert np.allclose(curva.fnmr_values, esperado, atol=1e-12)

    def test_limiar_fixo(self):
        """Testa que o limiar não muda com a fração descartada."""
        rng = np.random.default_rng(1)
        embeddings, labels = instancia(rng)
        protocolo = avaliacao.protocolo_todos_pares(labels)
        qualidade = rng.uniform(0, 1, labels.size)
        completa = avaliacao.edc(embeddings, protocolo, qualidade, 1e-2, self.FRACOES)
        so_zero = avaliacao.edc(embeddings, protocolo, qualidade, 1e-2, [0.0])
        assert completa.limiar == so_zero.limiar
        assert completa.fnmr_values[0] == so_zero.fnmr_values[0]

    def test_qualidade_constante(self):
        """Testa que qualidade constante descarta por índice crescente."""
        rng = np.random.default_rng(6)
        embeddings, labels = instancia(rng)
        protocolo = avaliacao.protocolo_todos_pares(labels)
        constante = avaliacao.edc(embeddings, protocolo, np.full(labels.size, 0.5), 1e-2, self.FRACOES)
        por_indice = avaliacao.edc(
            embeddings, protocolo, np.arange(labels.size, dtype=float), 1e-2, self.FRACOES
        )
        assert constante.fnmr_values == por_indice.fnmr_values

    def test_truncamento(self):
        """Testa o corte quando nenhum par mated resta."""
        galeria = np.array([[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [-1.0, 0.2], [0.1, -1.0]])
        protocolo = avaliacao.protocolo_todos_pares([0, 0, 1, 2, 3])
        qualidade = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
        curva = avaliacao.edc(galeria, protocolo, qualidade, 0.5, [0.0, 0.2, 0.4])
        assert curva.discard_fractions == [0.0]
        assert curva.truncado

    def test_alvo_inatingivel(self):
        """Testa AlvoInatingivelError com FMR abaixo da resolução."""
        rng = np.random.default_rng(8)
        embeddings, labels = instancia(rng, identidades=3, por_identidade=3)
        protocolo = avaliacao.protocolo_todos_pares(labels)
        with pytest.raises(AlvoInatingivelError):
            avaliacao.edc(embeddings, protocolo, np.zeros(labels.size), 1e-3, [0.0])

    def test_fracoes_invalidas(self):
        """Testa rejeição de frações fora de ordem ou fora de [0, 1)."""
        rng = np.random.default_rng(8)
        embeddings, labels = instancia(rng)
        protocolo = avaliacao.protocolo_todos_pares(labels)
        qualidade = np.zeros(labels.size)
        for fracoes in ([0.2, 0.1], [0.0, 1.0]):
            with pytest.raises(EntradaInvalidaError):
                avaliacao.edc(embeddings, protocolo, qualidade, 1e-2, fracoes)

    def test_oracle_de_qualidade_nao_piora(self):
        """Testa que descartar pelo ruído verdadeiro não aumenta o FNMR final."""
        rng = np.random.default_rng(12)
        centros = rng.standard_normal((12, 8))
        labels = np.repeat(np.arange(12), 8)
        sigma = np.where(rng.random(labels.size) < 0.5, 0.1, 1.5)
        embeddings = centros[labels] + sigma[:, None] * rng.standard_normal((labels.size, 8))
        protocolo = avaliacao.protocolo_todos_pares(labels)
        curva = avaliacao.edc(embeddings, protocolo, -sigma, 1e-2, self.FRACOES)
        assert curva.fnmr_values[-1] <= curva.fnmr_values[0]


class TestDensidade:
    """Testes do mapa norma × CR."""

    def setup_method(self):
        rng = np.random.default_rng(21)
        self.protos = ClassPrototypes(unitarios(rng.standard_normal((5, 4))))
        self.labels = np.repeat(np.arange(5), 10)
        escala = rng.uniform(0.5, 30.0, size=(50, 1))
        self.embeddings = escala * (self.protos.centers[self.labels] + 0.4 * rng.standard_normal((50, 4)))
        self.config = MarginConfig()

    def test_conservacao_de_massa(self):
        """Testa que o histograma soma o número de amostras."""
        mapa = avaliacao.norm_utility_map(self.embeddings, self.labels, self.protos, None, self.config)
        assert mapa.histograma.shape == (20, 20)
        assert mapa.histograma.sum() == 50
        assert np.allclose(mapa.norms, np.linalg.norm(self.embeddings, axis=1))

    def test_faixa_unica(self):
        """Testa bins=(1, 1) → uma única célula com todas as amostras."""
        mapa = avaliacao.norm_utility_map(
            self.embeddings, self.labels, self.protos, None, self.config, bins=(1, 1)
        )
        assert mapa.histograma.tolist() == [[50.0]]

    def test_marginal_da_norma(self):
        """Testa que a marginal do histograma coincide com o histograma 1-D da norma."""
        mapa = avaliacao.norm_utility_map(
            self.embeddings, self.labels, self.protos, None, self.config, bins=(8, 6)
        )
        marginal, _ = np.histogram(mapa.norms, bins=mapa.bordas_norma)
        assert np.array_equal(mapa.histograma.sum(axis=1), marginal)

    def test_normalizados(self):
        """Testa ẑ e ĈR nulos sem estado e limitados a [−1, 1] com estado."""
        mapa = avaliacao.norm_utility_map(self.embeddings, self.labels, self.protos, None, self.config)
        assert np.all(mapa.norm_hat == 0.0) and np.all(mapa.cr_hat == 0.0)
        stats = NormalizerState.congelado(15.0, 5.0, 2.0, 1.0)
        mapa = avaliacao.norm_utility_map(self.embeddings, self.labels, self.protos, stats, self.config)
        assert np.all(np.abs(mapa.norm_hat) <= 1.0) and np.all(np.abs(mapa.cr_hat) <= 1.0)

    def test_legado(self):
        """Testa que a forma original do CR é usada quando pedida."""
        mapa = avaliacao.norm_utility_map(
            self.embeddings, self.labels, self.protos, None, self.config, legado=True
        )
        assert np.all(mapa.crs < 1.0 / (self.config.epsilon + 1e-12))
        assert np.any(mapa.crs != avaliacao.qualidade_cr(
            self.embeddings, self.labels, self.protos, self.config.epsilon
        ))

    def test_qualidade_cr(self):
        """Testa CR por amostra contra o cálculo direto."""
        crs = avaliacao.qualidade_cr(self.embeddings, self.labels, self.protos, 1e-4)
        unit = unitarios(self.embeddings)
        cos = unit @ self.protos.centers.T
        for i, label in enumerate(self.labels):
            negativos = np.delete(cos[i], label)
            esperado = max(cos[i, label], 0.0) / (min(max(negativos.max(), 0.0), 1.0) + 1e-4)
            assert crs[i] == pytest.approx(esperado, rel=1e-9)


class TestProtocolo:
    """Testes do protocolo de pares."""

    def test_todos_pares(self):
        """Testa labels [0, 0, 1] → (0,1) mated, (0,2) e (1,2) não-mated."""
        protocolo = avaliacao.protocolo_todos_pares([0, 0, 1])
        assert protocolo.index_a.tolist() == [0, 0, 1]
        assert protocolo.index_b.tolist() == [1, 2, 2]
        assert protocolo.mated.tolist() == [True, False, False]

    def test_subconjunto(self):
        """Testa pares restritos aos índices informados."""
        protocolo = avaliacao.protocolo_todos_pares([0, 1, 0, 1], indices=[3, 0, 2])
        assert list(zip(protocolo.index_a.tolist(), protocolo.index_b.tolist())) == [(0, 2), (0, 3), (2, 3)]
        assert protocolo.mated.tolist() == [True, False, False]

    def test_sem_pares_mated(self):
        """Testa rejeição de protocolo sem pares mated."""
        with pytest.raises(EntradaInvalidaError):
            PairProtocol([0, 1], [1, 2], [False, False])

    def test_indice_fora(self):
        """Testa rejeição de índice fora do conjunto."""
        protocolo = PairProtocol([0, 1], [1, 5], [True, False])
        with pytest.raises(EntradaInvalidaError):
            protocolo.validar(3)

    def test_invertido(self):
        """Testa a troca dos rótulos."""
        protocolo = PairProtocol([0, 1], [1, 2], [True, False])
        assert protocolo.invertido().mated.tolist() == [False, True]
