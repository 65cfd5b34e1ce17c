"""
Encoder de brinquedo: duas camadas afins com tanh entre elas.

A saída é o embedding bruto z (não normalizado), de modo que a norma varia
com a qualidade da entrada.
"""
import logging
from typing import Dict, Tuple

import numpy as np

from src.core.erros import EntradaInvalidaError

logger = logging.getLogger(__name__)

NOMES_PARAMETROS = ("w1", "b1", "w2", "b2")


def inicializar_encoder(
    input_dim: int,
    embedding_dim: int,
    hidden_dim: int,
    rng: np.random.Generator
) -> Dict[str, np.ndarray]:
    """Inicialização gaussiana com escala 1/sqrt(fan_in) e vieses nulos."""
    return {
        "w1": rng.standard_normal((hidden_dim, input_dim)) / np.sqrt(input_dim),
        "b1": np.zeros(hidden_dim),
        "w2": rng.standard_normal((embedding_dim, hidden_dim)) / np.sqrt(hidden_dim),
        "b2": np.zeros(embedding_dim)
    }


def inicializar_identidade(dim: int, hidden_dim: int) -> Dict[str, np.ndarray]:
    """Encoder com z = tanh(x) (requer hidden_dim >= dim)."""
    if hidden_dim < dim:
        raise EntradaInvalidaError(f"hidden_dim ({hidden_dim}) deve ser >= dim ({dim})")
    return {
        "w1": np.eye(hidden_dim, dim),
        "b1": np.zeros(hidden_dim),
        "w2": np.eye(dim, hidden_dim),
        "b2": np.zeros(dim)
    }


def _validar(params: Dict[str, np.ndarray], inputs: np.ndarray):
    w1, b1, w2, b2 = (params[nome] for nome in NOMES_PARAMETROS)
    if w1.ndim != 2 or w2.ndim != 2 or w2.shape[1] != w1.shape[0]:
        raise EntradaInvalidaError(f"Pesos incompatíveis: w1 {w1.shape}, w2 {w2.shape}")
    if b1.shape != (w1.shape[0],) or b2.shape != (w2.shape[0],):
        raise EntradaInvalidaError(f"Vieses incompatíveis: b1 {b1.shape}, b2 {b2.shape}")
    if inputs.shape[-1] != w1.shape[1]:
        raise EntradaInvalidaError(
            f"Entrada de dimensão {inputs.shape[-1]} não corresponde a w1 {w1.shape}"
        )


def toy_encoder_forward(params: Dict[str, np.ndarray], inputs) -> Tuple[np.ndarray, dict]:
    """
    Calcula z = W2·tanh(W1·x + b1) + b2.

    Args:
        params: Parâmetros do encoder
        inputs: Vetor (D_in) ou matriz (B×D_in)

    Returns:
        Tuple[np.ndarray, dict]: Embeddings e cache para o backward
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    vetor = inputs.ndim == 1
    x = inputs[None, :] if vetor else inputs
    _validar(params, x)

    oculto = np.tanh(x @ params["w1"].T + params["b1"])
    z = oculto @ params["w2"].T + params["b2"]
    cache = {"x": x, "oculto": oculto, "vetor": vetor}
    return (z[0] if vetor else z), cache


def toy_encoder_backward(
    params: Dict[str, np.ndarray],
    cache: dict,
    grad_z
) -> Tuple[Dict[str, np.ndarray], np.ndarray]:
    """
    Gradientes exatos dos parâmetros e da entrada dado ∂L/∂z.

    Returns:
        Tuple[dict, np.ndarray]: Gradientes por parâmetro e ∂L/∂x
    """
    grad_z = np.asarray(grad_z, dtype=np.float64)
    if cache["vetor"]:
        grad_z = grad_z[None, :]
    if grad_z.shape != (cache["x"].shape[0], params["w2"].shape[0]):
        raise EntradaInvalidaError(f"Gradiente com forma {grad_z.shape} incompatível")

    oculto = cache["oculto"]
    grad_oculto = grad_z @ params["w2"]
    grad_pre = grad_oculto * (1.0 - oculto ** 2)
    grads = {
        "w1": grad_pre.T @ cache["x"],
        "b1": grad_pre.sum(axis=0),
        "w2": grad_z.T @ oculto,
        "b2": grad_z.sum(axis=0)
    }
    grad_x = grad_pre @ params["w1"]
    return grads, (grad_x[0] if cache["vetor"] else grad_x)
