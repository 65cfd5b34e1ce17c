"""
Estado EMA das normas de feature e dos certainty ratios.
"""


class NormalizerState:
    """Médias e desvios móveis (EMA) de ‖z‖ e CR."""

    def __init__(
        self,
        mu_z: float = 0.0,
        sigma_z: float = 0.0,
        mu_cr: float = 0.0,
        sigma_cr: float = 0.0,
        ema_momentum: float = 0.99,
        initialized: bool = False
    ):
        self.mu_z = mu_z
        self.sigma_z = sigma_z
        self.mu_cr = mu_cr
        self.sigma_cr = sigma_cr
        self.ema_momentum = ema_momentum
        self.initialized = initialized

    @classmethod
    def congelado(
        cls,
        mu_z: float,
        sigma_z: float,
        mu_cr: float,
        sigma_cr: float
    ) -> 'NormalizerState':
        """Cria um estado já inicializado (snapshot de uma fase do treino)."""
        return cls(mu_z, sigma_z, mu_cr, sigma_cr, initialized=True)

    def copia(self) -> 'NormalizerState':
        return NormalizerState.from_dict(self.to_dict())

    def to_dict(self) -> dict:
        """Converte o estado para dicionário."""
        return {
            "mu_z": self.mu_z,
            "sigma_z": self.sigma_z,
            "mu_cr": self.mu_cr,
            "sigma_cr": self.sigma_cr,
            "ema_momentum": self.ema_momentum,
            "initialized": self.initialized
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'NormalizerState':
        """Cria o estado a partir de um dicionário."""
        return cls(
            mu_z=float(data.get("mu_z", 0.0)),
            sigma_z=float(data.get("sigma_z", 0.0)),
            mu_cr=float(data.get("mu_cr", 0.0)),
            sigma_cr=float(data.get("sigma_cr", 0.0)),
            ema_momentum=float(data.get("ema_momentum", 0.99)),
            initialized=bool(data.get("initialized", False))
        )

    def __eq__(self, outro) -> bool:
        if not isinstance(outro, NormalizerState):
            return NotImplemented
        return self.to_dict() == outro.to_dict()

    def __repr__(self) -> str:
        return (
            f"NormalizerState(mu_z={self.mu_z:.4f}, sigma_z={self.sigma_z:.4f}, "
            f"mu_cr={self.mu_cr:.4f}, sigma_cr={self.sigma_cr:.4f}, "
            f"initialized={self.initialized})"
        )
