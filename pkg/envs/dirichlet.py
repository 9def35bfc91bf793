import numpy as np

from exceptions import ConfigurationError
from schemas.env_schemas import ActionDistribution


def sample_dirichlet(alpha: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """
    Symmetric Dirichlet sample built from normalized Gamma(alpha, 1) variates.
    Shapes below one use Gamma(alpha + 1) * U**(1/alpha), kept in log space so that
    tiny concentrations do not underflow to an all-zero vector.
    """
    if not alpha > 0.0 or not np.isfinite(alpha):
        raise ConfigurationError(f"Dirichlet concentration must be positive, got {alpha}", code="INVALID_ALPHA")
    if alpha < 1.0:
        log_gamma = np.log(rng.gamma(alpha + 1.0, 1.0, size=size)) + np.log(rng.uniform(size=size)) / alpha
    else:
        log_gamma = np.log(rng.gamma(alpha, 1.0, size=size))
    shifted = np.exp(log_gamma - log_gamma.max())
    return shifted / shifted.sum()


def sample_partner_distribution(alpha: float, rng: np.random.Generator) -> ActionDistribution:
    probs = sample_dirichlet(alpha, 5, rng)
    # renormalize after the float round-trip so the schema check sees an exact simplex
    return ActionDistribution(probs=(probs / probs.sum()).tolist())
