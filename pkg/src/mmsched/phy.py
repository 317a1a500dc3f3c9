"""Zero-forcing receive beamforming and the rate quantities built on it."""
from __future__ import annotations

import numpy as np

COND_LIMIT = 1e12


class SingularChannelError(ValueError):
    """Scheduled users' channels are (numerically) linearly dependent."""

    def __init__(self, cond: float):
        super().__init__(f"Gram matrix is singular or ill-conditioned (condition estimate {cond:.3g})")
        self.cond = cond


def _gram_inverse(h_sub: np.ndarray) -> np.ndarray:
    h_sub = np.asarray(h_sub, dtype=np.complex128)
    if h_sub.ndim != 2:
        raise ValueError(f"expected an M x N matrix, got shape {h_sub.shape}")
    m, n = h_sub.shape
    if n > m:
        raise SingularChannelError(np.inf)
    gram = h_sub.conj().T @ h_sub
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularChannelError(float(cond))
    return np.linalg.inv(gram)


def zf_beamformer(h_sub: np.ndarray) -> np.ndarray:
    """``W = H (H^H H)^-1`` so that ``W^H H = I``."""
    return np.asarray(h_sub, dtype=np.complex128) @ _gram_inverse(h_sub)


def post_zf_sinr(h_sub: np.ndarray, noise_var: float) -> np.ndarray:
    """Per-user SINR after ZF: ``1 / (noise_var * [(H^H H)^-1]_kk)``."""
    diag = np.real(np.diag(_gram_inverse(h_sub)))
    return 1.0 / (noise_var * diag)


def zf_rates(h_sub: np.ndarray, noise_var: float) -> np.ndarray:
    return np.log2(1.0 + post_zf_sinr(h_sub, noise_var))


def achieved_rates(h: np.ndarray, subset, noise_var: float) -> tuple[np.ndarray, bool]:
    """ZF rates of ``subset`` (columns of the M x L matrix ``h``).

    A singular subset yields zero rates and ``singular=True`` instead of raising.
    """
    idx = list(subset)
    try:
        return zf_rates(h[:, idx], noise_var), False
    except SingularChannelError:
        return np.zeros(len(idx)), True


def su_mimo_rate(h_l: np.ndarray, noise_var: float) -> float:
    """Single-user matched-filter rate ``log2(1 + |h|^2 / noise_var)``."""
    h_l = np.asarray(h_l)
    return float(np.log2(1.0 + np.vdot(h_l, h_l).real / noise_var))


def su_mimo_rates(h: np.ndarray, noise_var: float) -> np.ndarray:
    """Vectorised :func:`su_mimo_rate` over the columns of ``h``."""
    power = np.sum(np.abs(h) ** 2, axis=0)
    return np.log2(1.0 + power / noise_var)


def normalization_factor(su_rates, n_max: int) -> float:
    """Sum of the ``n_max`` largest single-user rates."""
    su_rates = np.asarray(su_rates, dtype=float)
    if not 1 <= n_max <= su_rates.size:
        raise ValueError(f"n_max must lie in [1, {su_rates.size}], got {n_max}")
    return float(np.sum(np.sort(su_rates)[::-1][:n_max]))


def normalized_sum_rate(subset, h: np.ndarray, noise_var: float, norm_factor: float) -> tuple[float, bool]:
    """(sum of achieved ZF rates) / ``norm_factor``, unclipped, plus the singular flag."""
    if not len(subset):
        raise ValueError("empty scheduling decision")
    if not norm_factor > 0:
        raise ValueError(f"normalization factor must be positive, got {norm_factor}")
    rates, singular = achieved_rates(h, subset, noise_var)
    return float(rates.sum()) / norm_factor, singular
