"""Steering vectors, cascaded impulse response, and per-subcarrier response.

Each surface is controlled row-wise: a row holds one phase index on a 64-step
grid (pi/32 spacing), and its columns apply the progressive phases
``[1, e^{j phi}, ..., e^{j (Mc-1) phi}]``. Reflection amplitude is exactly 1;
rows that are not in use keep reflecting at their last phase, since a passive
surface cannot be switched off. The cascade averages element contributions
per surface (see :func:`cascade`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ris_semcom.scenario import ChannelRealization, ScenarioConfig

PHASE_LEVELS = 64
PHASE_STEP = np.pi / 32.0


@dataclass
class RisConfig:
    """Per-surface, per-row phase indices and usage flags.

    ``phase_index`` is an integer grid (S, rows) in [0, 63]; ``row_in_use``
    is a boolean grid of the same shape gating which rows the controller may
    adjust. Usage gates agent updates, not physics: unused rows keep their
    stale phase and keep reflecting.
    """

    phase_index: np.ndarray
    row_in_use: np.ndarray

    @classmethod
    def initial(
        cls,
        config: ScenarioConfig,
        rng: np.random.Generator | None = None,
        n_ris: int | None = None,
    ) -> "RisConfig":
        """All rows in use; phases random if ``rng`` is given, else zero."""
        s = config.n_ris if n_ris is None else n_ris
        shape = (s, config.ris_rows)
        if rng is None:
            idx = np.zeros(shape, dtype=np.int64)
        else:
            idx = rng.integers(0, PHASE_LEVELS, size=shape)
        return cls(phase_index=idx, row_in_use=np.ones(shape, dtype=bool))

    def validate(self) -> None:
        if self.phase_index.shape != self.row_in_use.shape:
            raise ValueError("phase_index and row_in_use shapes differ")
        if self.phase_index.min(initial=0) < 0 or self.phase_index.max(initial=0) >= PHASE_LEVELS:
            raise ValueError("phase_index entries must lie in [0, 63]")


@dataclass(frozen=True)
class EffectiveChannel:
    """Cascaded channel for one user: time-domain taps and their spectrum.

    ``cir`` has shape (n_bs, n_ut, 2L-1); ``cfr`` has shape
    (K, n_ut, n_bs) and is the K-point DFT of ``cir`` along the tap axis.
    """

    cir: np.ndarray
    cfr: np.ndarray


def steering_vector(phase_index: int, n_cols: int) -> np.ndarray:
    """Column phases of one row: ``[1, e^{j phi}, ..., e^{j (n-1) phi}]``.

    ``phi = phase_index * pi/32`` with ``phase_index`` in [0, 63]. Every
    entry is unit modulus.
    """
    if not 0 <= phase_index < PHASE_LEVELS:
        raise ValueError(f"phase_index must be in [0, {PHASE_LEVELS - 1}], got {phase_index}")
    phi = phase_index * PHASE_STEP
    return np.exp(1j * phi * np.arange(n_cols))


def element_coefficients(ris: RisConfig, n_cols: int) -> np.ndarray:
    """Per-element reflection coefficients, (S, rows*cols), row-major."""
    s_count, n_rows = ris.phase_index.shape
    coeff = np.empty((s_count, n_rows * n_cols), dtype=np.complex128)
    for s in range(s_count):
        rows = [steering_vector(int(ris.phase_index[s, r]), n_cols) for r in range(n_rows)]
        coeff[s] = np.concatenate(rows)
    return coeff


def cascade(
    links: ChannelRealization,
    ris: RisConfig,
    config: ScenarioConfig,
    aperture_normalized: bool = True,
) -> EffectiveChannel:
    """Combine the direct link and all reflected paths into one channel.

    Per antenna pair (i, j) the impulse response is the zero-padded direct
    link plus, for every surface, the element-coefficient-weighted sum of the
    per-element convolutions ``h_bs_elem * h_elem_ut``. With
    ``aperture_normalized`` (the default) each surface's sum is divided by
    its element count, so a surface redistributes rather than multiplies the
    power of a single reflected path; this keeps the composite channel on the
    scale of the direct link for any array size.
    """
    ris.validate()
    nb, nu = config.n_bs_antennas, config.n_ut_antennas_per_user
    ell = config.n_taps
    out_len = 2 * ell - 1
    s_count = links.h_bs_ris.shape[0]
    if ris.phase_index.shape[0] != s_count:
        raise ValueError(
            f"RIS count mismatch: links carry {s_count}, config carries "
            f"{ris.phase_index.shape[0]}"
        )
    if links.h_direct.shape != (nb, nu, ell):
        raise ValueError("h_direct shape disagrees with the scenario config")

    cir = np.zeros((nb, nu, out_len), dtype=np.complex128)
    cir[:, :, :ell] = links.h_direct
    if s_count:
        coeff = element_coefficients(ris, config.ris_cols)  # (S, M)
        m = config.n_elements
        # Linear convolution of two length-L sequences via outer product of
        # taps summed along anti-diagonals, vectorized over (s, m, i, j).
        a = links.h_bs_ris[:, :, :, None, :, None]  # (S, M, NB, 1, L, 1)
        b = links.h_ris_ut[:, :, None, :, None, :]  # (S, M, 1, NU, 1, L)
        prod = a * b  # (S, M, NB, NU, L, L)
        for ta in range(ell):
            for tb in range(ell):
                contrib = np.einsum("sm,smij->ij", coeff, prod[:, :, :, :, ta, tb]) / (
                    m if aperture_normalized else 1
                )
                cir[:, :, ta + tb] += contrib
    cfr_ij = cir_to_cfr(cir, config.n_subcarriers)  # (NB, NU, K)
    cfr = np.transpose(cfr_ij, (2, 1, 0))  # (K, NU, NB)
    return EffectiveChannel(cir=cir, cfr=cfr)


def cir_to_cfr(cir: np.ndarray, n_subcarriers: int) -> np.ndarray:
    """K-point DFT along the last (tap) axis, zero-padded.

    ``spectrum[k] = sum_l cir[l] * exp(-2j*pi*k*l/K)``; Parseval gives
    ``sum_k |spectrum[k]|^2 = K * sum_l |cir[l]|^2``.
    """
    if cir.shape[-1] > n_subcarriers:
        raise ValueError(
            f"tap count {cir.shape[-1]} exceeds n_subcarriers {n_subcarriers}"
        )
    return np.fft.fft(cir, n=n_subcarriers, axis=-1)
