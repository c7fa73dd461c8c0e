"""Scenario geometry, user mobility, blockage, and raw channel link generation.

One simulated world consists of a fixed base station, a set of fixed
reflecting surfaces, and one or two mobile user terminals. Time is divided
into intervals; within an interval the user position, the blockage state and
all channel links are constant. Every link (direct BS-user, BS-element,
element-user) is a Rician two-component tap sequence with unit average power:
a deterministic line-of-sight phasor derived from the link distance plus
complex Gaussian multipath.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    """Raised when a configuration value violates the documented schema."""


@dataclass(frozen=True)
class Schedule:
    """Interval schedule: warmup length and per-interval image counts."""

    warmup_intervals: int = 64
    images_per_interval: int = 20
    known_images_online: int = 1


@dataclass(frozen=True)
class ScenarioConfig:
    """Root of determinism: geometry, array sizes, fading and schedule knobs.

    Defaults describe the reference scene: a 2x2 MIMO link at 3 dB SNR with
    two 4x8 reflecting surfaces, two-tap Rician fading with a 10:1
    LoS/multipath power ratio, and a user walking inside a 10 m x 10 m area.
    """

    n_bs_antennas: int = 2
    n_ut_antennas_per_user: int = 2
    n_users: int = 1
    n_ris: int = 2
    ris_rows: int = 4
    ris_cols: int = 8
    n_taps: int = 2
    n_subcarriers: int = 1024
    cp_length: int = 8
    snr_db: float = 3.0
    los_nlos_power_ratio: float = 10.0
    bs_position: tuple[float, float, float] = (0.0, 0.0, 10.0)
    ris_positions: tuple[tuple[float, float, float], ...] = (
        (5.0, -2.0, 5.0),
        (-2.0, 5.0, 5.0),
    )
    area_bounds: tuple[tuple[float, float], ...] = ((0.0, 10.0), (0.0, 10.0), (1.5, 1.5))
    blockage_probability: float = 0.5
    carrier_wavelength: float = 0.1
    tap_power_split: tuple[float, float] = (0.7, 0.3)
    mobility: str = "walk"
    walk_step: float = 0.5
    schedule: Schedule = field(default_factory=Schedule)
    seed: int = 0

    @property
    def n_elements(self) -> int:
        """Elements per surface."""
        return self.ris_rows * self.ris_cols

    def validate(self) -> None:
        """Check all structural invariants; raise ConfigError on violation."""
        counts = {
            "n_bs_antennas": self.n_bs_antennas,
            "n_ut_antennas_per_user": self.n_ut_antennas_per_user,
            "n_users": self.n_users,
            "ris_rows": self.ris_rows,
            "ris_cols": self.ris_cols,
            "n_taps": self.n_taps,
            "n_subcarriers": self.n_subcarriers,
            "cp_length": self.cp_length,
        }
        for name, value in counts.items():
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.n_ris < 0:
            raise ConfigError(f"n_ris must be >= 0, got {self.n_ris}")
        if self.n_users not in (1, 2):
            raise ConfigError(f"n_users must be 1 or 2, got {self.n_users}")
        if self.cp_length < self.n_taps:
            raise ConfigError(
                f"cp_length ({self.cp_length}) must be >= n_taps ({self.n_taps})"
            )
        k = self.n_subcarriers
        if k & (k - 1) != 0:
            raise ConfigError(f"n_subcarriers must be a power of two, got {k}")
        if not 0.0 <= self.blockage_probability <= 1.0:
            raise ConfigError(
                f"blockage_probability must be in [0, 1], got {self.blockage_probability}"
            )
        if self.los_nlos_power_ratio < 0:
            raise ConfigError("los_nlos_power_ratio must be nonnegative")
        if len(self.ris_positions) < self.n_ris:
            raise ConfigError(
                f"need at least {self.n_ris} ris_positions, got {len(self.ris_positions)}"
            )
        if len(self.area_bounds) != 3:
            raise ConfigError("area_bounds must give (min, max) for three axes")
        for lo, hi in self.area_bounds:
            if hi < lo:
                raise ConfigError(f"area_bounds axis has max < min: ({lo}, {hi})")
        rho = self.tap_power_split
        if len(rho) != self.n_taps or abs(sum(rho) - 1.0) > 1e-9 or min(rho) < 0:
            raise ConfigError(
                "tap_power_split must be a nonnegative per-tap profile summing to 1 "
                f"with n_taps entries, got {rho}"
            )
        if self.mobility not in ("walk", "uniform"):
            raise ConfigError(f"mobility must be 'walk' or 'uniform', got {self.mobility!r}")
        if self.carrier_wavelength <= 0 or self.walk_step < 0:
            raise ConfigError("carrier_wavelength must be > 0 and walk_step >= 0")
        if self.schedule.warmup_intervals < 0 or self.schedule.images_per_interval < 1:
            raise ConfigError("schedule needs warmup_intervals >= 0, images_per_interval >= 1")
        if not 0 <= self.schedule.known_images_online <= self.schedule.images_per_interval:
            raise ConfigError("known_images_online must be within images_per_interval")


@dataclass(frozen=True)
class UserState:
    """Per-interval user snapshot; constant within one interval."""

    position: np.ndarray
    direct_link_blocked: bool
    interval_index: int


@dataclass(frozen=True)
class ChannelRealization:
    """Raw per-link tap sequences for one user in one interval.

    Shapes: ``h_direct`` (n_bs, n_ut, L); ``h_bs_ris`` (S, M, n_bs, L);
    ``h_ris_ut`` (S, M, n_ut, L), with M elements per surface enumerated
    row-major over the (row, column) grid.
    """

    h_direct: np.ndarray
    h_bs_ris: np.ndarray
    h_ris_ut: np.ndarray


def element_positions(config: ScenarioConfig, ris_index: int) -> np.ndarray:
    """3-D positions of a surface's elements, (M, 3), row-major.

    Columns run along the x axis and rows along the z axis at half-wavelength
    spacing, centered on the surface's reference position. Column-axis LoS
    phase ramps are what the per-row steering vectors can compensate.
    """
    spacing = config.carrier_wavelength / 2.0
    center = np.asarray(config.ris_positions[ris_index], dtype=float)
    rows = np.arange(config.ris_rows) - (config.ris_rows - 1) / 2.0
    cols = np.arange(config.ris_cols) - (config.ris_cols - 1) / 2.0
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    offsets = np.zeros((config.ris_rows, config.ris_cols, 3))
    offsets[..., 0] = cc * spacing
    offsets[..., 2] = rr * spacing
    return (center + offsets).reshape(-1, 3)


def initial_user_state(config: ScenarioConfig, rng: np.random.Generator) -> UserState:
    """Draw the interval-0 state: uniform position, Bernoulli blockage."""
    lo = np.array([b[0] for b in config.area_bounds])
    hi = np.array([b[1] for b in config.area_bounds])
    position = lo + rng.random(3) * (hi - lo)
    blocked = bool(rng.random() < config.blockage_probability)
    return UserState(position=position, direct_link_blocked=blocked, interval_index=0)


def _reflect(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    span = hi - lo
    out = x.copy()
    for axis in range(len(x)):
        if span[axis] <= 0:
            out[axis] = lo[axis]
            continue
        # fold into [lo, lo + 2*span) then mirror the upper half
        t = (out[axis] - lo[axis]) % (2 * span[axis])
        out[axis] = lo[axis] + (t if t <= span[axis] else 2 * span[axis] - t)
    return out


def step_scenario(
    state: UserState, config: ScenarioConfig, rng: np.random.Generator
) -> UserState:
    """Advance to the next interval: move the user, resample blockage.

    ``mobility='uniform'`` resamples the position uniformly inside
    ``area_bounds``; ``mobility='walk'`` takes a Gaussian step of scale
    ``walk_step`` reflected at the area boundary. Blockage is an independent
    Bernoulli(``blockage_probability``) draw each interval.
    """
    lo = np.array([b[0] for b in config.area_bounds])
    hi = np.array([b[1] for b in config.area_bounds])
    if config.mobility == "uniform":
        position = lo + rng.random(3) * (hi - lo)
    else:
        step = rng.normal(0.0, config.walk_step, size=3)
        position = _reflect(state.position + step, lo, hi)
    blocked = bool(rng.random() < config.blockage_probability)
    return UserState(
        position=position,
        direct_link_blocked=blocked,
        interval_index=state.interval_index + 1,
    )


def _rician_taps(
    distances: np.ndarray,
    config: ScenarioConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Unit-power Rician tap sequences, one per entry of ``distances``.

    Tap 0 carries the LoS phasor exp(-2j*pi*d/lambda) at relative power
    kappa/(kappa+1) plus multipath at power rho0/(kappa+1); later taps are
    pure multipath at rho_l/(kappa+1). Expected total power is exactly 1.
    """
    kappa = config.los_nlos_power_ratio
    a_los = np.sqrt(kappa / (kappa + 1.0))
    nlos_power = 1.0 / (kappa + 1.0)
    rho = np.asarray(config.tap_power_split)
    shape = distances.shape
    taps = np.empty(shape + (config.n_taps,), dtype=np.complex128)
    for tap in range(config.n_taps):
        sigma = np.sqrt(nlos_power * rho[tap] / 2.0)
        noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        taps[..., tap] = sigma * noise
    taps[..., 0] += a_los * np.exp(-2j * np.pi * distances / config.carrier_wavelength)
    return taps


def generate_links(
    state: UserState, config: ScenarioConfig, rng: np.random.Generator
) -> ChannelRealization:
    """Draw all raw links for one user at its current position.

    The direct link is zeroed when ``state.direct_link_blocked``. Positions
    coincident with the BS or any surface element are rejected because the
    LoS phase is undefined at zero distance.
    """
    bs = np.asarray(config.bs_position, dtype=float)
    user = np.asarray(state.position, dtype=float)
    nb, nu = config.n_bs_antennas, config.n_ut_antennas_per_user
    s_count, m = config.n_ris, config.n_elements

    d_direct = float(np.linalg.norm(user - bs))
    if d_direct < 1e-9:
        raise ValueError("user position coincides with the BS")

    h_direct = _rician_taps(np.full((nb, nu), d_direct), config, rng)
    if state.direct_link_blocked:
        h_direct = np.zeros_like(h_direct)

    h_bs_ris = np.zeros((s_count, m, nb, config.n_taps), dtype=np.complex128)
    h_ris_ut = np.zeros((s_count, m, nu, config.n_taps), dtype=np.complex128)
    for s in range(s_count):
        if np.linalg.norm(user - np.asarray(config.ris_positions[s])) < 1e-9:
            raise ValueError(f"user position coincides with RIS {s}")
        elems = element_positions(config, s)
        d_bs_elem = np.linalg.norm(elems - bs, axis=1)
        d_elem_ut = np.linalg.norm(elems - user, axis=1)
        if d_elem_ut.min() < 1e-9:
            raise ValueError(f"user position coincides with an element of RIS {s}")
        h_bs_ris[s] = _rician_taps(np.repeat(d_bs_elem[:, None], nb, axis=1), config, rng)
        h_ris_ut[s] = _rician_taps(np.repeat(d_elem_ut[:, None], nu, axis=1), config, rng)
    return ChannelRealization(h_direct=h_direct, h_bs_ris=h_bs_ris, h_ris_ut=h_ris_ut)
