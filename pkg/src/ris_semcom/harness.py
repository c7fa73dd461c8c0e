"""Experiment configuration, orchestration, exhaustive oracle, persistence.

An experiment is a reward schedule per user on top of a scenario, run for a
number of intervals over several independently seeded worlds, producing one
CSV row per (seed, interval, user). Determinism contract: the root seed is
expanded with a fixed spawn tree (root -> per-seed -> per-module streams),
so identical configurations produce byte-identical metrics files.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

import numpy as np

from ris_semcom.agents import (
    AgentConfig,
    AgentSet,
    IntervalMetrics,
    REWARD_KINDS,
    World,
    run_time_interval,
)
from ris_semcom.nnet import load_network, save_network
from ris_semcom.ris import PHASE_LEVELS
from ris_semcom.scenario import (
    ChannelRealization,
    ConfigError,
    ScenarioConfig,
    Schedule,
)

CSV_HEADER = "seed,interval,user,reward_kind,blocked,acc,mse,reward,sum_rate,rows_used"
CHANNEL_MODES = ("ideal", "blocked", "mixed50")
_MODE_BLOCKAGE = {"ideal": 0.0, "blocked": 1.0, "mixed50": 0.5}


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one experiment run."""

    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    reward_schedule: tuple[tuple[tuple[str, int, int], ...], ...] = ((("ACC", 0, 128),),)
    channel_mode: str = "mixed50"
    penalty_enabled: bool = False
    usage_control: bool = True
    ris_count_override: int | None = None
    freeze_channel: bool = False
    n_intervals: int = 128
    n_seeds: int = 1
    out_path: str = "metrics.csv"

    def validate(self) -> None:
        self.scenario.validate()
        if self.channel_mode not in CHANNEL_MODES:
            raise ConfigError(f"channel_mode must be one of {CHANNEL_MODES}")
        if self.ris_count_override is not None and not 0 <= self.ris_count_override <= 2:
            raise ConfigError("ris_count_override must be 0, 1, or 2")
        if self.n_intervals < 1 or self.n_seeds < 1:
            raise ConfigError("n_intervals and n_seeds must be >= 1")
        if len(self.reward_schedule) != self.scenario.n_users:
            raise ConfigError(
                f"reward schedule covers {len(self.reward_schedule)} users, "
                f"scenario has {self.scenario.n_users}"
            )
        for user, spans in enumerate(self.reward_schedule):
            cursor = 0
            for kind, start, end in spans:
                if kind not in REWARD_KINDS:
                    raise ConfigError(f"unknown reward kind {kind!r} for user {user}")
                if start != cursor:
                    raise ConfigError(
                        f"user {user} schedule has a gap or overlap at interval {start}"
                    )
                if end <= start:
                    raise ConfigError(f"user {user} has an empty span {kind}@{start}-{end}")
                cursor = end
            if cursor < self.n_intervals:
                raise ConfigError(
                    f"user {user} schedule ends at {cursor} but n_intervals is "
                    f"{self.n_intervals}"
                )

    def effective_scenario(self) -> ScenarioConfig:
        """Scenario with the channel mode and RIS override folded in."""
        scenario = replace(
            self.scenario, blockage_probability=_MODE_BLOCKAGE[self.channel_mode]
        )
        if self.ris_count_override is not None:
            scenario = replace(scenario, n_ris=self.ris_count_override)
        return scenario

    def reward_kinds_at(self, interval: int) -> tuple[str, ...]:
        kinds = []
        for spans in self.reward_schedule:
            for kind, start, end in spans:
                if start <= interval < end:
                    kinds.append(kind)
                    break
            else:
                raise ConfigError(f"no reward kind covers interval {interval}")
        return tuple(kinds)


# configuration file schema: key -> (description, parser)
def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_vec3(text: str) -> tuple[float, float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected three comma-separated numbers, got {text!r}")
    return tuple(parts)  # type: ignore[return-value]


def _parse_vec3_list(text: str) -> tuple[tuple[float, float, float], ...]:
    return tuple(_parse_vec3(chunk) for chunk in text.split(";") if chunk.strip())


def _parse_bounds(text: str) -> tuple[tuple[float, float], ...]:
    axes = []
    for chunk in text.split(";"):
        parts = [float(p) for p in chunk.split(",")]
        if len(parts) != 2:
            raise ValueError(f"bounds axis needs 'min,max', got {chunk!r}")
        axes.append((parts[0], parts[1]))
    if len(axes) != 3:
        raise ValueError("area bounds need three axes separated by ';'")
    return tuple(axes)


def _parse_pair(text: str) -> tuple[float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected two comma-separated numbers, got {text!r}")
    return parts[0], parts[1]


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in text.split(",") if p.strip())


def _parse_reward_spans(text: str) -> tuple[tuple[str, int, int], ...]:
    """Syntax: ``KIND@START-END[,KIND@START-END...]``, e.g. ``ACC@0-500,MSE@500-800``."""
    spans = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "@" not in chunk or "-" not in chunk.split("@", 1)[1]:
            raise ValueError(f"reward span must look like KIND@START-END, got {chunk!r}")
        kind, rng = chunk.split("@", 1)
        start_s, end_s = rng.split("-", 1)
        spans.append((kind.strip().upper(), int(start_s), int(end_s)))
    if not spans:
        raise ValueError("empty reward schedule")
    return tuple(spans)


_SCENARIO_KEYS = {
    "n_bs_antennas": int,
    "n_ut_antennas_per_user": int,
    "n_users": int,
    "n_ris": int,
    "ris_rows": int,
    "ris_cols": int,
    "n_taps": int,
    "n_subcarriers": int,
    "cp_length": int,
    "snr_db": float,
    "los_nlos_power_ratio": float,
    "bs_position": _parse_vec3,
    "ris_positions": _parse_vec3_list,
    "area_bounds": _parse_bounds,
    "blockage_probability": float,
    "carrier_wavelength": float,
    "tap_power_split": _parse_pair,
    "mobility": str,
    "walk_step": float,
    "seed": int,
}
_SCHEDULE_KEYS = {
    "warmup_intervals": int,
    "images_per_interval": int,
    "known_images_online": int,
}
_AGENT_KEYS = {
    "hidden_sizes": _parse_int_tuple,
    "learning_rate": float,
    "replay_capacity": int,
    "batch_size": int,
    "update_every": int,
    "steps_per_update": int,
    "epsilon_final": float,
    "usage_reward_ema": float,
}
_EXPERIMENT_KEYS = {
    "n_intervals": int,
    "n_seeds": int,
    "channel_mode": str,
    "penalty_enabled": _parse_bool,
    "usage_control": _parse_bool,
    "ris_count_override": int,
    "freeze_channel": _parse_bool,
    "out": str,
}


def load_config(path: str) -> ExperimentSpec:
    """Parse the flat dotted key/value configuration file.

    Unknown keys are rejected by name; parse failures report the line
    number. An empty file yields the full default experiment. The reward
    schedule defaults to ACC over the whole run for every user.
    """
    scenario_kw: dict = {}
    schedule_kw: dict = {}
    agent_kw: dict = {}
    experiment_kw: dict = {}
    rewards: dict[int, tuple] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            try:
                if key.startswith("scenario."):
                    sub = key[len("scenario.") :]
                    if sub in _SCENARIO_KEYS:
                        scenario_kw[sub] = _SCENARIO_KEYS[sub](value)
                    elif sub in _SCHEDULE_KEYS:
                        schedule_kw[sub] = _SCHEDULE_KEYS[sub](value)
                    else:
                        raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                elif key.startswith("agent."):
                    sub = key[len("agent.") :]
                    if sub not in _AGENT_KEYS:
                        raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                    agent_kw[sub] = _AGENT_KEYS[sub](value)
                elif key.startswith("experiment."):
                    sub = key[len("experiment.") :]
                    if sub not in _EXPERIMENT_KEYS:
                        raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                    experiment_kw[sub] = _EXPERIMENT_KEYS[sub](value)
                elif key.startswith("reward.user"):
                    user = int(key[len("reward.user") :])
                    rewards[user] = _parse_reward_spans(value)
                else:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            except ConfigError:
                raise
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc

    if schedule_kw:
        scenario_kw["schedule"] = Schedule(**{**Schedule().__dict__, **schedule_kw})
    scenario = ScenarioConfig(**scenario_kw)
    agent = AgentConfig(**agent_kw)
    out_path = experiment_kw.pop("out", "metrics.csv")
    n_intervals = experiment_kw.get("n_intervals", 128)
    if rewards:
        n_users = scenario.n_users
        if set(rewards) != set(range(n_users)):
            raise ConfigError(
                f"{path}: reward schedule must name users 0..{n_users - 1}, "
                f"got {sorted(rewards)}"
            )
        schedule = tuple(rewards[u] for u in range(n_users))
    else:
        schedule = tuple((("ACC", 0, n_intervals),) for _ in range(scenario.n_users))
    spec = ExperimentSpec(
        scenario=scenario,
        agent=agent,
        reward_schedule=schedule,
        out_path=out_path,
        **experiment_kw,
    )
    spec.validate()
    return spec


def resolved_text(spec: ExperimentSpec) -> str:
    """Human-readable echo of the fully resolved spec, for provenance."""
    payload = {
        "scenario": {**spec.scenario.__dict__, "schedule": spec.scenario.schedule.__dict__},
        "agent": spec.agent.__dict__,
        "experiment": {
            "reward_schedule": spec.reward_schedule,
            "channel_mode": spec.channel_mode,
            "penalty_enabled": spec.penalty_enabled,
            "usage_control": spec.usage_control,
            "ris_count_override": spec.ris_count_override,
            "freeze_channel": spec.freeze_channel,
            "n_intervals": spec.n_intervals,
            "n_seeds": spec.n_seeds,
            "out": spec.out_path,
        },
    }
    return json.dumps(payload, indent=2, default=str)


def _format_row(m: IntervalMetrics) -> str:
    return (
        f"{m.seed},{m.interval},{m.user},{m.reward_kind},{int(m.blocked)},"
        f"{m.acc:.10g},{m.mse:.10g},{m.reward:.10g},{m.sum_rate:.10g},{m.rows_used}"
    )


def run_experiment(spec: ExperimentSpec, out_path: str | None = None) -> str:
    """Run all seeds and write the metrics CSV; returns the output path.

    On an error mid-run the rows collected so far are flushed, a trailing
    ``# truncated`` marker is appended, and the error propagates.
    """
    spec.validate()
    path = out_path or spec.out_path
    scenario = spec.effective_scenario()
    root = np.random.SeedSequence(scenario.seed)
    seed_seqs = root.spawn(spec.n_seeds)
    rows: list[IntervalMetrics] = []
    truncated: Exception | None = None
    try:
        for seed_index in range(spec.n_seeds):
            world = World.create(
                scenario,
                spec.agent,
                seed_seqs[seed_index],
                penalty_enabled=spec.penalty_enabled,
                freeze_channel=spec.freeze_channel,
                usage_control=spec.usage_control,
                seed_label=seed_index,
            )
            warmup = scenario.schedule.warmup_intervals
            for interval in range(spec.n_intervals):
                phase = "offline" if interval < warmup else "online"
                kinds = spec.reward_kinds_at(interval)
                rows.extend(run_time_interval(world, phase, kinds))
    except Exception as exc:  # flush partial output, then re-raise
        truncated = exc
    rows.sort(key=lambda m: (m.seed, m.interval, m.user))
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for m in rows:
            fh.write(_format_row(m) + "\n")
        if truncated is not None:
            fh.write(f"# truncated: {truncated}\n")
    if truncated is not None:
        raise truncated
    return path


def _batched_singular_values(h: np.ndarray) -> np.ndarray:
    """Closed-form singular values of a (..., 2, 2) complex stack, descending."""
    a2 = np.abs(h) ** 2
    trace = a2.sum(axis=(-2, -1))
    det = np.abs(h[..., 0, 0] * h[..., 1, 1] - h[..., 0, 1] * h[..., 1, 0]) ** 2
    disc = np.sqrt(np.maximum(trace**2 - 4.0 * det, 0.0))
    hi = np.sqrt(np.maximum((trace + disc) / 2.0, 0.0))
    lo = np.sqrt(np.maximum((trace - disc) / 2.0, 0.0))
    return np.stack([hi, lo], axis=-1)


def exhaustive_oracle(
    links: ChannelRealization,
    scenario: ScenarioConfig,
    objective: str = "sum_rate",
) -> tuple[np.ndarray, float]:
    """Best phase-index assignment by full enumeration on a frozen channel.

    Searches all ``64^(total rows)`` configurations (capped at 64^2 = 4096);
    ties break lexicographically. Returns ``(indices, best value)`` with
    ``indices`` shaped (n_ris, ris_rows).
    """
    if objective != "sum_rate":
        raise ValueError(f"unsupported objective {objective!r}")
    if scenario.n_bs_antennas != 2 or scenario.n_ut_antennas_per_user != 2:
        raise ValueError("oracle implemented for 2x2 antenna configurations")
    s_count = links.h_bs_ris.shape[0]
    total_rows = s_count * scenario.ris_rows
    if PHASE_LEVELS**total_rows > PHASE_LEVELS**2:
        raise ValueError(
            f"search space 64^{total_rows} exceeds the 64^2 enumeration cap"
        )
    k = scenario.n_subcarriers
    gamma = 10.0 ** (scenario.snr_db / 10.0)

    # Per-(row, column) cascaded spectra so each candidate is a weighted sum.
    direct = np.zeros((scenario.n_bs_antennas, scenario.n_ut_antennas_per_user, 2 * scenario.n_taps - 1), dtype=np.complex128)
    direct[:, :, : scenario.n_taps] = links.h_direct
    direct_cfr = np.fft.fft(direct, n=k, axis=-1)
    base = np.transpose(direct_cfr, (2, 1, 0))  # (K, NU, NB)

    m_per = scenario.n_elements
    contrib = np.zeros(
        (total_rows, scenario.ris_cols, k, scenario.n_ut_antennas_per_user, scenario.n_bs_antennas),
        dtype=np.complex128,
    )
    ell = scenario.n_taps
    for s in range(s_count):
        for row in range(scenario.ris_rows):
            for col in range(scenario.ris_cols):
                m = row * scenario.ris_cols + col
                a = links.h_bs_ris[s, m]  # (NB, L)
                b = links.h_ris_ut[s, m]  # (NU, L)
                taps = np.zeros(
                    (scenario.n_bs_antennas, scenario.n_ut_antennas_per_user, 2 * ell - 1),
                    dtype=np.complex128,
                )
                for ta in range(ell):
                    for tb in range(ell):
                        taps[:, :, ta + tb] += a[:, None, ta] * b[None, :, tb]
                cfr = np.fft.fft(taps / m_per, n=k, axis=-1)
                contrib[s * scenario.ris_rows + row, col] = np.transpose(cfr, (2, 1, 0))

    col_idx = np.arange(scenario.ris_cols)
    candidates = np.stack(
        np.meshgrid(*[np.arange(PHASE_LEVELS)] * total_rows, indexing="ij"), axis=-1
    ).reshape(-1, total_rows)  # lexicographic order
    best_value = -np.inf
    best_row = None
    chunk = 256
    values = np.empty(len(candidates))
    for start in range(0, len(candidates), chunk):
        block = candidates[start : start + chunk]
        phases = block[:, :, None] * col_idx[None, None, :] * (np.pi / 32.0)
        weights = np.exp(1j * phases)  # (B, rows, cols)
        h = base[None] + np.einsum("brc,rckji->bkji", weights, contrib)
        lam = _batched_singular_values(h)  # (B, K, 2)
        values[start : start + len(block)] = (
            np.log2(1.0 + lam**2 * gamma).sum(axis=(1, 2)) / k
        )
    best_flat = int(np.argmax(values))
    best_value = float(values[best_flat])
    best_row = candidates[best_flat].reshape(s_count, scenario.ris_rows)
    return best_row, best_value


def save_agents(agents: AgentSet, directory: str) -> None:
    """One parameter file per agent plus a manifest of roles."""
    os.makedirs(directory, exist_ok=True)
    manifest = {"agents": []}
    for s, row_nets in enumerate(agents.phase_nets):
        for r, net in enumerate(row_nets):
            name = f"phase_s{s}_r{r}.bin"
            save_network(net, os.path.join(directory, name))
            manifest["agents"].append({"role": "phase", "ris": s, "row": r, "file": name})
    for u, part_nets in enumerate(agents.stream_nets):
        for p, net in enumerate(part_nets):
            name = f"stream_u{u}_p{p}.bin"
            save_network(net, os.path.join(directory, name))
            manifest["agents"].append({"role": "stream", "user": u, "part": p, "file": name})
    for s, net in enumerate(agents.usage_nets):
        name = f"usage_s{s}.bin"
        save_network(net, os.path.join(directory, name))
        manifest["agents"].append({"role": "usage", "ris": s, "file": name})
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)


def load_agents(agents: AgentSet, directory: str) -> None:
    """Restore parameters in place from a checkpoint directory."""
    with open(os.path.join(directory, "manifest.json"), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    for entry in manifest["agents"]:
        net = load_network(os.path.join(directory, entry["file"]))
        if entry["role"] == "phase":
            agents.phase_nets[entry["ris"]][entry["row"]] = net
        elif entry["role"] == "stream":
            agents.stream_nets[entry["user"]][entry["part"]] = net
        elif entry["role"] == "usage":
            agents.usage_nets[entry["ris"]] = net
        else:
            raise ValueError(f"unknown agent role {entry['role']!r}")
