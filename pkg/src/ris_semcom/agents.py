"""Phase, stream, and row-usage agents with their interval training loop.

Three families of small Q-networks steer the system:

- one phase agent per surface row picks a phase step from
  ``{-3, -1, 0, +1, +3}`` (units of pi/32),
- one stream agent per semantic part per user picks that part's spatial
  stream (equal picks mean one shared 16-QAM stream),
- one usage agent per surface decides row-by-row whether the row is
  adjusted next interval or reserved for other users.

All agents observe subsampled channel features plus the current surface
state and regress the chosen action's value toward the immediately observed
reward (discount zero: the recorded tuples carry no successor state, so the
problem is treated as a contextual bandit). Experiences store the raw
outcome metrics; rewards are derived from them at sampling time under the
currently active requirement, so a requirement switch immediately re-scores
the replay history.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from math import log10

import numpy as np

from ris_semcom import codec, ofdm
from ris_semcom.nnet import AdamState, DenseNetwork, forward, init_network, train_batch
from ris_semcom.ris import PHASE_LEVELS, RisConfig, cascade
from ris_semcom.scenario import (
    ChannelRealization,
    ScenarioConfig,
    UserState,
    generate_links,
    initial_user_state,
    step_scenario,
)

PHASE_DELTAS = (-3, -1, 0, 1, 3)
REWARD_KINDS = ("ACC", "MSE", "RATE")
N_OBS_SUBCARRIERS = 16
MSE_FLOOR = 1e-6
ACC_THRESHOLD = 0.85
ROW_PENALTY = 5.0
EPSILON_BOOST = 0.5
EPSILON_BOOST_SPAN = 64
USAGE_DITHER = 0.5


@dataclass(frozen=True)
class AgentConfig:
    """Training hyperparameters shared by all agent families."""

    hidden_sizes: tuple[int, ...] = (48, 32)
    learning_rate: float = 1e-3
    replay_capacity: int = 1024
    batch_size: int = 8
    update_every: int = 8
    steps_per_update: int = 4
    epsilon_final: float = 0.05
    usage_reward_ema: float = 0.1
    recent_window: int = 128


@dataclass(frozen=True)
class Observation:
    """Feature blocks shared by the agent families.

    ``channels`` holds, per user, the real/imaginary channel response at 16
    evenly spaced subcarriers; ``phases`` holds the current phase indices
    scaled to [0, 1); ``streams`` holds each user's previous per-part stream
    choice one-hot; ``usage`` holds the current row-usage flags. The shared
    families (phase, usage) see every user's channel block; a stream agent
    sees only its own user's block plus that user's previous choice.
    """

    channels: tuple[np.ndarray, ...]
    phases: np.ndarray
    streams: tuple[np.ndarray, ...]
    usage: np.ndarray

    def phase_view(self) -> np.ndarray:
        return np.concatenate([*self.channels, self.phases])

    def stream_view(self, user: int) -> np.ndarray:
        return np.concatenate([self.channels[user], self.phases, self.streams[user]])

    def usage_view(self) -> np.ndarray:
        return np.concatenate([*self.channels, self.phases, self.usage])


def build_observation(
    cfrs: list[np.ndarray],
    ris: RisConfig,
    prev_plans: list[ofdm.StreamPlan],
    config: ScenarioConfig,
) -> Observation:
    """Deterministic feature extraction from the current world state."""
    k = config.n_subcarriers
    idx = (np.arange(N_OBS_SUBCARRIERS) * k) // N_OBS_SUBCARRIERS if k >= N_OBS_SUBCARRIERS else np.arange(k)
    chan_blocks = []
    for cfr in cfrs:
        sub = cfr[idx]
        chan_blocks.append(np.concatenate([sub.real.ravel(), sub.imag.ravel()]))
    phases = ris.phase_index.ravel().astype(np.float64) / PHASE_LEVELS
    streams = []
    for plan in prev_plans:
        onehot = np.zeros(2 * ofdm.N_PARTS)
        for part, stream in enumerate(plan.assignment):
            onehot[2 * part + stream] = 1.0
        streams.append(onehot)
    usage = ris.row_in_use.ravel().astype(np.float64)
    return Observation(
        channels=tuple(chan_blocks), phases=phases, streams=tuple(streams), usage=usage
    )


@dataclass
class FrameOutcome:
    """Per-known-frame result for one user: inputs to any reward kind."""

    acc: float
    mse: float
    rate: float
    rows_used: int


@dataclass
class Experience:
    """One training tuple: observation blocks, joint action, raw outcomes."""

    phase_obs: np.ndarray
    stream_obs: tuple[np.ndarray, ...]
    usage_obs: np.ndarray
    phase_choice: np.ndarray  # (S, rows) action indices into PHASE_DELTAS
    stream_choice: tuple[tuple[int, int], ...]  # per user, per part
    usage_choice: np.ndarray  # (S, rows) bool
    outcomes: tuple[FrameOutcome, ...]  # per user
    blocked_count: int = 0  # users whose direct link was blocked this interval

    def reward(self, kinds: tuple[str, ...], penalty_enabled: bool) -> tuple[float, ...]:
        return tuple(
            compute_reward(
                kind, o.acc, o.mse, o.rate, o.rows_used, penalty_enabled=penalty_enabled
            )
            for kind, o in zip(kinds, self.outcomes)
        )


def compute_reward(
    kind: str,
    acc: float,
    mse: float,
    rate: float,
    rows_used: int,
    penalty_enabled: bool = False,
) -> float:
    """Requirement-dependent scalar reward.

    ACC pays ``10*acc - 10*log10(mse)`` only while accuracy strictly exceeds
    0.85, else the flat penalty ``10*acc - 100``; MSE pays ``-10*log10(mse)``
    alone; RATE pays the spectral efficiency. Enabling the row penalty
    subtracts 5 per row currently in use. ``mse`` is floored at 1e-6.
    """
    if kind not in REWARD_KINDS:
        raise ValueError(f"unknown reward kind {kind!r}")
    if not 0.0 <= acc <= 1.0:
        raise ValueError(f"acc must be in [0, 1], got {acc}")
    if rate < 0.0:
        raise ValueError(f"rate must be nonnegative, got {rate}")
    mse = max(float(mse), MSE_FLOOR)
    if kind == "ACC":
        value = 10.0 * acc - 10.0 * log10(mse) if acc > ACC_THRESHOLD else 10.0 * acc - 100.0
    elif kind == "MSE":
        value = -10.0 * log10(mse)
    else:
        value = float(rate)
    if penalty_enabled:
        value -= ROW_PENALTY * rows_used
    return value


def joint_multiuser_reward(rewards: tuple[float, ...] | list[float]) -> float:
    """Shared agents train on the plain sum of the per-user rewards."""
    return float(sum(rewards))


def epsilon_greedy(
    net: DenseNetwork, obs: np.ndarray, epsilon: float, rng: np.random.Generator
) -> int:
    """Uniform action with probability epsilon, else lowest-index argmax."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    n_actions = net.weights[-1].shape[1]
    if rng.random() < epsilon:
        return int(rng.integers(n_actions))
    return int(np.argmax(forward(net, obs)))


def act_phase(net: DenseNetwork, obs: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Pick a phase-step index (see PHASE_DELTAS) for one surface row."""
    return epsilon_greedy(net, obs, epsilon, rng)


def act_stream(net: DenseNetwork, obs: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Pick the transmission stream for one semantic part."""
    return epsilon_greedy(net, obs, epsilon, rng)


def act_rows(net: DenseNetwork, obs: np.ndarray) -> np.ndarray:
    """Hard-threshold the sigmoid heads: >= 0.5 selects the row."""
    return forward(net, obs) >= 0.5


@dataclass
class AgentSet:
    """All agent networks, optimizer states, replay, and exploration state."""

    phase_nets: list[list[DenseNetwork]]  # [s][row]
    stream_nets: list[list[DenseNetwork]]  # [user][part]
    usage_nets: list[DenseNetwork]  # [s]
    phase_opt: list[list[AdamState]]
    stream_opt: list[list[AdamState]]
    usage_opt: list[AdamState]
    replay: deque
    epsilon: float
    usage_reward_means: dict
    config: AgentConfig

    @classmethod
    def create(
        cls,
        scenario: ScenarioConfig,
        agent_config: AgentConfig,
        rng: np.random.Generator,
        n_ris: int | None = None,
    ) -> "AgentSet":
        s_count = scenario.n_ris if n_ris is None else n_ris
        n_users = scenario.n_users
        chan_len = min(N_OBS_SUBCARRIERS, scenario.n_subcarriers)
        user_chan = chan_len * 2 * scenario.n_bs_antennas * scenario.n_ut_antennas_per_user
        all_chan = user_chan * n_users
        phase_dim = s_count * scenario.ris_rows
        hidden = list(agent_config.hidden_sizes)

        def make(in_dim: int, out_dim: int, head: str) -> DenseNetwork:
            sizes = [in_dim] + hidden + [out_dim]
            acts = ["relu"] * len(hidden) + [head]
            return init_network(sizes, acts, rng)

        phase_nets = [
            [make(all_chan + phase_dim, len(PHASE_DELTAS), "linear") for _ in range(scenario.ris_rows)]
            for _ in range(s_count)
        ]
        stream_nets = [
            [make(user_chan + phase_dim + 2 * ofdm.N_PARTS, 2, "linear") for _ in range(ofdm.N_PARTS)]
            for _ in range(n_users)
        ]
        usage_nets = [
            make(all_chan + phase_dim + phase_dim, scenario.ris_rows, "sigmoid")
            for _ in range(s_count)
        ]
        for net in usage_nets:
            net.biases[-1][:] = 1.0  # rows start biased toward staying in use
        return cls(
            phase_nets=phase_nets,
            stream_nets=stream_nets,
            usage_nets=usage_nets,
            phase_opt=[[AdamState.for_network(n) for n in row] for row in phase_nets],
            stream_opt=[[AdamState.for_network(n) for n in row] for row in stream_nets],
            usage_opt=[AdamState.for_network(n) for n in usage_nets],
            replay=deque(maxlen=agent_config.replay_capacity),
            epsilon=1.0,
            usage_reward_means={},
            config=agent_config,
        )

    @property
    def n_agents(self) -> int:
        return (
            sum(len(row) for row in self.phase_nets)
            + sum(len(row) for row in self.stream_nets)
            + len(self.usage_nets)
        )

    def observe_reward(self, joint_reward: float, blocked_count: int = 0) -> None:
        """Track the running joint reward the usage agents compare against.

        One mean per blockage state: blockage swings the reward far more than
        any usage pattern does, so an unconditioned baseline would label
        patterns by the channel they happened to see rather than by merit.
        """
        alpha = self.config.usage_reward_ema
        if blocked_count not in self.usage_reward_means:
            self.usage_reward_means[blocked_count] = joint_reward
        else:
            self.usage_reward_means[blocked_count] += alpha * (
                joint_reward - self.usage_reward_means[blocked_count]
            )


def dqn_update(
    agents: AgentSet,
    rng: np.random.Generator,
    reward_kinds: tuple[str, ...],
    penalty_enabled: bool,
    batch_size: int | None = None,
    train_usage: bool = True,
) -> dict[str, float]:
    """One value-regression step per agent on a random replay batch.

    Phase and usage agents are scored with the joint (summed) reward;
    stream agents with their own user's reward. Usage agents are trained by
    binary cross-entropy toward their taken row pattern when the sampled
    reward beats the running mean, and toward its complement otherwise.
    Half of every batch is drawn from the newest ``recent_window``
    experiences so online adaptation tracks requirement and channel changes;
    the other half is uniform over the whole buffer for coverage.
    Returns the mean pre-step loss per family.
    """
    batch = agents.config.batch_size if batch_size is None else batch_size
    n_stored = len(agents.replay)
    if n_stored < batch:
        raise ValueError(f"replay holds {n_stored} < batch_size {batch}")
    window = min(agents.config.recent_window, n_stored)
    n_recent = batch // 2
    picks = np.concatenate(
        [
            rng.integers(0, n_stored, size=batch - n_recent),
            rng.integers(n_stored - window, n_stored, size=n_recent),
        ]
    )
    samples = [agents.replay[int(i)] for i in picks]
    per_user = np.array(
        [e.reward(reward_kinds, penalty_enabled) for e in samples]
    )  # (B, n_users)
    joint = per_user.sum(axis=1)
    lr = agents.config.learning_rate
    losses: dict[str, list[float]] = {"phase": [], "stream": [], "usage": []}

    if agents.phase_nets:
        phase_in = np.stack([e.phase_obs for e in samples])
        for s, row_nets in enumerate(agents.phase_nets):
            for r, net in enumerate(row_nets):
                idx = np.array([e.phase_choice[s, r] for e in samples])
                loss = train_batch(
                    net, phase_in, (idx, joint), "mse_on_selected_output",
                    agents.phase_opt[s][r], lr,
                )
                losses["phase"].append(loss)
    for u, part_nets in enumerate(agents.stream_nets):
        stream_in = np.stack([e.stream_obs[u] for e in samples])
        for p, net in enumerate(part_nets):
            idx = np.array([e.stream_choice[u][p] for e in samples])
            loss = train_batch(
                net, stream_in, (idx, per_user[:, u]), "mse_on_selected_output",
                agents.stream_opt[u][p], lr,
            )
            losses["stream"].append(loss)
    if agents.usage_nets and train_usage:
        usage_in = np.stack([e.usage_obs for e in samples])
        baselines = np.array(
            [agents.usage_reward_means.get(e.blocked_count, joint[i]) for i, e in enumerate(samples)]
        )
        better = joint >= baselines
        for s, net in enumerate(agents.usage_nets):
            taken = np.stack([e.usage_choice[s].astype(np.float64) for e in samples])
            labels = np.where(better[:, None], taken, 1.0 - taken)
            loss = train_batch(
                net, usage_in, labels, "binary_cross_entropy", agents.usage_opt[s], lr
            )
            losses["usage"].append(loss)
    return {k: float(np.mean(v)) if v else 0.0 for k, v in losses.items()}


@dataclass
class IntervalMetrics:
    """One reporting row: what one user experienced during one interval."""

    interval: int
    user: int
    acc: float
    mse: float
    reward: float
    sum_rate: float
    rows_used: int
    blocked: bool
    reward_kind: str
    seed: int


@dataclass
class World:
    """Mutable simulation state for one seed: the environment bundle."""

    scenario: ScenarioConfig
    agent_config: AgentConfig
    agents: AgentSet
    ris: RisConfig
    user_states: list[UserState]
    prev_plans: list[ofdm.StreamPlan]
    rng_scenario: np.random.Generator
    rng_source: np.random.Generator
    rng_noise: np.random.Generator
    rng_agent: np.random.Generator
    seed_label: int = 0
    interval: int = 0
    penalty_enabled: bool = False
    freeze_channel: bool = False
    usage_control: bool = True
    frozen_links: list[ChannelRealization] | None = None
    experiences_since_update: int = 0
    last_reward_kinds: tuple[str, ...] | None = None
    boost_until: int = -1

    @classmethod
    def create(
        cls,
        scenario: ScenarioConfig,
        agent_config: AgentConfig,
        seed_seq: np.random.SeedSequence,
        penalty_enabled: bool = False,
        freeze_channel: bool = False,
        usage_control: bool = True,
        seed_label: int = 0,
    ) -> "World":
        """Build a fresh world; stream order is fixed so module draws never
        perturb one another: scenario, source, noise, agent-init, agent-act."""
        scenario.validate()
        sq = seed_seq.spawn(5)
        rng_scenario = np.random.default_rng(sq[0])
        rng_source = np.random.default_rng(sq[1])
        rng_noise = np.random.default_rng(sq[2])
        rng_init = np.random.default_rng(sq[3])
        rng_agent = np.random.default_rng(sq[4])
        agents = AgentSet.create(scenario, agent_config, rng_init)
        ris = RisConfig.initial(scenario, rng=rng_init)
        states = [initial_user_state(scenario, rng_scenario) for _ in range(scenario.n_users)]
        plans = [ofdm.StreamPlan((0, 1)) for _ in range(scenario.n_users)]
        return cls(
            scenario=scenario,
            agent_config=agent_config,
            agents=agents,
            ris=ris,
            user_states=states,
            prev_plans=plans,
            rng_scenario=rng_scenario,
            rng_source=rng_source,
            rng_noise=rng_noise,
            rng_agent=rng_agent,
            seed_label=seed_label,
            penalty_enabled=penalty_enabled,
            freeze_channel=freeze_channel,
            usage_control=usage_control,
        )

    def current_epsilon(self, family: str = "phase") -> float:
        warmup = max(self.scenario.schedule.warmup_intervals, 1)
        final = self.agent_config.epsilon_final
        if self.interval < warmup:
            return 1.0 - (1.0 - final) * (self.interval / warmup)
        if family == "stream" and self.interval < self.boost_until:
            # a requirement switch re-opens stream exploration for a burst;
            # phases keep exploiting so the channel stays steady underneath
            remaining = (self.boost_until - self.interval) / EPSILON_BOOST_SPAN
            return final + (EPSILON_BOOST - final) * remaining
        return final


def _transmit_known_frame(
    world: World, plan: ofdm.StreamPlan, svd: ofdm.SvdDecomposition
) -> tuple[float, float]:
    """Generate, send, and score one frame; returns (acc, mse)."""
    label = int(world.rng_source.integers(codec.N_CLASSES))
    frame = codec.generate_source(world.rng_source, label)
    bits_bg = codec.encode_part(frame.part_background, ~frame.object_mask)
    bits_obj = codec.encode_part(frame.part_object, frame.object_mask)
    payload = ofdm.map_bits_to_streams(bits_bg, bits_obj, plan)
    rx_bg, rx_obj, _ = ofdm.transmit_frame(payload, svd, world.scenario.snr_db, world.rng_noise)
    decoded = codec.decode_frame(rx_bg, rx_obj, frame.object_mask)
    _, correct = codec.classify(decoded, frame.object_mask, frame.class_label)
    return float(correct), codec.frame_mse(frame.image, decoded)


def run_time_interval(
    world: World,
    phase: str,
    reward_kinds: tuple[str, ...],
) -> list[IntervalMetrics]:
    """Advance the world one interval and return one metrics row per user.

    ``phase`` selects the learning schedule: ``offline`` records every frame
    as an experience, ``online`` records only the known frames, ``frozen``
    records nothing. The scenario steps, agents act on the pre-action
    channel, in-use rows apply their phase steps, and the chosen plans carry
    the interval's images.
    """
    if phase not in ("offline", "online", "frozen"):
        raise ValueError(f"unknown phase {phase!r}")
    cfg = world.scenario
    if len(reward_kinds) != cfg.n_users:
        raise ValueError("need one reward kind per user")
    for kind in reward_kinds:
        if kind not in REWARD_KINDS:
            raise ValueError(f"unknown reward kind {kind!r}")
    if (
        world.last_reward_kinds is not None
        and tuple(reward_kinds) != world.last_reward_kinds
        and world.interval >= world.scenario.schedule.warmup_intervals
    ):
        world.boost_until = world.interval + EPSILON_BOOST_SPAN
    world.last_reward_kinds = tuple(reward_kinds)

    if world.freeze_channel and world.frozen_links is not None:
        links = world.frozen_links
    else:
        world.user_states = [
            step_scenario(s, cfg, world.rng_scenario) if world.interval > 0 else s
            for s in world.user_states
        ]
        links = [generate_links(s, cfg, world.rng_scenario) for s in world.user_states]
        if world.freeze_channel:
            world.frozen_links = links

    pre_cfrs = [cascade(lk, world.ris, cfg).cfr for lk in links]
    obs = build_observation(pre_cfrs, world.ris, world.prev_plans, cfg)
    eps = world.current_epsilon()
    eps_stream = world.current_epsilon("stream")

    phase_view = obs.phase_view()
    usage_view = obs.usage_view()
    s_count = len(world.agents.phase_nets)
    phase_choice = np.zeros((s_count, cfg.ris_rows), dtype=np.int64)
    for s in range(s_count):
        for r in range(cfg.ris_rows):
            phase_choice[s, r] = act_phase(
                world.agents.phase_nets[s][r], phase_view, eps, world.rng_agent
            )
    # row saving engages online; the offline phase trains on all resources
    usage_active = world.usage_control and world.interval >= cfg.schedule.warmup_intervals
    usage_choice = np.ones((s_count, cfg.ris_rows), dtype=bool)
    if usage_active:
        for s in range(s_count):
            usage_choice[s] = act_rows(world.agents.usage_nets[s], usage_view)
        # exploration dithering: the hard decision itself is deterministic, but
        # the trainer occasionally flips rows so cheaper patterns get sampled
        dither = world.rng_agent.random(usage_choice.shape) < USAGE_DITHER * eps
        usage_choice = usage_choice ^ dither
    stream_choice = []
    plans = []
    for u in range(cfg.n_users):
        view = obs.stream_view(u)
        picks = tuple(
            act_stream(world.agents.stream_nets[u][p], view, eps_stream, world.rng_agent)
            for p in range(ofdm.N_PARTS)
        )
        stream_choice.append(picks)
        plans.append(ofdm.StreamPlan(picks))

    # only rows in use move; unused rows keep reflecting at their stale phase
    deltas = np.array(PHASE_DELTAS)[phase_choice]
    world.ris.phase_index = np.where(
        usage_choice,
        (world.ris.phase_index + deltas) % PHASE_LEVELS,
        world.ris.phase_index,
    )
    world.ris.row_in_use = usage_choice
    rows_used = int(usage_choice.sum())

    metrics: list[IntervalMetrics] = []
    known: list[list[tuple[float, float]]] = []
    rates = []
    for u in range(cfg.n_users):
        effective = cascade(links[u], world.ris, cfg)
        svd = ofdm.svd_subchannels(effective.cfr)
        rate = ofdm.sum_rate(svd, cfg.snr_db)
        rates.append(rate)
        n_frames = cfg.schedule.images_per_interval
        if phase == "offline":
            n_known = n_frames
        elif phase == "online":
            n_known = cfg.schedule.known_images_online
        else:
            n_known = 0
        accs, mses, user_known = [], [], []
        for f in range(n_frames):
            acc, mse = _transmit_known_frame(world, plans[u], svd)
            accs.append(acc)
            mses.append(mse)
            if f < n_known:
                user_known.append((acc, mse))
        known.append(user_known)
        interval_acc = float(np.mean(accs))
        interval_mse = float(np.mean(mses))
        metrics.append(
            IntervalMetrics(
                interval=world.interval,
                user=u,
                acc=interval_acc,
                mse=interval_mse,
                reward=compute_reward(
                    reward_kinds[u], interval_acc, interval_mse, rate, rows_used,
                    penalty_enabled=world.penalty_enabled,
                ),
                sum_rate=rate,
                rows_used=rows_used,
                blocked=world.user_states[u].direct_link_blocked,
                reward_kind=reward_kinds[u],
                seed=world.seed_label,
            )
        )

    if phase != "frozen":
        n_exp = min(len(k) for k in known) if known else 0
        for f in range(n_exp):
            outcomes = tuple(
                FrameOutcome(acc=known[u][f][0], mse=known[u][f][1], rate=rates[u], rows_used=rows_used)
                for u in range(cfg.n_users)
            )
            blocked_count = sum(s.direct_link_blocked for s in world.user_states)
            exp = Experience(
                phase_obs=phase_view,
                stream_obs=tuple(obs.stream_view(u) for u in range(cfg.n_users)),
                usage_obs=usage_view,
                phase_choice=phase_choice.copy(),
                stream_choice=tuple(stream_choice),
                usage_choice=usage_choice.copy(),
                outcomes=outcomes,
                blocked_count=blocked_count,
            )
            world.agents.replay.append(exp)
            world.agents.observe_reward(
                joint_multiuser_reward(exp.reward(reward_kinds, world.penalty_enabled)),
                blocked_count,
            )
            world.experiences_since_update += 1
            if (
                world.experiences_since_update >= world.agent_config.update_every
                and len(world.agents.replay) >= world.agent_config.batch_size
            ):
                world.experiences_since_update = 0
                for _ in range(world.agent_config.steps_per_update):
                    dqn_update(
                        world.agents,
                        world.rng_agent,
                        reward_kinds,
                        world.penalty_enabled,
                        train_usage=usage_active,
                    )

    world.prev_plans = plans
    world.interval += 1
    return metrics
