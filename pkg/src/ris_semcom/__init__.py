"""Desk-scale simulator of RIS-assisted semantic image transmission.

The package is organized as one module per subsystem:

- :mod:`ris_semcom.scenario` -- geometry, mobility, blockage, raw channel links
- :mod:`ris_semcom.ris` -- steering vectors, cascaded impulse response, CFR
- :mod:`ris_semcom.ofdm` -- SVD subchannels, QAM stream mapping, noisy transport
- :mod:`ris_semcom.codec` -- synthetic semantic source, reference codec, classifier
- :mod:`ris_semcom.nnet` -- minimal dense-network engine with gradient checking
- :mod:`ris_semcom.agents` -- phase / stream / row-usage agents and training loop
- :mod:`ris_semcom.reconstruct` -- broken-part detection and diffusion inpainting
- :mod:`ris_semcom.harness` -- experiment configuration, orchestration, oracle
"""

from ris_semcom.scenario import (
    ScenarioConfig,
    Schedule,
    UserState,
    ChannelRealization,
    step_scenario,
    generate_links,
)
from ris_semcom.ris import (
    RisConfig,
    EffectiveChannel,
    steering_vector,
    cascade,
    cir_to_cfr,
)
from ris_semcom.ofdm import (
    SvdDecomposition,
    StreamPlan,
    StreamSymbols,
    svd_subchannels,
    map_bits_to_streams,
    transmit_frame,
    sum_rate,
    time_domain_reference,
)
from ris_semcom.codec import (
    SemanticFrame,
    object_templates,
    generate_source,
    segment,
    encode_part,
    decode_part,
    decode_frame,
    classify,
    frame_mse,
)
from ris_semcom.nnet import (
    DenseNetwork,
    AdamState,
    init_network,
    forward,
    train_batch,
    finite_diff_check,
)
from ris_semcom.agents import (
    AgentSet,
    Experience,
    PHASE_DELTAS,
    compute_reward,
    joint_multiuser_reward,
    dqn_update,
    run_time_interval,
    World,
)
from ris_semcom.reconstruct import PartQuality, detect_broken, inpaint
from ris_semcom.harness import (
    ExperimentSpec,
    IntervalMetrics,
    load_config,
    run_experiment,
    exhaustive_oracle,
    CSV_HEADER,
)

__version__ = "0.1.0"
