"""Command-line surface: ``run``, ``oracle``, and ``selftest``.

Exit codes: 0 on success, 1 on configuration errors, 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import sys
import tempfile
from dataclasses import replace

import numpy as np

from ris_semcom import codec, harness, ofdm, reconstruct, ris
from ris_semcom.agents import compute_reward
from ris_semcom.scenario import ConfigError, ScenarioConfig, Schedule


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ris-semcom",
        description="RIS-assisted semantic transmission simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment and write a metrics CSV")
    run_p.add_argument("--config", required=True, help="experiment configuration file")
    run_p.add_argument("--seeds", type=int, default=None, help="override seed count")
    run_p.add_argument("--out", default=None, help="override output CSV path")

    oracle_p = sub.add_parser("oracle", help="exhaustive phase search on a frozen channel")
    oracle_p.add_argument("--config", required=True)
    oracle_p.add_argument("--rows", type=int, required=True, help="surface rows (total <= 2)")

    self_p = sub.add_parser("selftest", help="run the fast built-in property checks")
    self_p.add_argument("--out", default=None, help="directory for selftest artifacts")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    spec = harness.load_config(args.config)
    if args.seeds is not None:
        spec = replace(spec, n_seeds=args.seeds)
    if args.out is not None:
        spec = replace(spec, out_path=args.out)
    spec.validate()
    print(harness.resolved_text(spec))
    path = harness.run_experiment(spec)
    print(f"metrics written to {path}")
    return 0


def _cmd_oracle(args: argparse.Namespace) -> int:
    spec = harness.load_config(args.config)
    scenario = replace(
        spec.effective_scenario(), n_ris=1, ris_rows=args.rows, blockage_probability=1.0
    )
    scenario.validate()
    rng = np.random.default_rng(np.random.SeedSequence(scenario.seed))
    from ris_semcom.scenario import generate_links, initial_user_state

    state = initial_user_state(scenario, rng)
    links = generate_links(state, scenario, rng)
    indices, value = harness.exhaustive_oracle(links, scenario)
    print(f"best phase indices: {indices.tolist()}")
    print(f"best sum rate: {value:.6f} bits/s/Hz")
    return 0


def _selftest_checks(out_dir: str) -> list[tuple[str, bool, str]]:
    checks: list[tuple[str, bool, str]] = []

    def record(name: str, ok: bool, detail: str = "") -> None:
        checks.append((name, bool(ok), detail))

    rng = np.random.default_rng(7)

    sv = ris.steering_vector(16, 3)
    record(
        "steering-vector",
        np.allclose(sv, [1, 1j, -1], atol=1e-12),
        "index 16 over 3 columns",
    )

    cir = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    spec = ris.cir_to_cfr(cir, 16)
    record(
        "parseval",
        abs(np.sum(np.abs(spec) ** 2) - 16 * np.sum(np.abs(cir) ** 2))
        <= 1e-9 * 16 * np.sum(np.abs(cir) ** 2),
        "energy preserved by the K-point transform",
    )

    h = rng.standard_normal((64, 2, 2)) + 1j * rng.standard_normal((64, 2, 2))
    svd = ofdm.svd_subchannels(h)
    recon = np.einsum("kur,kr,kbr->kub", svd.u_k, svd.lambda_k, np.conj(svd.v_k))
    rel = np.linalg.norm(recon - h) / np.linalg.norm(h)
    record("svd-fidelity", rel <= 1e-9, f"relative reconstruction error {rel:.2e}")

    bits = ofdm.random_bits(rng, 2048)
    for order in (4, 16):
        round_trip = ofdm.demodulate(ofdm.modulate(bits, order), order)
        record(f"qam{order}-bijection", bool(np.array_equal(bits, round_trip)), "")

    rewards_ok = (
        abs(compute_reward("ACC", 0.95, 0.01, 0.0, 0) - 29.5) < 1e-12
        and abs(compute_reward("ACC", 0.80, 0.01, 0.0, 0) + 92.0) < 1e-12
        and abs(compute_reward("MSE", 0.0, 0.1, 0.0, 0) - 10.0) < 1e-12
        and abs(
            compute_reward("RATE", 0.0, 1.0, 3.0, 4, penalty_enabled=True) - (3.0 - 20.0)
        ) < 1e-12
        and compute_reward("ACC", 0.85, 0.01, 0.0, 0) == 10 * 0.85 - 100
    )
    record("reward-formulas", rewards_ok, "ACC/MSE/RATE values and the 0.85 boundary")

    start = rng.integers(0, 64, size=20)
    record(
        "phase-group",
        bool(np.all((start + 3 - 3) % 64 == start)),
        "+3 then -3 returns every start index",
    )

    frame = codec.generate_source(rng, 4)
    bits_bg = codec.encode_part(frame.part_background, ~frame.object_mask)
    bits_obj = codec.encode_part(frame.part_object, frame.object_mask)
    decoded = codec.decode_frame(bits_bg, bits_obj, frame.object_mask)
    _, correct = codec.classify(decoded, frame.object_mask, frame.class_label)
    floor = codec.frame_mse(frame.image, decoded)
    record("codec-roundtrip", bool(correct) and floor <= 0.01, f"floor {floor:.5f}")

    noisy = decoded.copy()
    noisy[frame.object_mask] = rng.random((int(frame.object_mask.sum()), 3))
    quality = reconstruct.detect_broken(noisy, frame.object_mask, reference=frame.image)
    filled, _ = reconstruct.inpaint(noisy, quality, frame.object_mask)
    record(
        "inpaint-improves",
        quality.object_bad
        and codec.frame_mse(frame.image, filled) <= codec.frame_mse(frame.image, noisy)
        and np.array_equal(filled[~frame.object_mask], noisy[~frame.object_mask]),
        "corrupted object refilled, background untouched",
    )

    scenario = ScenarioConfig(
        n_subcarriers=64,
        cp_length=4,
        ris_rows=2,
        ris_cols=2,
        schedule=Schedule(warmup_intervals=4, images_per_interval=4),
        seed=123,
    )
    spec_small = harness.ExperimentSpec(
        scenario=scenario,
        reward_schedule=((("ACC", 0, 10),),),
        n_intervals=10,
        n_seeds=1,
        out_path=f"{out_dir}/selftest_a.csv",
    )
    path_a = harness.run_experiment(spec_small)
    path_b = harness.run_experiment(replace(spec_small, out_path=f"{out_dir}/selftest_b.csv"))
    with open(path_a, "rb") as fa, open(path_b, "rb") as fb:
        identical = fa.read() == fb.read()
    record("experiment-determinism", identical, "same seed, byte-identical CSV")
    return checks


def _cmd_selftest(args: argparse.Namespace) -> int:
    out_dir = args.out or tempfile.mkdtemp(prefix="ris_semcom_selftest_")
    checks = _selftest_checks(out_dir)
    failures = 0
    for name, ok, detail in checks:
        status = "PASS" if ok else "FAIL"
        suffix = f" ({detail})" if detail else ""
        print(f"{status} {name}{suffix}")
        failures += 0 if ok else 1
    print(f"{len(checks) - failures}/{len(checks)} checks passed; artifacts in {out_dir}")
    return 0 if failures == 0 else 2


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
        return _cmd_selftest(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
