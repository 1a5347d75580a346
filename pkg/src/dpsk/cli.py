"""Command-line front end.

Subcommands: ``region`` (closed-form trade-off boundaries), ``rho-star``
(two-encoder fixed-point correlation), ``simulate`` (seeded Monte Carlo
with a report), ``sweep`` (simulation across a power-split grid).

Parameter flags are spelled exactly like the configuration-file keys, so a
``--config`` JSON file and command-line flags are interchangeable; flags
win. Exit codes: 0 success, 2 configuration or usage error, 1 runtime
error.
"""

import argparse
import os
import sys

from . import harness, output, regions
from . import params as params_mod
from .errors import ConfigError, DpskError
from .params import (
    CONFIG_KEYS,
    DEFAULT_SEED,
    DEFAULT_TRIALS,
    BlockConfig,
    DpcParams,
    MacParams,
    NoisyObsParams,
)

_CHANNEL_KEYS = {
    "dpc": ("P", "Q", "sigma2"),
    "mac": ("P1", "P2", "Q", "sigma2"),
    "noisy": ("P", "Q", "sigma2", "sigma_z2"),
}

_FOREIGN_KEYS = {
    "dpc": ("P1", "P2", "beta", "sigma_z2"),
    "mac": ("P", "sigma_z2"),
    "noisy": ("P1", "P2", "beta"),
}


def _merged_config(args, scheme=None):
    """Config-file values overridden by whatever flags were given."""
    raw = params_mod.load_config(args.config) if args.config else {}
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}", field=unknown[0])
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    if scheme is not None:
        for key in _FOREIGN_KEYS[scheme]:
            if key in raw:
                raise ConfigError(
                    f"key {key!r} does not apply to the {scheme} scheme", field=key
                )
    return raw


def _channel(scheme, raw):
    values = {}
    for key in _CHANNEL_KEYS[scheme]:
        if key not in raw:
            raise ConfigError(f"{key} is required", field=key)
        values[key] = raw[key]
    cls = {"dpc": DpcParams, "mac": MacParams, "noisy": NoisyObsParams}[scheme]
    return cls(**values)


def _grid(count, name="grid"):
    if isinstance(count, bool) or not isinstance(count, int) or count < 1:
        raise ConfigError(f"{name} must be a positive integer, got {count!r}", field=name)
    return regions.unit_grid(count)


def _check_trials(value):
    if value is None:
        return DEFAULT_TRIALS
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"trials must be a positive integer, got {value!r}", field="trials")
    return value


def _check_seed(value):
    if value is None:
        return DEFAULT_SEED
    if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < 2**64:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {value!r}", field="seed")
    return value


def _block_from(raw):
    if "n" not in raw:
        raise ConfigError("n is required", field="n")
    return BlockConfig(
        n=raw["n"], rate=raw.get("rate"), rate_fraction=raw.get("rate_fraction")
    )


# ---------------------------------------------------------------------------
# handlers


def _cmd_region(args):
    variant = args.variant
    if variant in ("dpc-fb", "noisy"):
        scheme = "dpc" if variant == "dpc-fb" else "noisy"
        raw = _merged_config(args, scheme)
        channel = _channel(scheme, raw)
        points = regions.boundary_sweep(channel, _grid(args.grid))
        sigma_z2 = channel.sigma_z2 if scheme == "noisy" else None
        if args.format == "json":
            return output.json_text(output.region_rows(points, sigma_z2=sigma_z2))
        return output.region_csv(points, sigma_z2=sigma_z2)

    raw = _merged_config(args, "mac")
    channel = _channel("mac", raw)
    gamma_grid = _grid(args.grid)
    beta_grid = _grid(args.beta_grid, "beta-grid") if args.beta_grid is not None else gamma_grid
    if variant == "mac-fb":
        rho_grid = _grid(args.rho_grid, "rho-grid") if args.rho_grid is not None else None
        rows = regions.mac_fb_region(channel, gamma_grid, beta_grid, rho_grid=rho_grid)
    else:
        rows = regions.mac_nofb_region(channel, gamma_grid, beta_grid)
    if args.format == "json":
        return output.json_text(output.mac_region_rows(rows))
    return output.mac_region_csv(rows)


def _cmd_rho_star(args):
    raw = _merged_config(args, "mac")
    raw.setdefault("Q", 0.0)  # rho* does not involve the state variance
    channel = _channel("mac", raw)
    for key in ("gamma", "beta"):
        if key not in raw:
            raise ConfigError(f"{key} is required", field=key)
    value = regions.solve_rho_star(channel, raw["gamma"], raw["beta"])
    if args.format == "json":
        return output.json_text({"rho_star": value})
    return output.fmt(value) + "\n"


def _trace_writer(directory, trials):
    os.makedirs(directory, exist_ok=True)
    width = max(6, len(str(max(trials - 1, 0))))
    def write(trial, columns):
        name = f"trial_{trial:0{width}d}.csv"
        output.write_text(output.trace_csv(columns), os.path.join(directory, name))
    return write


def _cmd_simulate(args):
    raw = _merged_config(args)
    run = params_mod.validate(raw, scheme=args.variant)
    writer = None
    if args.dump_traces:
        writer = _trace_writer(args.dump_traces, run.trials)
    report = harness.run_config(
        run, paper_sgn=getattr(args, "paper_sgn", False), trace_writer=writer
    )
    if args.format == "json":
        return output.json_text(report.as_dict())
    return output.report_csv(report.as_dict())


def _cmd_sweep(args):
    scheme = args.variant
    raw = _merged_config(args, scheme)
    channel = _channel(scheme, raw)
    block = _block_from(raw)
    trials = _check_trials(raw.get("trials"))
    seed = _check_seed(raw.get("seed"))
    gamma_grid = _grid(args.grid)
    beta_grid = None
    if scheme == "mac":
        beta_grid = (
            _grid(args.beta_grid, "beta-grid") if args.beta_grid is not None else gamma_grid
        )
    rows = harness.sweep(
        scheme,
        channel,
        gamma_grid,
        block,
        trials,
        harness.RandomPlan(seed),
        beta_grid=beta_grid,
        paper_sgn=getattr(args, "paper_sgn", False),
    )
    if args.format == "json":
        return output.json_text(rows)
    return output.rows_csv(rows)


# ---------------------------------------------------------------------------
# parser


def _common_flags():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="PATH", help="write output to PATH instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--config", metavar="PATH", help="JSON file with parameter defaults")
    return common


def _add_channel_flags(parser, scheme):
    for key in _CHANNEL_KEYS[scheme]:
        parser.add_argument(f"--{key}", type=float, default=None)


def _add_block_flags(parser):
    parser.add_argument("--n", type=int, default=None, help="block length")
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--rate", type=float, default=None, help="bits per channel use")
    group.add_argument(
        "--rate_fraction", type=float, default=None,
        help="rate as a multiple of the theoretical cap",
    )


def _add_trial_flags(parser):
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)


def build_parser():
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="dpsk",
        description="Feedback coding and state estimation for dirty paper channels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    region = sub.add_parser("region", help="closed-form trade-off boundaries")
    region_sub = region.add_subparsers(dest="variant", required=True)
    for variant in ("dpc-fb", "mac-fb", "mac-nofb", "noisy"):
        scheme = {"dpc-fb": "dpc", "noisy": "noisy"}.get(variant, "mac")
        p = region_sub.add_parser(variant, parents=[common])
        _add_channel_flags(p, scheme)
        p.add_argument("--grid", type=int, default=101, help="points on the gamma grid")
        if scheme == "mac":
            p.add_argument("--beta-grid", type=int, default=None, dest="beta_grid")
        if variant == "mac-fb":
            p.add_argument(
                "--rho-grid", type=int, default=None, dest="rho_grid",
                help="evaluate a rho grid instead of the fixed point rho*",
            )
        p.set_defaults(func=_cmd_region)

    rho = sub.add_parser("rho-star", parents=[common],
                         help="fixed-point error correlation of the two-encoder loop")
    _add_channel_flags(rho, "mac")
    rho.add_argument("--gamma", type=float, default=None)
    rho.add_argument("--beta", type=float, default=None)
    rho.set_defaults(func=_cmd_rho_star)

    simulate = sub.add_parser("simulate", help="seeded Monte Carlo experiment")
    simulate_sub = simulate.add_subparsers(dest="variant", required=True)
    for variant in ("dpc", "mac", "noisy"):
        p = simulate_sub.add_parser(variant, parents=[common])
        _add_channel_flags(p, variant)
        p.add_argument("--gamma", type=float, default=None)
        if variant == "mac":
            p.add_argument("--beta", type=float, default=None)
            p.add_argument("--paper-sgn", action="store_true", dest="paper_sgn",
                           help="sign convention that silences encoder 2 whenever the "
                                "error correlation goes negative")
        _add_block_flags(p)
        _add_trial_flags(p)
        p.add_argument("--dump-traces", metavar="DIR", dest="dump_traces",
                       help="write one per-symbol trace CSV per trial into DIR")
        p.set_defaults(func=_cmd_simulate)

    sweep = sub.add_parser("sweep", help="simulate across a power-split grid")
    sweep_sub = sweep.add_subparsers(dest="variant", required=True)
    for variant in ("dpc", "mac", "noisy"):
        p = sweep_sub.add_parser(variant, parents=[common])
        _add_channel_flags(p, variant)
        p.add_argument("--grid", type=int, default=11, help="points on the gamma grid")
        if variant == "mac":
            p.add_argument("--beta-grid", type=int, default=None, dest="beta_grid")
            p.add_argument("--paper-sgn", action="store_true", dest="paper_sgn")
        _add_block_flags(p)
        _add_trial_flags(p)
        p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = args.func(args)
        output.write_text(text, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DpskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
