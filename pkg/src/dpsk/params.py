"""Validated parameter containers and configuration handling.

Every container here is frozen and validates eagerly in ``__post_init__``,
so a value that made it into one of these types can be handed to any other
module without re-checking. Construction failures raise the structured
errors from :mod:`dpsk.errors` with the offending field named.

Configuration files are flat JSON objects whose keys are exactly the ones
in :data:`CONFIG_KEYS`. :func:`validate` turns such a mapping into typed
containers, inferring the scheme from the keys present unless told
otherwise. Serializing a validated configuration and re-parsing it yields
identical values bit for bit (floats survive the JSON round trip via repr).
"""

import dataclasses
import json
import math

from .errors import (
    BlocklengthTooSmall,
    ConfigError,
    NegativeVariance,
    PowerOutOfRange,
    SplitOutOfRange,
)

#: Allowed configuration keys, in canonical serialization order.
CONFIG_KEYS = (
    "P",
    "P1",
    "P2",
    "Q",
    "sigma2",
    "sigma_z2",
    "gamma",
    "beta",
    "n",
    "rate",
    "rate_fraction",
    "trials",
    "seed",
)

DEFAULT_TRIALS = 10_000
DEFAULT_SEED = 0

# Message-set sizes must stay drawable as int64 uniforms.
_MAX_RATE_EXPONENT = 62.0


def _require_number(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}", field=name)
    value = float(value)
    if math.isnan(value) or math.isinf(value):
        raise ConfigError(f"{name} must be finite, got {value!r}", field=name)
    return value


def _check_power(name, value):
    value = _require_number(name, value)
    if value < 0.0:
        raise PowerOutOfRange(f"{name} must be >= 0, got {value}", field=name)
    return value


def _check_variance(name, value, strictly_positive=False):
    value = _require_number(name, value)
    if strictly_positive and value <= 0.0:
        raise NegativeVariance(f"{name} must be > 0, got {value}", field=name)
    if value < 0.0:
        raise NegativeVariance(f"{name} must be >= 0, got {value}", field=name)
    return value


def _check_fraction(name, value):
    value = _require_number(name, value)
    if not 0.0 <= value <= 1.0:
        raise SplitOutOfRange(f"{name} must lie in [0, 1], got {value}", field=name)
    return value


@dataclasses.dataclass(frozen=True)
class DpcParams:
    """Single-user channel: power budget ``P``, state variance ``Q``,
    channel-noise variance ``sigma2``.

    ``P`` and ``Q`` may be zero (degenerate but well defined); ``sigma2``
    must be strictly positive.
    """

    P: float
    Q: float
    sigma2: float

    def __post_init__(self):
        object.__setattr__(self, "P", _check_power("P", self.P))
        object.__setattr__(self, "Q", _check_variance("Q", self.Q))
        object.__setattr__(
            self, "sigma2", _check_variance("sigma2", self.sigma2, strictly_positive=True)
        )


@dataclasses.dataclass(frozen=True)
class MacParams:
    """Two-encoder channel: per-encoder budgets ``P1``, ``P2``, shared state
    variance ``Q``, channel-noise variance ``sigma2``."""

    P1: float
    P2: float
    Q: float
    sigma2: float

    def __post_init__(self):
        object.__setattr__(self, "P1", _check_power("P1", self.P1))
        object.__setattr__(self, "P2", _check_power("P2", self.P2))
        object.__setattr__(self, "Q", _check_variance("Q", self.Q))
        object.__setattr__(
            self, "sigma2", _check_variance("sigma2", self.sigma2, strictly_positive=True)
        )


@dataclasses.dataclass(frozen=True)
class NoisyObsParams:
    """Single-user channel whose transmitter sees the state through
    additive noise of variance ``sigma_z2``."""

    P: float
    Q: float
    sigma2: float
    sigma_z2: float

    def __post_init__(self):
        object.__setattr__(self, "P", _check_power("P", self.P))
        object.__setattr__(self, "Q", _check_variance("Q", self.Q))
        object.__setattr__(
            self, "sigma2", _check_variance("sigma2", self.sigma2, strictly_positive=True)
        )
        object.__setattr__(self, "sigma_z2", _check_variance("sigma_z2", self.sigma_z2))

    def base(self):
        """The same channel with a perfectly observed state."""
        return DpcParams(self.P, self.Q, self.sigma2)


@dataclasses.dataclass(frozen=True)
class PowerSplit:
    """Fraction of each transmitter's power spent on the message.

    ``gamma`` applies to the (first) encoder, ``beta`` to the second one in
    the two-encoder scheme; both live in [0, 1]. The remainder of each
    budget re-transmits a scaled copy of the channel state.
    """

    gamma: float
    beta: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "gamma", _check_fraction("gamma", self.gamma))
        if self.beta is not None:
            object.__setattr__(self, "beta", _check_fraction("beta", self.beta))


@dataclasses.dataclass(frozen=True)
class BlockConfig:
    """Block length and target rate.

    Exactly one of ``rate`` (bits per channel use) or ``rate_fraction``
    (multiple of the scheme's theoretical cap for the given parameters) may
    be set; with neither, the block carries no message (rate 0, M = 1).
    """

    n: int
    rate: float | None = None
    rate_fraction: float | None = None

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, int):
            raise ConfigError(f"n must be an integer, got {self.n!r}", field="n")
        if self.n < 2:
            raise BlocklengthTooSmall(f"n must be >= 2, got {self.n}", field="n")
        if self.rate is not None and self.rate_fraction is not None:
            raise ConfigError("rate and rate_fraction are mutually exclusive", field="rate")
        if self.rate is not None:
            rate = _require_number("rate", self.rate)
            if rate < 0.0:
                raise ConfigError(f"rate must be >= 0, got {rate}", field="rate")
            object.__setattr__(self, "rate", rate)
        if self.rate_fraction is not None:
            frac = _require_number("rate_fraction", self.rate_fraction)
            if frac < 0.0:
                raise ConfigError(
                    f"rate_fraction must be >= 0, got {frac}", field="rate_fraction"
                )
            object.__setattr__(self, "rate_fraction", frac)


def resolve_block(block, cap_bits):
    """Resolve a :class:`BlockConfig` against a capacity reference.

    Returns ``(rate, M)`` where ``M = round(2**(n*rate)) >= 1`` is the
    message-set size actually simulated.
    """
    if block.rate is not None:
        rate = block.rate
    elif block.rate_fraction is not None:
        rate = block.rate_fraction * cap_bits
    else:
        rate = 0.0
    exponent = block.n * rate
    if exponent > _MAX_RATE_EXPONENT:
        raise ConfigError(
            f"n*rate = {exponent:.3f} exceeds {_MAX_RATE_EXPONENT:.0f} bits; "
            "message set would not fit in int64",
            field="rate",
        )
    M = int(round(2.0**exponent))
    return rate, max(M, 1)


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """A fully validated simulation configuration."""

    scheme: str
    channel: DpcParams | MacParams | NoisyObsParams
    split: PowerSplit
    block: BlockConfig | None
    trials: int
    seed: int


def _infer_scheme(raw):
    if "P1" in raw or "P2" in raw or "beta" in raw:
        return "mac"
    if "sigma_z2" in raw:
        return "noisy"
    return "dpc"


def _pop_required(raw, key, scheme):
    if key not in raw:
        raise ConfigError(f"{key} is required for the {scheme} scheme", field=key)
    return raw.pop(key)


def validate(raw, scheme=None):
    """Validate a flat parameter mapping into a :class:`RunConfig`.

    ``raw`` uses the :data:`CONFIG_KEYS` vocabulary. When ``scheme`` is
    None it is inferred: P1/P2/beta select the two-encoder scheme,
    sigma_z2 the noisy-observation one, otherwise single-user. Keys that
    belong to a different scheme are rejected rather than ignored.
    """
    if not isinstance(raw, dict):
        raise ConfigError(f"configuration must be a mapping, got {type(raw).__name__}")
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}", field=unknown[0])
    raw = dict(raw)
    if scheme is None:
        scheme = _infer_scheme(raw)
    if scheme not in ("dpc", "mac", "noisy"):
        raise ConfigError(f"unknown scheme {scheme!r}", field="scheme")

    if scheme == "mac":
        foreign = [k for k in ("P", "sigma_z2") if k in raw]
    elif scheme == "noisy":
        foreign = [k for k in ("P1", "P2", "beta") if k in raw]
    else:
        foreign = [k for k in ("P1", "P2", "beta", "sigma_z2") if k in raw]
    if foreign:
        raise ConfigError(
            f"key {foreign[0]!r} does not apply to the {scheme} scheme", field=foreign[0]
        )

    if scheme == "mac":
        channel = MacParams(
            P1=_pop_required(raw, "P1", scheme),
            P2=_pop_required(raw, "P2", scheme),
            Q=_pop_required(raw, "Q", scheme),
            sigma2=_pop_required(raw, "sigma2", scheme),
        )
        split = PowerSplit(
            gamma=_pop_required(raw, "gamma", scheme),
            beta=_pop_required(raw, "beta", scheme),
        )
    elif scheme == "noisy":
        channel = NoisyObsParams(
            P=_pop_required(raw, "P", scheme),
            Q=_pop_required(raw, "Q", scheme),
            sigma2=_pop_required(raw, "sigma2", scheme),
            sigma_z2=_pop_required(raw, "sigma_z2", scheme),
        )
        split = PowerSplit(gamma=_pop_required(raw, "gamma", scheme))
    else:
        channel = DpcParams(
            P=_pop_required(raw, "P", scheme),
            Q=_pop_required(raw, "Q", scheme),
            sigma2=_pop_required(raw, "sigma2", scheme),
        )
        split = PowerSplit(gamma=_pop_required(raw, "gamma", scheme))

    block = None
    if "n" in raw or "rate" in raw or "rate_fraction" in raw:
        if "n" not in raw:
            raise ConfigError("rate given without a block length n", field="n")
        block = BlockConfig(
            n=raw.pop("n"),
            rate=raw.pop("rate", None),
            rate_fraction=raw.pop("rate_fraction", None),
        )
        if scheme == "mac" and block.n < 3:
            raise BlocklengthTooSmall(
                f"the two-encoder scheme needs n >= 3, got {block.n}", field="n"
            )

    trials = raw.pop("trials", DEFAULT_TRIALS)
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
        raise ConfigError(f"trials must be a positive integer, got {trials!r}", field="trials")
    seed = raw.pop("seed", DEFAULT_SEED)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed!r}", field="seed")

    return RunConfig(
        scheme=scheme, channel=channel, split=split, block=block, trials=trials, seed=seed
    )


def to_config_dict(run_config):
    """Flatten a :class:`RunConfig` back to the configuration vocabulary."""
    out = {}
    channel = run_config.channel
    for field in dataclasses.fields(channel):
        out[field.name] = getattr(channel, field.name)
    out["gamma"] = run_config.split.gamma
    if run_config.split.beta is not None:
        out["beta"] = run_config.split.beta
    if run_config.block is not None:
        out["n"] = run_config.block.n
        if run_config.block.rate is not None:
            out["rate"] = run_config.block.rate
        if run_config.block.rate_fraction is not None:
            out["rate_fraction"] = run_config.block.rate_fraction
    out["trials"] = run_config.trials
    out["seed"] = run_config.seed
    return {key: out[key] for key in CONFIG_KEYS if key in out}


def load_config(path):
    """Read a JSON configuration file into a plain mapping."""
    try:
        with open(path, "r", encoding="utf-8") as fp:
            raw = json.load(fp)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return raw


def dump_config(run_config, path):
    """Write a configuration JSON that round-trips through :func:`validate`."""
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(to_config_dict(run_config), fp, indent=2)
        fp.write("\n")
