"""Closed-form SPS collision model, packet-reception ratio and fairness indices.

The pairwise collision probability is the product of three factors:

    delta_col = P_O * P_SH|O * C_Ca / N_Ca^2

where P_O is the probability the two selection windows overlap within one
reservation period, P_SH|O = (N_Sc * N_Sh / N_r)^2 is the probability both
vehicles select from the shared portion of the overlap, and C_Ca / N_Ca^2
rescales to the candidate-PRB pool.  The pool constants C_Ca, N_r, N_Ca are
not pinned down by the factorisation itself, so two calibrations are provided
(see `collision_factors`):

``bounded-pool``
    The candidate pool is the full bounded selection range (w_UB + 1 slots,
    all subchannels) and the sensing filter admits a fraction gamma of it.
    delta_col is strictly increasing in both windows — larger windows share
    more resources — which is the behaviour the window optimiser trades off
    against residence time.

``uniform-selection``
    Constants chosen so the product collapses to 1 / (slots_per_rri * N_Sc):
    the exact collision probability of two independent uniform picks of a
    (slot offset, subchannel) reservation.  This matches the sensing-free
    Monte Carlo simulator mechanically and is the calibration the oracle
    validation runs under.

Every constant can also be overridden explicitly through SpsParams.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .channel import ChannelParams, spectral_efficiency
from .errors import ConfigError, ModelDomainError
from .scenario import distance_to_rsu, vehicle_position

COLLISION_MODELS = ("bounded-pool", "uniform-selection")

# slot bookkeeping -----------------------------------------------------------


def slots_per_rri(numerology: int, rri: float) -> int:
    """Number of slots in one reservation period: 1000 * 2^mu * rri.

    The slot duration is 2^(-mu) ms, so an RRI of `rri` seconds spans
    1000 * 2^mu * rri slots; that count must come out a positive integer.
    """
    if numerology < 0 or numerology != int(numerology):
        raise ConfigError("sps.numerology", "must be a non-negative integer")
    if rri <= 0:
        raise ConfigError("sps.rri", "must be positive")
    raw = 1000.0 * 2 ** int(numerology) * rri
    rounded = round(raw)
    if rounded < 1 or abs(raw - rounded) > 1e-6:
        raise ConfigError("sps.rri",
                          f"1000*2^mu*rri = {raw} is not a positive integer slot count")
    return int(rounded)


@dataclass(frozen=True)
class SpsParams:
    """SPS-layer parameters shared by the analytic model and the simulator."""

    rri: float = 0.05                 # s between reserved transmissions
    numerology: int = 0               # mu; slot duration 2^(-mu) ms
    num_subchannels: int = 2          # N_Sc
    selection_window: int = 15        # w, slots beyond the trigger slot
    window_bounds: tuple[int, int] = (0, 15)   # [w_LB, w_UB]
    keep_probability: float = 0.0     # P, chance to keep resources at RC=0
    candidate_fraction: float = 0.2   # gamma, minimum candidate-set fraction
    sensing_window: float = 1000.0    # ms, trailing observation span
    packet_rate: float = 20.0         # tau, packets/s
    rc_range: tuple[int, int] = (5, 15)   # reselection-counter redraw bounds
    collision_model: str = "bounded-pool"
    c_ca: float | None = None         # explicit C_Ca override
    n_r: float | None = None          # explicit N_r override
    n_ca: float | None = None         # explicit N_Ca override

    def __post_init__(self):
        slots_per_rri(self.numerology, self.rri)  # validates rri/mu jointly
        if self.num_subchannels < 1 or self.num_subchannels != int(self.num_subchannels):
            raise ConfigError("sps.num_subchannels", "must be an integer >= 1")
        w_lb, w_ub = self.window_bounds
        if not (0 <= w_lb <= w_ub):
            raise ConfigError("sps.window_bounds", "need 0 <= w_LB <= w_UB")
        if not (w_lb <= self.selection_window <= w_ub):
            raise ConfigError("sps.selection_window",
                              f"{self.selection_window} outside [{w_lb}, {w_ub}]")
        if not (0.0 <= self.keep_probability <= 0.8):
            raise ConfigError("sps.keep_probability", "must lie in [0, 0.8]")
        if not (0.0 < self.candidate_fraction <= 1.0):
            raise ConfigError("sps.candidate_fraction", "must lie in (0, 1]")
        if self.sensing_window <= 0:
            raise ConfigError("sps.sensing_window", "must be positive")
        if not (0.0 < self.packet_rate <= 1000.0):
            raise ConfigError("sps.packet_rate", "must lie in (0, 1000]")
        rc_lo, rc_hi = self.rc_range
        if not (1 <= rc_lo <= rc_hi):
            raise ConfigError("sps.rc_range", "need 1 <= rc_min <= rc_max")
        if self.collision_model not in COLLISION_MODELS:
            raise ConfigError("sps.collision_model",
                              f"unknown model {self.collision_model!r}; "
                              f"choose from {COLLISION_MODELS}")
        for key in ("c_ca", "n_r", "n_ca"):
            val = getattr(self, key)
            if val is not None and val <= 0:
                raise ConfigError(f"sps.{key}", "override must be positive")

    @property
    def slots_per_rri(self) -> int:
        return slots_per_rri(self.numerology, self.rri)

    def with_window(self, w: int) -> "SpsParams":
        return replace(self, selection_window=w)


# Eq.-level operations -------------------------------------------------------


def overlap_probability(w_i: float, w_j: float, numerology: int, rri: float) -> float:
    """P_O = (w_i + w_j + 1) / slots_per_rri: chance the windows overlap."""
    if w_i < 0 or w_j < 0:
        raise ValueError(f"windows must be >= 0, got ({w_i}, {w_j})")
    slots = slots_per_rri(numerology, rri)
    span = w_i + w_j + 1
    if span > slots:
        raise ModelDomainError(
            f"combined window span {span} exceeds the {slots}-slot reservation period")
    return span / slots


def shared_resources(w_i: float, w_j: float) -> float:
    """N_Sh = (w_i+1)(w_j+1)/(w_i+w_j+1): expected shared slots in the overlap."""
    if w_i < 0 or w_j < 0:
        raise ValueError(f"windows must be >= 0, got ({w_i}, {w_j})")
    return (w_i + 1.0) * (w_j + 1.0) / (w_i + w_j + 1.0)


def shared_selection_probability(n_sc: float, n_sh: float, n_r: float) -> float:
    """P_SH|O = (N_Sc * N_Sh / N_r)^2: both pick from the shared resources."""
    if n_sc <= 0 or n_sh <= 0 or n_r <= 0:
        raise ValueError("N_Sc, N_Sh, N_r must all be positive")
    ratio = n_sc * n_sh / n_r
    if ratio > 1.0 + 1e-12:
        raise ModelDomainError(
            f"shared resources N_Sc*N_Sh = {n_sc * n_sh} exceed the pool N_r = {n_r}")
    return min(ratio, 1.0) ** 2


def collision_factors(params: SpsParams, w_i, w_j):
    """(C_Ca, N_r, N_Ca) under the configured calibration, with overrides applied.

    Windows may be scalars or broadcastable arrays; outputs broadcast along.
    """
    n_sc = params.num_subchannels
    wi = np.asarray(w_i, dtype=float)
    wj = np.asarray(w_j, dtype=float)
    n_sh = (wi + 1.0) * (wj + 1.0) / (wi + wj + 1.0)
    if params.collision_model == "bounded-pool":
        pool = n_sc * (params.window_bounds[1] + 1.0)
        c_ca, n_r, n_ca = n_sc * n_sh, pool, params.candidate_fraction * pool
    else:  # uniform-selection
        c_ca = n_ca = n_sc * n_sh
        n_r = n_sc * np.sqrt((wi + 1.0) * (wj + 1.0))
    if params.c_ca is not None:
        c_ca = params.c_ca
    if params.n_r is not None:
        n_r = params.n_r
    if params.n_ca is not None:
        n_ca = params.n_ca
    return c_ca, n_r, n_ca


def collision_from_factors(p_overlap: float, p_shared: float,
                           c_ca: float, n_ca: float) -> float:
    """delta_col = P_O * P_SH|O * C_Ca / N_Ca^2, checked to land in [0, 1]."""
    if n_ca <= 0 or c_ca < 0:
        raise ValueError("need C_Ca >= 0 and N_Ca > 0")
    delta = float(p_overlap * p_shared * c_ca / n_ca ** 2)
    if not (0.0 <= delta <= 1.0):
        raise ModelDomainError(
            f"delta_col = {delta} outside [0, 1]; C_Ca/N_Ca configuration inconsistent")
    return delta


def collision_probability(params: SpsParams, w_i: float, w_j: float) -> float:
    """Pairwise collision probability for windows (w_i, w_j) under `params`."""
    p_o = overlap_probability(w_i, w_j, params.numerology, params.rri)
    n_sh = shared_resources(w_i, w_j)
    c_ca, n_r, n_ca = collision_factors(params, w_i, w_j)
    p_sh = shared_selection_probability(params.num_subchannels, n_sh, n_r)
    return collision_from_factors(p_o, p_sh, c_ca, n_ca)


def half_duplex_probability(packet_rate: float) -> float:
    """delta_hd = tau / 1000: chance the receiver is itself transmitting."""
    if not (0.0 <= packet_rate <= 1000.0):
        raise ValueError(f"packet_rate must lie in [0, 1000], got {packet_rate}")
    return packet_rate / 1000.0


def packet_reception_ratio(i: int, params: SpsParams,
                           windows: Sequence[float],
                           packet_rates: Sequence[float] | None = None) -> float:
    """PRR for vehicle i: prod_{j!=i} (1 - delta_col^j) * (1 - delta_hd^j)."""
    n = len(windows)
    if not 0 <= i < n:
        raise ValueError(f"vehicle index {i} outside 0..{n - 1}")
    if packet_rates is None:
        packet_rates = [params.packet_rate] * n
    prr = 1.0
    for j in range(n):
        if j == i:
            continue
        prr *= 1.0 - collision_probability(params, windows[i], windows[j])
        prr *= 1.0 - half_duplex_probability(packet_rates[j])
    return prr


# fairness indices -----------------------------------------------------------


@dataclass(frozen=True)
class FairnessInputs:
    """Everything Eq.-17/18-style fairness evaluation needs for one network.

    `windows` holds the current per-vehicle selection windows; the optimiser
    evaluates trial windows through `objective_vector` without touching them.
    Distances default to the mid-pass epoch: a vehicle at speed v sits at
    x = R/2 halfway through its residence time, so with the RSU at
    (R/2, y, z) every lane sees the same link distance.
    """

    channel: ChannelParams
    sps: SpsParams
    speeds: tuple[float, ...]                 # m/s, magnitudes
    windows: tuple[int, ...]                  # slots, one per vehicle
    rsu_position: tuple[float, float, float] = (250.0, 10.0, 5.0)
    coverage_range: float = 500.0             # m
    gains: tuple[float, ...] | None = None    # |h| per vehicle; None -> 1
    distances: tuple[float, ...] | None = None  # m; None -> epoch geometry
    packet_rates: tuple[float, ...] | None = None  # packets/s; None -> sps value

    def __post_init__(self):
        n = len(self.speeds)
        if n < 1:
            raise ConfigError("fairness.speeds", "need at least one vehicle")
        if any(v <= 0 for v in self.speeds):
            raise ConfigError("fairness.speeds", "all speeds must be positive")
        if len(self.windows) != n:
            raise ConfigError("fairness.windows", "length must match speeds")
        w_lb, w_ub = self.sps.window_bounds
        for w in self.windows:
            if not (w_lb <= w <= w_ub):
                raise ConfigError("fairness.windows",
                                  f"window {w} outside [{w_lb}, {w_ub}]")
        if self.coverage_range <= 0:
            raise ConfigError("fairness.coverage_range", "must be positive")
        for key in ("gains", "distances", "packet_rates"):
            val = getattr(self, key)
            if val is not None and len(val) != n:
                raise ConfigError(f"fairness.{key}", "length must match speeds")
        if self.distances is not None and any(d <= 0 for d in self.distances):
            raise ConfigError("fairness.distances", "all distances must be positive")

    @property
    def num_vehicles(self) -> int:
        return len(self.speeds)

    @property
    def mean_speed(self) -> float:
        return float(np.mean(self.speeds))

    @property
    def mean_window(self) -> float:
        return float(np.mean(self.windows))

    def gain(self, i: int) -> float:
        return 1.0 if self.gains is None else self.gains[i]

    def distance(self, i: int, eval_time: float | None = None) -> float:
        if eval_time is None and self.distances is not None:
            return self.distances[i]
        return self.epoch_distance(self.speeds[i], eval_time)

    def epoch_distance(self, speed: float, eval_time: float | None = None) -> float:
        """Link distance for a vehicle of `speed` at eval_time (default mid-pass)."""
        if eval_time is None:
            eval_time = 0.5 * self.coverage_range / speed
        return distance_to_rsu(vehicle_position(speed, eval_time), self.rsu_position)


def fairness_index_vehicle(i: int, inputs: FairnessInputs,
                           eval_time: float | None = None) -> float:
    """K_index^i: spectral efficiency times survival product, per unit speed."""
    v = inputs.speeds[i]
    if v <= 0:
        raise ValueError(f"speed must be positive, got {v}")
    kappa = spectral_efficiency(inputs.channel, inputs.gain(i),
                                inputs.distance(i, eval_time))
    survive = 1.0
    for j in range(inputs.num_vehicles):
        if j != i:
            survive *= 1.0 - collision_probability(
                inputs.sps, inputs.windows[i], inputs.windows[j])
    return kappa * survive / v


def fairness_index_network(inputs: FairnessInputs,
                           eval_time: float | None = None) -> float:
    """K_index: the per-vehicle index evaluated at the network averages."""
    v_bar = inputs.mean_speed
    w_bar = inputs.mean_window
    gain = 1.0 if inputs.gains is None else float(np.mean(inputs.gains))
    kappa = spectral_efficiency(inputs.channel, gain,
                                inputs.epoch_distance(v_bar, eval_time))
    delta = collision_probability(inputs.sps, w_bar, w_bar)
    survive = (1.0 - delta) ** (inputs.num_vehicles - 1)
    return kappa * survive / v_bar


def objective_vector(w: Sequence[int], inputs: FairnessInputs,
                     eval_time: float | None = None) -> np.ndarray:
    """F_i = |K_index - K_index^i| per vehicle, with trial windows `w`."""
    w = tuple(int(x) for x in w)
    w_lb, w_ub = inputs.sps.window_bounds
    if len(w) != inputs.num_vehicles:
        raise ValueError(f"need {inputs.num_vehicles} windows, got {len(w)}")
    for x in w:
        if not (w_lb <= x <= w_ub):
            raise ValueError(f"window {x} outside [{w_lb}, {w_ub}]")
    trial = replace(inputs, windows=w)
    k_net = fairness_index_network(trial, eval_time)
    return np.array([abs(k_net - fairness_index_vehicle(i, trial, eval_time))
                     for i in range(trial.num_vehicles)])


# vectorised evaluation for the optimiser ------------------------------------


def _collision_matrix(params: SpsParams, w: np.ndarray) -> np.ndarray:
    """delta_col for every window pair; `w` has shape (..., N), output (..., N, N)."""
    w = np.asarray(w, dtype=float)
    slots = params.slots_per_rri
    wi = w[..., :, None]
    wj = w[..., None, :]
    span = wi + wj + 1.0
    if np.any(span > slots):
        raise ModelDomainError(
            f"combined window span exceeds the {slots}-slot reservation period")
    p_o = span / slots
    n_sh = (wi + 1.0) * (wj + 1.0) / span
    n_sc = params.num_subchannels
    c_ca, n_r, n_ca = collision_factors(params, wi, wj)
    p_sh = (n_sc * n_sh / n_r) ** 2
    if np.any(n_sc * n_sh > n_r * (1 + 1e-12)):
        raise ModelDomainError("shared resources exceed the pool N_r")
    delta = p_o * p_sh * c_ca / n_ca ** 2
    if np.any(delta < 0) or np.any(delta > 1):
        raise ModelDomainError("delta_col outside [0, 1] for some pair")
    return delta


def objective_batch(windows: np.ndarray, inputs: FairnessInputs,
                    eval_time: float | None = None) -> np.ndarray:
    """objective_vector for M window vectors at once; (M, N) -> (M, N).

    Matches the scalar path exactly (same formulas, numpy-broadcast); the
    optimiser calls this once per generation.
    """
    windows = np.asarray(windows)
    if windows.ndim != 2 or windows.shape[1] != inputs.num_vehicles:
        raise ValueError(f"expected (M, {inputs.num_vehicles}) windows, "
                         f"got {windows.shape}")
    w_lb, w_ub = inputs.sps.window_bounds
    if np.any(windows < w_lb) or np.any(windows > w_ub):
        raise ValueError(f"some window outside [{w_lb}, {w_ub}]")

    speeds = np.asarray(inputs.speeds, dtype=float)
    n = inputs.num_vehicles
    gains = np.ones(n) if inputs.gains is None else np.asarray(inputs.gains, dtype=float)
    dists = np.array([inputs.distance(i, eval_time) for i in range(n)])
    kappa = np.array([spectral_efficiency(inputs.channel, g, d)
                      for g, d in zip(gains, dists)])

    delta = _collision_matrix(inputs.sps, windows)          # (M, N, N)
    off_diag = 1.0 - delta
    idx = np.arange(n)
    off_diag[..., idx, idx] = 1.0
    survive = off_diag.prod(axis=-1)                        # (M, N)
    k_i = kappa[None, :] * survive / speeds[None, :]

    v_bar = inputs.mean_speed
    w_bar = windows.mean(axis=1)                            # (M,)
    kappa_net = spectral_efficiency(inputs.channel, float(gains.mean()),
                                    inputs.epoch_distance(v_bar, eval_time))
    delta_net = _collision_matrix(inputs.sps, w_bar[:, None])[:, 0, 0]
    k_net = kappa_net * (1.0 - delta_net) ** (n - 1) / v_bar

    return np.abs(k_net[:, None] - k_i)
