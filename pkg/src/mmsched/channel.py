"""Synthetic channel traces and the binary/CSV trace file formats.

All generators draw from numpy's PCG64 bit generator, seeded explicitly, so
a given (arguments, seed) pair yields the same tensor on every platform.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"MMTR"
VERSION = 1
_HEADER = struct.Struct("<4sHIIIId")
_MAX_ENTRIES = 1 << 40

DEFAULT_NOISE_VAR = 0.16  # median SU SNR ~ 20 dB at M=16 with unit-power entries
RB_MODES = ("independent", "tapped-delay")
TOPOLOGIES = ("clustered", "random-static", "mobile")


class TraceFormatError(ValueError):
    """Malformed trace file. ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class ChannelTrace:
    """Complex channel gains ``h[t, b, m, l]`` plus the receiver noise variance."""

    h: np.ndarray
    noise_var: float = DEFAULT_NOISE_VAR

    def __post_init__(self):
        h = np.array(self.h, dtype=np.complex128, copy=True)
        if h.ndim != 4 or min(h.shape) < 1:
            raise ValueError(f"channel tensor must be 4-D with all dims >= 1, got shape {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ValueError("channel tensor contains NaN or Inf")
        if not (self.noise_var > 0 and np.isfinite(self.noise_var)):
            raise ValueError(f"noise_var must be positive, got {self.noise_var}")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "noise_var", float(self.noise_var))

    @property
    def num_ttis(self) -> int:
        return self.h.shape[0]

    @property
    def num_rbs(self) -> int:
        return self.h.shape[1]

    @property
    def num_bs_antennas(self) -> int:
        return self.h.shape[2]

    @property
    def num_users(self) -> int:
        return self.h.shape[3]

    def at(self, t: int, b: int = 0) -> np.ndarray:
        """M x L channel matrix for TTI ``t`` (wrapped modulo T) and RB ``b``."""
        return self.h[t % self.num_ttis, b]

    def slice_ttis(self, start: int, stop: int) -> "ChannelTrace":
        return ChannelTrace(self.h[start:stop], self.noise_var)

    def __eq__(self, other):
        if not isinstance(other, ChannelTrace):
            return NotImplemented
        return self.noise_var == other.noise_var and np.array_equal(self.h, other.h)

    __hash__ = None


@dataclass
class ScenarioConfig:
    topology: str = "random-static"
    num_clusters: int = 4
    intra_cluster_corr: float = 0.9
    temporal_corr: float = 0.9
    rb_mode: str = "independent"
    num_taps: int = 4
    rng_seed: int = 0
    noise_var: float = DEFAULT_NOISE_VAR
    extra: dict = field(default_factory=dict)

    def validate(self, num_users: int | None = None):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}; expected one of {TOPOLOGIES}")
        if self.rb_mode not in RB_MODES:
            raise ValueError(f"unknown rb_mode {self.rb_mode!r}; expected one of {RB_MODES}")
        if not 0.0 <= self.temporal_corr <= 1.0:
            raise ValueError(f"temporal_corr must lie in [0, 1], got {self.temporal_corr}")
        if not 0.0 <= self.intra_cluster_corr < 1.0:
            raise ValueError(f"intra_cluster_corr must lie in [0, 1), got {self.intra_cluster_corr}")
        if num_users is not None and not 1 <= self.num_clusters <= num_users:
            raise ValueError(f"num_clusters must lie in [1, {num_users}], got {self.num_clusters}")


def make_rng(seed) -> np.random.Generator:
    """Seeded PCG64 generator, the only PRNG used by the simulator."""
    return np.random.Generator(np.random.PCG64(seed))


def _check_dims(**dims):
    for name, value in dims.items():
        if int(value) != value or value < 1:
            raise ValueError(f"{name} must be a positive integer, got {value}")


def _cn(rng, shape) -> np.ndarray:
    """Circularly symmetric CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _frequency_field(rng, lead_shape, num_rbs, rb_mode, num_taps) -> np.ndarray:
    """Unit-variance gains of shape ``lead_shape[:1] + (B,) + lead_shape[1:]``.

    ``lead_shape`` is (T, M, L) or any (T, ...); the RB axis is inserted at 1.
    """
    t, rest = lead_shape[0], tuple(lead_shape[1:])
    if rb_mode == "independent":
        return _cn(rng, (t, num_rbs) + rest)
    if rb_mode != "tapped-delay":
        raise ValueError(f"unknown rb_mode {rb_mode!r}")
    _check_dims(num_taps=num_taps)
    taps = _cn(rng, (t, num_taps) + rest) / np.sqrt(num_taps)
    # F-point frequency response, one point per RB
    phase = np.exp(-2j * np.pi * np.outer(np.arange(num_rbs), np.arange(num_taps)) / num_rbs)
    return np.einsum("bp,tp...->tb...", phase, taps)


def gen_random_static(num_bs_antennas, num_users, num_rbs=1, num_ttis=1, seed=0, *,
                      noise_var=DEFAULT_NOISE_VAR, rb_mode="independent", num_taps=4) -> ChannelTrace:
    """I.i.d. CN(0, 1) channels, constant over time."""
    _check_dims(num_bs_antennas=num_bs_antennas, num_users=num_users, num_rbs=num_rbs, num_ttis=num_ttis)
    rng = make_rng(seed)
    snap = _frequency_field(rng, (1, num_bs_antennas, num_users), num_rbs, rb_mode, num_taps)
    h = np.broadcast_to(snap, (num_ttis,) + snap.shape[1:])
    return ChannelTrace(h, noise_var)


def cluster_assignment(num_users: int, num_clusters: int) -> np.ndarray:
    """Round-robin cluster id per user."""
    return np.arange(num_users) % num_clusters


def gen_clustered(num_bs_antennas, num_users, num_rbs=1, num_ttis=1, num_clusters=4,
                  intra_cluster_corr=0.9, seed=0, *, noise_var=DEFAULT_NOISE_VAR,
                  rb_mode="independent", num_taps=4) -> ChannelTrace:
    """Static clustered channels.

    Each user mixes its cluster's direction with a private component,
    ``sqrt(k) * h_cluster + sqrt(1 - k) * h_private`` with ``k = intra_cluster_corr``.
    Users are assigned to clusters round-robin.
    """
    _check_dims(num_bs_antennas=num_bs_antennas, num_users=num_users, num_rbs=num_rbs,
                num_ttis=num_ttis, num_clusters=num_clusters)
    if num_clusters > num_users:
        raise ValueError(f"num_clusters ({num_clusters}) exceeds num_users ({num_users})")
    if not 0.0 <= intra_cluster_corr < 1.0:
        raise ValueError(f"intra_cluster_corr must lie in [0, 1), got {intra_cluster_corr}")
    rng = make_rng(seed)
    private = _frequency_field(rng, (1, num_bs_antennas, num_users), num_rbs, rb_mode, num_taps)
    if intra_cluster_corr > 0:
        common = _frequency_field(rng, (1, num_bs_antennas, num_clusters), num_rbs, rb_mode, num_taps)
        shared = common[..., cluster_assignment(num_users, num_clusters)]
        snap = np.sqrt(intra_cluster_corr) * shared + np.sqrt(1.0 - intra_cluster_corr) * private
    else:
        snap = private
    h = np.broadcast_to(snap, (num_ttis,) + snap.shape[1:])
    return ChannelTrace(h, noise_var)


def evolve_gauss_markov(trace: ChannelTrace, rho: float, seed=0, num_ttis: int | None = None, *,
                        rb_mode="independent", num_taps=4) -> ChannelTrace:
    """First-order Gauss-Markov time evolution starting from ``trace.h[0]``.

    ``h[t+1] = rho * h[t] + sqrt(1 - rho**2) * w[t]`` with CN(0, 1) innovations,
    which keeps the per-entry marginal variance of a unit-variance start.
    ``num_ttis`` defaults to the input's T.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    h0 = trace.h[0]
    if trace.num_ttis > 1 and not np.array_equal(trace.h, np.broadcast_to(h0, trace.h.shape)):
        raise ValueError("evolve_gauss_markov expects a trace that is static in time")
    num_ttis = trace.num_ttis if num_ttis is None else num_ttis
    _check_dims(num_ttis=num_ttis)
    rng = make_rng(seed)
    out = np.empty((num_ttis,) + h0.shape, dtype=np.complex128)
    out[0] = h0
    if num_ttis > 1:
        _, num_rbs, num_ant, num_users = (1,) + h0.shape
        innov = _frequency_field(rng, (num_ttis - 1, num_ant, num_users), num_rbs, rb_mode, num_taps)
        scale = np.sqrt(1.0 - rho * rho)
        for t in range(1, num_ttis):
            out[t] = rho * out[t - 1] + scale * innov[t - 1]
    return ChannelTrace(out, trace.noise_var)


def generate(scenario: ScenarioConfig, num_bs_antennas, num_users, num_rbs=1, num_ttis=1) -> ChannelTrace:
    """Build a trace from a :class:`ScenarioConfig`."""
    scenario.validate(num_users)
    common = dict(noise_var=scenario.noise_var, rb_mode=scenario.rb_mode, num_taps=scenario.num_taps)
    if scenario.topology == "clustered":
        return gen_clustered(num_bs_antennas, num_users, num_rbs, num_ttis, scenario.num_clusters,
                             scenario.intra_cluster_corr, scenario.rng_seed, **common)
    if scenario.topology == "random-static":
        return gen_random_static(num_bs_antennas, num_users, num_rbs, num_ttis, scenario.rng_seed, **common)
    start = gen_random_static(num_bs_antennas, num_users, num_rbs, 1, scenario.rng_seed, **common)
    return evolve_gauss_markov(start, scenario.temporal_corr, scenario.rng_seed + 1, num_ttis,
                               rb_mode=scenario.rb_mode, num_taps=scenario.num_taps)


# --- file formats -----------------------------------------------------------

def save_trace(trace: ChannelTrace, path) -> None:
    """Write the little-endian ``MMTR`` v1 binary format."""
    t, b, m, l = trace.h.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, t, b, m, l, trace.noise_var))
        fh.write(np.ascontiguousarray(trace.h, dtype="<c16").tobytes())


def load_trace(path) -> ChannelTrace:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise TraceFormatError(f"truncated header: need {_HEADER.size} bytes, file has {len(data)}", len(data))
    magic, version, t, b, m, l, noise_var = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise TraceFormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    if version != VERSION:
        raise TraceFormatError(f"unsupported version {version}", 4)
    if min(t, b, m, l) < 1:
        raise TraceFormatError(f"zero dimension in header (T={t}, B={b}, M={m}, L={l})", 6)
    count = t * b * m * l
    if count > _MAX_ENTRIES:
        raise TraceFormatError(f"dimension overflow: T*B*M*L = {count} exceeds {_MAX_ENTRIES}", 6)
    if not (noise_var > 0 and np.isfinite(noise_var)):
        raise TraceFormatError(f"noise variance must be positive, got {noise_var}", 22)
    expected = count * 16
    actual = len(data) - _HEADER.size
    if actual != expected:
        raise TraceFormatError(
            f"payload length mismatch: header declares {count} entries ({expected} bytes), "
            f"found {actual} bytes", _HEADER.size + min(actual, expected))
    h = np.frombuffer(data, dtype="<c16", count=count, offset=_HEADER.size).reshape(t, b, m, l)
    try:
        return ChannelTrace(h, noise_var)
    except ValueError as exc:
        raise TraceFormatError(str(exc), _HEADER.size) from exc


def save_trace_csv(trace: ChannelTrace, path) -> None:
    """One row per (t, b); columns ``re_m_l``/``im_m_l`` for every (m, l)."""
    t_, b_, m_, l_ = trace.h.shape
    cols = [f"{part}_{m}_{l}" for m in range(m_) for l in range(l_) for part in ("re", "im")]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "b"] + cols)
        for t in range(t_):
            for b in range(b_):
                flat = trace.h[t, b].ravel()
                row = np.empty(2 * flat.size)
                row[0::2], row[1::2] = flat.real, flat.imag
                w.writerow([t, b] + [repr(float(v)) for v in row])


def load_trace_csv(path, noise_var=DEFAULT_NOISE_VAR) -> ChannelTrace:
    """Import a testbed-style CSV (see :func:`save_trace_csv`)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["t", "b"]:
            raise ValueError("CSV must start with columns t,b")
        pairs = [c.split("_") for c in header[2:]]
        if any(len(p) != 3 or p[0] not in ("re", "im") for p in pairs):
            raise ValueError("data columns must be named re_<m>_<l> / im_<m>_<l>")
        m_ = 1 + max(int(p[1]) for p in pairs)
        l_ = 1 + max(int(p[2]) for p in pairs)
        if len(pairs) != 2 * m_ * l_:
            raise ValueError(f"expected {2 * m_ * l_} re/im columns, found {len(pairs)}")
        flat_pos = np.array([int(p[1]) * l_ + int(p[2]) for p in pairs])
        is_im = np.array([p[0] == "im" for p in pairs])
        rows = {}
        for row in reader:
            vals = np.asarray(row[2:], dtype=float)
            mat = np.zeros(m_ * l_, dtype=np.complex128)
            np.add.at(mat, flat_pos[~is_im], vals[~is_im])
            np.add.at(mat, flat_pos[is_im], 1j * vals[is_im])
            rows[int(row[0]), int(row[1])] = mat.reshape(m_, l_)
    t_ = 1 + max(k[0] for k in rows)
    b_ = 1 + max(k[1] for k in rows)
    if len(rows) != t_ * b_:
        raise ValueError(f"CSV is missing rows: have {len(rows)}, need {t_ * b_}")
    h = np.empty((t_, b_, m_, l_), dtype=np.complex128)
    for (t, b), mat in rows.items():
        h[t, b] = mat
    return ChannelTrace(h, noise_var)
