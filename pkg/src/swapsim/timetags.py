"""Detector time-tag synthesis and correlation analysis.

The synthesizer walks the effective pulse-pair frames of the setup: each
frame holds an early (E) excitation at its origin and a late (L) one at
+1.8 ns. Every excitation produces a photon pair with some probability;
the XX photon goes to the tomography analyzers, the X photon enters a
delay interferometer whose long arm shifts it by the same 1.8 ns. When
the early photon takes the long arm and the late one the short arm they
overlap at the final splitter and their joint detection follows the
coincidence operator of :mod:`swapsim.swap` (outcome-level sampling; no
amplitude-level temporal modes). All other photons are routed with fair
coin flips, which is exact because the BSM detectors are polarization
blind and the single-photon polarization marginals are maximally mixed.

The analysis side reduces a stream to the triggered third-order
histogram, its windowed second-order reduction, the side-peak
normalized correlation visibility, and the four-fold rate budget.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .quadrature import DEFAULT_QUADRATURE, QuadratureSpec
from .source import SourceParams
from .swap import BsmModel, _phase_average_weight, bsm_operator
from .tomography import BASIS_KETS, _check_label

CHANNELS = {"BSM1": 0, "BSM2": 1, "XXA": 2, "XXB": 3}
CHANNEL_NAMES = {v: k for k, v in CHANNELS.items()}

TIME_RESOLUTION_PS = 10
MAGIC = b"QTT1"
FORMAT_VERSION = 1

_RECORD_DTYPE = np.dtype([("channel", "u1"), ("timestamp_ps", "<u8")])


class StreamFormatError(ValueError):
    """Raised for malformed stream files."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Timing, efficiency and detector description of one run."""

    pair_gen_prob: float
    eta_x: float
    eta_xx: float
    rep_rate_hz: float = 160e6
    pulse_pair_delay_ns: float = 1.8
    bsm_window_ns: float = 0.6
    record_range_ns: float = 100.0
    g2_window_ns: tuple[float, float] = (-1.0, 2.8)
    detector_jitter_sigma_ns: float = 0.4
    tau_xx_ns: float = 0.12
    dark_rate_hz: float = 0.0
    bin_width_ns: float = 0.1

    def __post_init__(self) -> None:
        for name in ("pair_gen_prob", "eta_x", "eta_xx"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.rep_rate_hz <= 0.0:
            raise ValueError("rep_rate_hz must be positive")
        if self.bsm_window_ns <= 0.0 or self.record_range_ns <= 0.0:
            raise ValueError("windows must be positive")
        if self.bin_width_ns <= 0.0:
            raise ValueError("bin_width_ns must be positive")
        if not self.pulse_pair_delay_ns < self.frame_period_ns:
            raise ValueError("pulse pair delay must fit inside the frame period")
        if self.g2_window_ns[0] >= self.g2_window_ns[1]:
            raise ValueError("g2 window must be an increasing interval")
        if self.tau_xx_ns <= 0.0:
            raise ValueError("tau_xx_ns must be positive")
        if self.detector_jitter_sigma_ns < 0.0 or self.dark_rate_hz < 0.0:
            raise ValueError("jitter and dark rate must be non-negative")
        object.__setattr__(self, "g2_window_ns", tuple(self.g2_window_ns))

    @property
    def frame_period_ns(self) -> float:
        return 1e9 / self.rep_rate_hz


@dataclass(frozen=True)
class TimeTagStream:
    """Sorted detector events plus the frame metadata of the run."""

    channels: np.ndarray  # uint8
    timestamps_ps: np.ndarray  # uint64, non-decreasing, 10 ps grid
    duration_s: float
    config: ExperimentConfig
    xxa_setting: str = "H"
    xxb_setting: str = "V"

    def __post_init__(self) -> None:
        ch = np.ascontiguousarray(self.channels, dtype=np.uint8)
        ts = np.ascontiguousarray(self.timestamps_ps, dtype=np.uint64)
        if ch.shape != ts.shape:
            raise ValueError("channels and timestamps must have equal length")
        if ts.size and np.any(np.diff(ts.astype(np.int64)) < 0):
            raise ValueError("timestamps must be non-decreasing")
        if ts.size and np.any(ts % TIME_RESOLUTION_PS != 0):
            raise ValueError(f"timestamps must sit on the {TIME_RESOLUTION_PS} ps grid")
        _check_label(self.xxa_setting)
        _check_label(self.xxb_setting)
        ch.setflags(write=False)
        ts.setflags(write=False)
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "timestamps_ps", ts)

    def __len__(self) -> int:
        return int(self.channels.size)

    def channel_times_ns(self, name: str) -> np.ndarray:
        mask = self.channels == CHANNELS[name]
        return self.timestamps_ps[mask].astype(np.float64) / 1e3

    def to_bytes(self) -> bytes:
        header = MAGIC + struct.pack("<H", FORMAT_VERSION) + b"\x00" * 10
        records = np.empty(len(self), dtype=_RECORD_DTYPE)
        records["channel"] = self.channels
        records["timestamp_ps"] = self.timestamps_ps
        return header + records.tobytes()

    @classmethod
    def from_bytes(
        cls,
        data: bytes,
        config: ExperimentConfig,
        duration_s: float,
        xxa_setting: str = "H",
        xxb_setting: str = "V",
    ) -> "TimeTagStream":
        if len(data) < 16:
            raise StreamFormatError("stream shorter than the 16-byte header")
        if data[:4] != MAGIC:
            raise StreamFormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
        (version,) = struct.unpack("<H", data[4:6])
        if version != FORMAT_VERSION:
            raise StreamFormatError(f"unsupported stream version {version}")
        body = data[16:]
        if len(body) % _RECORD_DTYPE.itemsize:
            raise StreamFormatError("truncated record section")
        records = np.frombuffer(body, dtype=_RECORD_DTYPE)
        return cls(
            channels=records["channel"].copy(),
            timestamps_ps=records["timestamp_ps"].copy(),
            duration_s=duration_s,
            config=config,
            xxa_setting=xxa_setting,
            xxb_setting=xxb_setting,
        )

    def to_csv_text(self) -> str:
        lines = ["channel,timestamp_ps"]
        for ch, ts in zip(self.channels, self.timestamps_ps):
            lines.append(f"{CHANNEL_NAMES[int(ch)]},{int(ts)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv_text(
        cls,
        text: str,
        config: ExperimentConfig,
        duration_s: float,
        xxa_setting: str = "H",
        xxb_setting: str = "V",
    ) -> "TimeTagStream":
        lines = [ln for ln in text.strip().split("\n") if ln]
        if not lines or lines[0] != "channel,timestamp_ps":
            raise StreamFormatError("missing channel,timestamp_ps header")
        channels, stamps = [], []
        for ln in lines[1:]:
            name, ts = ln.split(",")
            if name not in CHANNELS:
                raise StreamFormatError(f"unknown channel {name!r}")
            channels.append(CHANNELS[name])
            stamps.append(int(ts))
        return cls(
            channels=np.array(channels, dtype=np.uint8),
            timestamps_ps=np.array(stamps, dtype=np.uint64),
            duration_s=duration_s,
            config=config,
            xxa_setting=xxa_setting,
            xxb_setting=xxb_setting,
        )


@dataclass(frozen=True)
class CorrelationHistogram:
    """1-D or 2-D delay histogram around BSM triggers."""

    edges_a_ns: np.ndarray
    counts: np.ndarray
    trigger_count: int
    edges_b_ns: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        widths = np.diff(self.edges_a_ns)
        if not np.allclose(widths, widths[0], rtol=1e-9, atol=1e-12):
            raise ValueError("bin widths must be uniform")
        if self.counts.ndim == 2:
            if self.edges_b_ns is None:
                raise ValueError("2-D histogram needs edges_b_ns")
        elif self.edges_b_ns is not None:
            raise ValueError("1-D histogram must not carry edges_b_ns")

    @property
    def centers_a_ns(self) -> np.ndarray:
        return 0.5 * (self.edges_a_ns[:-1] + self.edges_a_ns[1:])

    def window_sum(self, lo_ns: float, hi_ns: float) -> float:
        """Total counts with axis-a centers inside [lo, hi]."""
        mask = (self.centers_a_ns >= lo_ns) & (self.centers_a_ns <= hi_ns)
        return float(self.counts[mask].sum())

    def to_csv_text(self) -> str:
        if self.counts.ndim == 1:
            lines = ["bin_start_ns,bin_end_ns,counts"]
            for lo, hi, c in zip(self.edges_a_ns[:-1], self.edges_a_ns[1:], self.counts):
                lines.append(f"{lo:.6g},{hi:.6g},{int(c)}")
            return "\n".join(lines) + "\n"
        lines = ["# 2-D histogram: rows = channel A delay bins, columns = channel B delay bins"]
        lines.append("a_bin_start_ns," + ",".join(f"{lo:.6g}" for lo in self.edges_b_ns[:-1]))
        for lo, row in zip(self.edges_a_ns[:-1], self.counts):
            lines.append(f"{lo:.6g}," + ",".join(str(int(c)) for c in row))
        return "\n".join(lines) + "\n"


# --- synthesis -------------------------------------------------------------

_PASS_PROJECTORS = {label: np.outer(k, k.conj()) for label, k in BASIS_KETS.items()}


def _transfer_matrices(
    p: SourceParams, t_rec: np.ndarray, cascade: np.ndarray, op: np.ndarray
) -> np.ndarray:
    """Tr_XX[(I (x) op) rho_pair(t)] as a stack of 2x2 matrices on the X qubit.

    ``cascade`` marks which entries are true cascade pairs; the rest are
    unpolarized background with transfer Tr(op)/4 * I.
    """
    d = np.exp(-t_rec / p.tau_ss_ns)
    damp = np.exp(-t_rec * (1.0 / p.tau_ss_ns + 1.0 / p.tau_hv_ns))
    coh = 0.5 * damp * np.exp(1j * p.fss_phase_rate * t_rec)
    out = np.zeros((t_rec.size, 2, 2), dtype=complex)
    out[:, 0, 0] = 0.25 * (1.0 + d) * op[0, 0] + 0.25 * (1.0 - d) * op[1, 1]
    out[:, 1, 1] = 0.25 * (1.0 - d) * op[0, 0] + 0.25 * (1.0 + d) * op[1, 1]
    out[:, 0, 1] = coh * op[1, 0]
    out[:, 1, 0] = np.conj(coh) * op[0, 1]
    bg = 0.25 * np.trace(op) * np.eye(2)
    out[~cascade] = bg
    return out


def _coincidence_probs(
    pi_eff: np.ndarray, t_e: np.ndarray, t_l: np.ndarray
) -> np.ndarray:
    """Tr[Pi_eff (T_E (x) T_L)] for stacks of 2x2 transfer matrices."""
    kron = np.einsum("nik,njl->nijkl", t_e, t_l).reshape(-1, 4, 4)
    return np.einsum("ab,nba->n", pi_eff, kron).real


def _effective_coincidence_operator(
    pE: SourceParams, pL: SourceParams, m: BsmModel, quad: QuadratureSpec
) -> np.ndarray:
    """Coincidence POVM element with the phase-averaging weight folded in."""
    pi = bsm_operator(m).matrix
    pi_pop = np.diag(np.diag(pi))
    i3 = math.sqrt(_phase_average_weight(pE, quad) * _phase_average_weight(pL, quad))
    return pi_pop + i3 * (pi - pi_pop)


@dataclass
class _SlotDraws:
    """Per-frame random draws for one excitation slot."""

    pair: np.ndarray
    cascade: np.ndarray
    t_xx: np.ndarray
    t_rec: np.ndarray
    x_survives: np.ndarray
    xx_survives: np.ndarray
    x_long_path: np.ndarray
    xx_to_a: np.ndarray
    x_jitter: np.ndarray
    xx_jitter: np.ndarray


def _draw_slot(
    rng: np.random.Generator, n: int, p: SourceParams, cfg: ExperimentConfig
) -> _SlotDraws:
    return _SlotDraws(
        pair=rng.random(n) < cfg.pair_gen_prob,
        cascade=rng.random(n) < p.k,
        t_xx=rng.exponential(cfg.tau_xx_ns, n),
        t_rec=rng.exponential(p.tau_x_ns, n),
        x_survives=rng.random(n) < cfg.eta_x,
        xx_survives=rng.random(n) < cfg.eta_xx,
        x_long_path=rng.random(n) < 0.5,
        xx_to_a=rng.random(n) < 0.5,
        x_jitter=rng.normal(0.0, cfg.detector_jitter_sigma_ns, n),
        xx_jitter=rng.normal(0.0, cfg.detector_jitter_sigma_ns, n),
    )


def _sample_joint_outcomes(
    rng: np.random.Generator,
    pi_eff: np.ndarray,
    te_pass: np.ndarray,
    te_total: np.ndarray,
    tl_pass: np.ndarray,
    tl_total: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample (coincidence, XX_E passes, XX_L passes) per interfering frame.

    ``te_pass`` is the transfer matrix with the analyzer projector of the
    XX_E photon, ``te_total`` the one with the identity; analogously for
    the late photon. Marginal laws: P(coincidence combos) from Pi_eff,
    everything else from Tr products.
    """
    n = te_pass.shape[0]
    te_fail = te_total - te_pass
    tl_fail = tl_total - tl_pass
    p_c = np.empty((n, 4))
    p_any = np.empty((n, 4))
    for idx, (te, tl) in enumerate(
        [(te_pass, tl_pass), (te_pass, tl_fail), (te_fail, tl_pass), (te_fail, tl_fail)]
    ):
        p_c[:, idx] = _coincidence_probs(pi_eff, te, tl)
        p_any[:, idx] = (
            np.einsum("nii->n", te).real * np.einsum("nii->n", tl).real
        )
    table = np.concatenate([p_c, p_any - p_c], axis=1)
    table = np.clip(table, 0.0, None)
    table /= table.sum(axis=1, keepdims=True)
    cdf = np.cumsum(table, axis=1)
    u = rng.random(n)
    outcome = (u[:, None] >= cdf).sum(axis=1)
    coincidence = outcome < 4
    sub = outcome % 4
    e_pass = sub < 2
    l_pass = (sub % 2) == 0
    return coincidence, e_pass, l_pass


def synthesize_timetags(
    pE: SourceParams,
    pL: SourceParams,
    m: BsmModel,
    cfg: ExperimentConfig,
    duration_s: float,
    seed: int | np.random.SeedSequence = 0,
    xxa_setting: str = "H",
    xxb_setting: str = "V",
    quad: QuadratureSpec = DEFAULT_QUADRATURE,
    chunk_frames: int = 1 << 18,
) -> TimeTagStream:
    """Forward model of the full setup as a detector event stream.

    Deterministic for a given seed. The E and L excitations of every
    frame are drawn independently; interference statistics apply to
    frames where both X photons land temporally overlapped on the final
    splitter (E via the long arm, L via the short arm), everything else
    is routed with fair coins. Darks are Poisson per channel.
    """
    if duration_s < 0.0:
        raise ValueError("duration must be non-negative")
    _check_label(xxa_setting)
    _check_label(xxb_setting)
    n_frames = int(round(duration_s * cfg.rep_rate_hz))
    pi_eff = _effective_coincidence_operator(pE, pL, m, quad)
    pass_a = _PASS_PROJECTORS[xxa_setting]
    pass_b = _PASS_PROJECTORS[xxb_setting]
    eye2 = np.eye(2, dtype=complex)

    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    n_chunks = (n_frames + chunk_frames - 1) // chunk_frames
    chunk_seeds = root.spawn(max(n_chunks, 1) + 1)
    dark_rng = np.random.default_rng(chunk_seeds[-1])

    all_channels: list[np.ndarray] = []
    all_times: list[np.ndarray] = []

    period = cfg.frame_period_ns
    delay = cfg.pulse_pair_delay_ns

    for chunk in range(n_chunks):
        rng = np.random.default_rng(chunk_seeds[chunk])
        start = chunk * chunk_frames
        n = min(chunk_frames, n_frames - start)
        frame_t0 = (np.arange(start, start + n, dtype=np.float64)) * period

        e = _draw_slot(rng, n, pE, cfg)
        l = _draw_slot(rng, n, pL, cfg)
        # Independent fair coins: bunched-pair port, E port, L port,
        # XX_E pass, XX_L pass.
        u_ports = rng.random((n, 5))

        x_e_present = e.pair & e.x_survives
        x_l_present = l.pair & l.x_survives
        xx_e_present = e.pair & e.xx_survives
        xx_l_present = l.pair & l.xx_survives

        # Arrival times at the final splitter (before detector jitter).
        x_e_arrival = frame_t0 + e.t_xx + e.t_rec + np.where(e.x_long_path, delay, 0.0)
        x_l_arrival = frame_t0 + delay + l.t_xx + l.t_rec + np.where(l.x_long_path, delay, 0.0)

        interfering = x_e_present & x_l_present & e.x_long_path & ~l.x_long_path
        idx = np.flatnonzero(interfering)

        # Joint sampling of (coincidence, analyzer outcomes) where the
        # four-photon correlations matter.
        coinc = np.zeros(n, dtype=bool)
        e_pass_joint = np.zeros(n, dtype=bool)
        l_pass_joint = np.zeros(n, dtype=bool)
        if idx.size:
            op_e = np.where(e.xx_to_a[idx], 0, 1)  # 0 -> analyzer A, 1 -> B
            op_l = np.where(l.xx_to_a[idx], 0, 1)
            te_pass = np.empty((idx.size, 2, 2), dtype=complex)
            tl_pass = np.empty((idx.size, 2, 2), dtype=complex)
            for dest, proj in ((0, pass_a), (1, pass_b)):
                sel = op_e == dest
                if sel.any():
                    te_pass[sel] = _transfer_matrices(
                        pE, e.t_rec[idx][sel], e.cascade[idx][sel], proj
                    )
                sel = op_l == dest
                if sel.any():
                    tl_pass[sel] = _transfer_matrices(
                        pL, l.t_rec[idx][sel], l.cascade[idx][sel], proj
                    )
            # Photons that are lost keep the identity analyzer (marginalized).
            lost_e = ~xx_e_present[idx]
            lost_l = ~xx_l_present[idx]
            if lost_e.any():
                te_pass[lost_e] = _transfer_matrices(
                    pE, e.t_rec[idx][lost_e], e.cascade[idx][lost_e], eye2
                )
            if lost_l.any():
                tl_pass[lost_l] = _transfer_matrices(
                    pL, l.t_rec[idx][lost_l], l.cascade[idx][lost_l], eye2
                )
            te_total = _transfer_matrices(pE, e.t_rec[idx], e.cascade[idx], eye2)
            tl_total = _transfer_matrices(pL, l.t_rec[idx], l.cascade[idx], eye2)
            c, ep, lp = _sample_joint_outcomes(
                rng, pi_eff, te_pass, te_total, tl_pass, tl_total
            )
            coinc[idx] = c
            # For lost photons the sampled "pass" bit is meaningless and unused.
            e_pass_joint[idx] = ep
            l_pass_joint[idx] = lp

        # BSM clicks. Interfering coincidences put one photon on each
        # output; bunched pairs land on one random port together.
        channels = []
        times = []

        def _emit(mask: np.ndarray, channel_ids: np.ndarray, stamps: np.ndarray) -> None:
            if mask.any():
                channels.append(channel_ids[mask].astype(np.uint8))
                times.append(stamps[mask])

        same_port = u_ports[:, 0] < 0.5
        bsm_e_channel = np.where(
            interfering & coinc,
            np.where(u_ports[:, 1] < 0.5, CHANNELS["BSM1"], CHANNELS["BSM2"]),
            np.where(
                interfering,  # bunched: both photons on the same port
                np.where(same_port, CHANNELS["BSM1"], CHANNELS["BSM2"]),
                np.where(u_ports[:, 1] < 0.5, CHANNELS["BSM1"], CHANNELS["BSM2"]),
            ),
        )
        bsm_l_channel = np.where(
            interfering & coinc,
            np.where(u_ports[:, 1] < 0.5, CHANNELS["BSM2"], CHANNELS["BSM1"]),
            np.where(
                interfering,
                np.where(same_port, CHANNELS["BSM1"], CHANNELS["BSM2"]),
                np.where(u_ports[:, 2] < 0.5, CHANNELS["BSM1"], CHANNELS["BSM2"]),
            ),
        )
        _emit(x_e_present, bsm_e_channel, x_e_arrival + e.x_jitter)
        _emit(x_l_present, bsm_l_channel, x_l_arrival + l.x_jitter)

        # XX clicks: pass probability is 1/2 outside the jointly sampled
        # frames (maximally mixed marginals), the sampled bit inside.
        e_pass = np.where(interfering, e_pass_joint, u_ports[:, 3] < 0.5)
        l_pass = np.where(interfering, l_pass_joint, u_ports[:, 4] < 0.5)
        xx_e_click = xx_e_present & e_pass
        xx_l_click = xx_l_present & l_pass
        xx_e_channel = np.where(e.xx_to_a, CHANNELS["XXA"], CHANNELS["XXB"])
        xx_l_channel = np.where(l.xx_to_a, CHANNELS["XXA"], CHANNELS["XXB"])
        _emit(xx_e_click, xx_e_channel, frame_t0 + e.t_xx + e.xx_jitter)
        _emit(xx_l_click, xx_l_channel, frame_t0 + delay + l.t_xx + l.xx_jitter)

        if channels:
            all_channels.append(np.concatenate(channels))
            all_times.append(np.concatenate(times))

    # Dark counts, uniform over the run.
    if cfg.dark_rate_hz > 0.0 and duration_s > 0.0:
        duration_ns = n_frames * period
        for name in CHANNELS:
            count = dark_rng.poisson(cfg.dark_rate_hz * duration_s)
            if count:
                all_channels.append(
                    np.full(count, CHANNELS[name], dtype=np.uint8)
                )
                all_times.append(dark_rng.random(count) * duration_ns)

    if all_channels:
        channels_arr = np.concatenate(all_channels)
        times_ns = np.concatenate(all_times)
        times_ns = np.clip(times_ns, 0.0, None)
        stamps = (
            np.round(times_ns * (1000.0 / TIME_RESOLUTION_PS)).astype(np.uint64)
            * TIME_RESOLUTION_PS
        )
        order = np.argsort(stamps, kind="stable")
        channels_arr = channels_arr[order]
        stamps = stamps[order]
    else:
        channels_arr = np.empty(0, dtype=np.uint8)
        stamps = np.empty(0, dtype=np.uint64)

    return TimeTagStream(
        channels=channels_arr,
        timestamps_ps=stamps,
        duration_s=duration_s,
        config=cfg,
        xxa_setting=xxa_setting,
        xxb_setting=xxb_setting,
    )


# --- analysis --------------------------------------------------------------


def find_bsm_coincidences(stream: TimeTagStream, cfg: ExperimentConfig) -> np.ndarray:
    """Trigger times (ns) of BSM1-BSM2 pairs within the coincidence window.

    Greedy earliest-first matching; every event is used at most once.
    The early/late path assignment is enforced by the window itself: only
    the overlapped long/short path combination lands inside it, the other
    combinations sit whole pulse delays away. Each trigger is referenced
    to the early excitation by subtracting the interferometer delay from
    the pair midpoint, so XX delays cluster near 0 and +1.8 ns.
    """
    t1 = stream.channel_times_ns("BSM1")
    t2 = stream.channel_times_ns("BSM2")
    window = cfg.bsm_window_ns
    triggers = []
    i = j = 0
    while i < t1.size and j < t2.size:
        dt = t1[i] - t2[j]
        if abs(dt) <= window:
            triggers.append(0.5 * (t1[i] + t2[j]))
            i += 1
            j += 1
        elif dt < 0.0:
            i += 1
        else:
            j += 1
    return np.array(triggers, dtype=np.float64) - cfg.pulse_pair_delay_ns


def _delay_edges(cfg: ExperimentConfig) -> np.ndarray:
    half = cfg.record_range_ns
    n_bins = int(round(2.0 * half / cfg.bin_width_ns))
    return -half + cfg.bin_width_ns * np.arange(n_bins + 1)


def build_g3(
    stream: TimeTagStream, triggers: np.ndarray, cfg: ExperimentConfig
) -> CorrelationHistogram:
    """2-D histogram of (XXA - trigger, XXB - trigger) delays.

    Every (trigger, XXA event, XXB event) triple with both delays inside
    the recording range contributes one count.
    """
    if triggers.size == 0:
        raise ValueError("no triggers; cannot build a triggered histogram")
    edges = _delay_edges(cfg)
    ta = stream.channel_times_ns("XXA")
    tb = stream.channel_times_ns("XXB")
    half = cfg.record_range_ns
    lo_a = np.searchsorted(ta, triggers - half, side="left")
    hi_a = np.searchsorted(ta, triggers + half, side="right")
    lo_b = np.searchsorted(tb, triggers - half, side="left")
    hi_b = np.searchsorted(tb, triggers + half, side="right")
    delays_a: list[np.ndarray] = []
    delays_b: list[np.ndarray] = []
    for t, la, ha, lb, hb in zip(triggers, lo_a, hi_a, lo_b, hi_b):
        if ha == la or hb == lb:
            continue
        da = ta[la:ha] - t
        db = tb[lb:hb] - t
        delays_a.append(np.repeat(da, db.size))
        delays_b.append(np.tile(db, da.size))
    if delays_a:
        counts, _, _ = np.histogram2d(
            np.concatenate(delays_a), np.concatenate(delays_b), bins=[edges, edges]
        )
        counts = counts.astype(np.int64)
    else:
        counts = np.zeros((edges.size - 1, edges.size - 1), dtype=np.int64)
    return CorrelationHistogram(
        edges_a_ns=edges,
        edges_b_ns=edges,
        counts=counts,
        trigger_count=int(triggers.size),
        metadata={
            "xxa_setting": stream.xxa_setting,
            "xxb_setting": stream.xxb_setting,
        },
    )


def reduce_g2(g3: CorrelationHistogram, cfg: ExperimentConfig) -> CorrelationHistogram:
    """Sum the channel-B axis over the configured window -> 1-D histogram."""
    if g3.counts.ndim != 2:
        raise ValueError("reduce_g2 expects a 2-D histogram")
    lo, hi = cfg.g2_window_ns
    centers_b = 0.5 * (g3.edges_b_ns[:-1] + g3.edges_b_ns[1:])
    if lo < g3.edges_b_ns[0] or hi > g3.edges_b_ns[-1]:
        raise ValueError("g2 window lies outside the histogram range")
    mask = (centers_b >= lo) & (centers_b <= hi)
    return CorrelationHistogram(
        edges_a_ns=g3.edges_a_ns,
        counts=g3.counts[:, mask].sum(axis=1),
        trigger_count=g3.trigger_count,
        metadata=dict(g3.metadata, g2_window_ns=[lo, hi]),
    )


def side_peak_windows(cfg: ExperimentConfig, orders: range = range(1, 9)) -> list[tuple[float, float]]:
    """Central-window replicas shifted by whole frame periods (both signs)."""
    lo, hi = cfg.g2_window_ns
    period = cfg.frame_period_ns
    windows = []
    for n in orders:
        for sign in (-1, 1):
            shift = sign * n * period
            if lo + shift >= -cfg.record_range_ns and hi + shift <= cfg.record_range_ns:
                windows.append((lo + shift, hi + shift))
    return windows


def side_peak_mean(g2: CorrelationHistogram, cfg: ExperimentConfig) -> float:
    """Mean counts over the frame-shifted replicas of the central window."""
    windows = side_peak_windows(cfg)
    if len(windows) < 4:
        raise ValueError("need at least 4 side-peak windows inside the range")
    side = np.array([g2.window_sum(lo, hi) for lo, hi in windows])
    if side.sum() == 0:
        raise ValueError("side peaks are empty; cannot normalize")
    return float(side.mean())


def normalized_central_counts(g2: CorrelationHistogram, cfg: ExperimentConfig) -> float:
    """Central-window counts divided by the mean over the side-peak windows."""
    return g2.window_sum(*cfg.g2_window_ns) / side_peak_mean(g2, cfg)


def correlation_visibility(
    g2_cross: CorrelationHistogram,
    g2_co: CorrelationHistogram,
    cfg: ExperimentConfig,
) -> float:
    """(N_cross - N_co) / (N_cross + N_co) from side-peak-normalized counts.

    ``g2_cross`` holds the cross-polarized analyzer pair (e.g. H/V),
    ``g2_co`` the co-polarized one (e.g. H/H); positive visibility is
    the singlet signature.
    """
    if g2_cross.edges_a_ns.shape != g2_co.edges_a_ns.shape or not np.allclose(
        g2_cross.edges_a_ns, g2_co.edges_a_ns
    ):
        raise ValueError("histograms must share binning")
    n_cross = normalized_central_counts(g2_cross, cfg)
    n_co = normalized_central_counts(g2_co, cfg)
    if n_cross + n_co == 0.0:
        raise ValueError("no central counts in either histogram")
    return (n_cross - n_co) / (n_cross + n_co)


def extract_tomography_counts(
    stream: TimeTagStream, triggers: np.ndarray, cfg: ExperimentConfig
) -> list:
    """Fourfold coincidence counts of one run, as ordered-pair records.

    Relative to a trigger, the early XX photon clusters near delay 0 and
    the late one near the pulse-pair delay; the g2 window is split at
    the midpoint to assign detector clicks to the two photons. A click
    on analyzer A in the early window together with a click on B in the
    late window measures the ordered pair (A setting, B setting); the
    swapped configuration measures the reverse order. Equal analyzer
    settings merge into one record with doubled acquisition weight.
    """
    from .tomography import CountRecord

    lo, hi = cfg.g2_window_ns
    split = 0.5 * cfg.pulse_pair_delay_ns
    ta = stream.channel_times_ns("XXA")
    tb = stream.channel_times_ns("XXB")

    def window_counts(times: np.ndarray, w_lo: float, w_hi: float) -> np.ndarray:
        lo_idx = np.searchsorted(times, triggers + w_lo, side="left")
        hi_idx = np.searchsorted(times, triggers + w_hi, side="right")
        return hi_idx - lo_idx

    a_early = window_counts(ta, lo, split)
    a_late = window_counts(ta, split, hi)
    b_early = window_counts(tb, lo, split)
    b_late = window_counts(tb, split, hi)
    n_ab = int(np.sum(a_early * b_late))  # XX_E on A, XX_L on B
    n_ba = int(np.sum(b_early * a_late))  # XX_E on B, XX_L on A
    alpha, beta = stream.xxa_setting, stream.xxb_setting
    if alpha == beta:
        return [CountRecord(alpha, beta, n_ab + n_ba, acquisition_weight=2.0)]
    return [
        CountRecord(alpha, beta, n_ab),
        CountRecord(beta, alpha, n_ba),
    ]


# --- rate budget -----------------------------------------------------------


DEFAULT_TAU_X_NS = 0.27


def delay_interval_probability(
    cfg: ExperimentConfig, lo_ns: float, hi_ns: float, tau_x_ns: float = DEFAULT_TAU_X_NS
) -> float:
    """P(lo <= dT <= hi) for the arrival-time difference of two cascade
    photons detected behind the splitter.

    dT is the difference of two independent Exp(tau_xx) + Exp(tau_x)
    sums plus two detector jitters; evaluated through its characteristic
    function.
    """
    tau_xx = cfg.tau_xx_ns
    sigma = cfg.detector_jitter_sigma_ns

    def integrand(w: float) -> float:
        cf = math.exp(-(w * sigma) ** 2) / (
            (1.0 + (w * tau_x_ns) ** 2) * (1.0 + (w * tau_xx) ** 2)
        )
        return cf * (math.sin(w * hi_ns) - math.sin(w * lo_ns)) / w

    # The quartic characteristic-function decay makes the tail beyond
    # w_max negligible; wide intervals oscillate heavily, so QUADPACK
    # needs a generous subdivision budget.
    w_max = (1.0 / (4.0 * math.pi * 1e-12 * (tau_x_ns * tau_xx) ** 2)) ** 0.25
    if sigma > 0.0:
        w_max = min(w_max, 9.0 / sigma)
    subdivisions = max(200, int(w_max * max(abs(lo_ns), abs(hi_ns)) / math.pi) + 50)
    value, _ = quad(integrand, 1e-12, w_max, limit=subdivisions)
    return min(1.0, max(0.0, value / math.pi))


@dataclass(frozen=True)
class RateBudget:
    """Four-fold rate decomposition R4 = R_frames (p nx)^2 (p nxx)^2 c_bsm."""

    fourfold_hz: float
    frame_rate_hz: float
    x_arm_prob: float
    xx_arm_prob: float
    bell_success_fraction: float
    window_acceptance: float
    bsm_singles_hz: float
    xx_singles_hz: float
    polarization_coincidence_fraction: float

    @property
    def c_bsm(self) -> float:
        return self.bell_success_fraction * self.window_acceptance

    def to_json_dict(self) -> dict:
        return {
            "fourfold_hz": self.fourfold_hz,
            "frame_rate_hz": self.frame_rate_hz,
            "x_arm_prob": self.x_arm_prob,
            "xx_arm_prob": self.xx_arm_prob,
            "bell_success_fraction": self.bell_success_fraction,
            "window_acceptance": self.window_acceptance,
            "c_bsm": self.c_bsm,
            "bsm_singles_hz": self.bsm_singles_hz,
            "xx_singles_hz": self.xx_singles_hz,
            "polarization_coincidence_fraction": self.polarization_coincidence_fraction,
        }


def bsm_singles_rate(cfg: ExperimentConfig) -> float:
    """Mean click rate of one BSM detector (two slots, half to each port)."""
    return cfg.rep_rate_hz * cfg.pair_gen_prob * cfg.eta_x + cfg.dark_rate_hz


def xx_singles_rate(cfg: ExperimentConfig) -> float:
    """Mean click rate of one tomography detector (half pass, half split)."""
    return cfg.rep_rate_hz * cfg.pair_gen_prob * cfg.eta_xx * 0.5 + cfg.dark_rate_hz


def fourfold_rate(
    cfg: ExperimentConfig, m: BsmModel, tau_x_ns: float = DEFAULT_TAU_X_NS
) -> RateBudget:
    """Analytic four-fold coincidence budget.

    R4 = R_frames * (p eta_x)^2 * (p eta_xx)^2 * c_bsm with
    c_bsm = 1/4 * window acceptance; the quartic law in the arm
    efficiencies is exact by construction. The polarization coincidence
    fraction (2-V)/4 of the partial BSM is reported alongside for
    recalibration.
    """
    w = cfg.bsm_window_ns
    acceptance = delay_interval_probability(cfg, -w, w, tau_x_ns)
    p_x = cfg.pair_gen_prob * cfg.eta_x
    p_xx = cfg.pair_gen_prob * cfg.eta_xx
    bell_fraction = 0.25
    r4 = cfg.rep_rate_hz * p_x**2 * p_xx**2 * bell_fraction * acceptance
    return RateBudget(
        fourfold_hz=r4,
        frame_rate_hz=cfg.rep_rate_hz,
        x_arm_prob=p_x,
        xx_arm_prob=p_xx,
        bell_success_fraction=bell_fraction,
        window_acceptance=acceptance,
        bsm_singles_hz=bsm_singles_rate(cfg),
        xx_singles_hz=xx_singles_rate(cfg),
        polarization_coincidence_fraction=(2.0 - m.visibility) / 4.0,
    )


def expected_trigger_rate(
    pE: SourceParams, pL: SourceParams, m: BsmModel, cfg: ExperimentConfig
) -> float:
    """Analytic BSM trigger rate of the synthesizer, for cross-checks.

    One quarter of both-X frames interfere (E long, L short) and
    coincide with probability (2-V)/4 inside the window; the two path
    combinations whose arrivals sit one pulse delay apart contribute
    accidental coincidences with probability 1/2 in the shifted window.
    """
    p_both = (cfg.pair_gen_prob * cfg.eta_x) ** 2
    w = cfg.bsm_window_ns
    d = cfg.pulse_pair_delay_ns
    tau_x = 0.5 * (pE.tau_x_ns + pL.tau_x_ns)
    central = delay_interval_probability(cfg, -w, w, tau_x)
    shifted = delay_interval_probability(cfg, d - w, d + w, tau_x)
    far = delay_interval_probability(cfg, 2 * d - w, 2 * d + w, tau_x)
    rate = cfg.rep_rate_hz * p_both * (
        0.25 * ((2.0 - m.visibility) / 4.0) * central
        + 0.25 * 0.5 * (2.0 * shifted + far)
    )
    return rate
