"""Synthesis of the pick-up coil voltage from a trajectory."""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass

import numpy as np

from .integrator import Trajectory
from .physics import TWO_PI, SystemParams

BINARY_MAGIC = b"MDSIG1\x00\x00"


class UndersamplingError(ValueError):
    """Requested sample rate cannot represent the signal content."""

    def __init__(self, required_rate: float, requested_rate: float):
        super().__init__(f"sample rate {requested_rate:g} Hz below required minimum "
                         f"{required_rate:g} Hz")
        self.required_rate = required_rate
        self.requested_rate = requested_rate


@dataclass(frozen=True, eq=False)
class SignalSeries:
    """Uniformly sampled real-valued signal."""

    sample_rate: float
    start_time: float
    samples: np.ndarray

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return self.samples.size

    @property
    def times(self):
        return self.start_time + np.arange(self.samples.size) / self.sample_rate

    @property
    def duration(self):
        return self.samples.size / self.sample_rate


def minimum_sample_rate(traj: Trajectory, params: SystemParams) -> float:
    """Four times the largest instantaneous frequency present (Hz)."""
    f_max = max(np.max(np.abs(traj.dressed_lo)), np.max(np.abs(traj.dressed_hi)),
                np.max(np.abs(traj.omega_b)), np.max(np.abs(traj.omega_s))) / TWO_PI
    f_max += params.omega_larmor / TWO_PI
    return 4.0 * f_max


def synthesize(traj: Trajectory, params: SystemParams, sample_rate: float,
               noise_rms: float = 0.0, seed: int | None = 0) -> SignalSeries:
    """Real coil signal ``Re[c_b psi_b + c_s psi_s]`` sampled at ``sample_rate``.

    The amplitudes are taken from the trajectory's continuous extension (or
    from its samples when the sampling grids coincide).  If
    ``params.omega_larmor`` is non-zero the signal is multiplied by the
    lab-frame carrier ``exp(-i omega_larmor t)`` before taking the real part.
    White Gaussian noise of standard deviation ``noise_rms`` is added from a
    generator seeded with ``seed``.

    Raises
    ------
    UndersamplingError
        If ``sample_rate`` is below four times the highest frequency.
    """
    required = minimum_sample_rate(traj, params)
    if sample_rate < required:
        raise UndersamplingError(required, sample_rate)
    if noise_rms < 0:
        raise ValueError("noise_rms must be >= 0")
    t0, t1 = float(traj.t[0]), float(traj.t[-1])
    n = int(math.floor((t1 - t0) * sample_rate + 1e-9)) + 1
    times = t0 + np.arange(n) / sample_rate
    if traj._dense is not None:
        psi_b, psi_s = traj.evaluate(times)
    elif n == traj.t.size and np.allclose(times, traj.t):
        psi_b, psi_s = traj.psi_b, traj.psi_s
    else:
        raise ValueError("trajectory without dense output must already be on the target grid")
    field = params.fill_b * psi_b + params.fill_s * psi_s
    if params.omega_larmor > 0:
        field = field * np.exp(-1j * params.omega_larmor * times)
    samples = field.real
    if noise_rms > 0:
        rng = np.random.default_rng(seed)
        samples = samples + rng.normal(0.0, noise_rms, samples.size)
    return SignalSeries(sample_rate=float(sample_rate), start_time=t0, samples=samples)


def write_signal_csv(sig: SignalSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("t", "signal"))
        for t, v in zip(sig.times, sig.samples):
            writer.writerow((repr(float(t)), repr(float(v))))


def read_signal_csv(path) -> SignalSeries:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] < 2:
        raise ValueError("signal file needs at least two samples")
    dt = np.diff(data[:, 0])
    rate = 1.0 / float(np.mean(dt))
    if np.max(np.abs(dt * rate - 1.0)) > 1e-6:
        raise ValueError("signal samples are not uniformly spaced")
    return SignalSeries(sample_rate=rate, start_time=float(data[0, 0]), samples=data[:, 1])


def write_signal_binary(sig: SignalSeries, path) -> None:
    """Little-endian float64 samples after a 16-byte header.

    The header is the magic ``MDSIG1\\0\\0`` followed by the sample rate as a
    little-endian float64.  The start time is not stored.
    """
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<d", sig.sample_rate))
        fh.write(np.asarray(sig.samples, dtype="<f8").tobytes())


def read_signal_binary(path, start_time: float = 0.0) -> SignalSeries:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:8] != BINARY_MAGIC:
            raise ValueError("not an MDSIG1 signal file")
        (rate,) = struct.unpack("<d", header[8:])
        samples = np.frombuffer(fh.read(), dtype="<f8")
    return SignalSeries(sample_rate=rate, start_time=start_time, samples=samples)
