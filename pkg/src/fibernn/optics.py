"""Physics of the optical computing loop.

A wide, flat-topped, linearly chirped pulse stands in for the time-stretched
source: temporal position maps to optical frequency, so a piecewise-constant
amplitude mask written across the pulse becomes a shaped spectrum. Matched
opposite-sign dispersion then compresses the pulse, and the compressed peak
field is the coherent sum of the masked segments, which is what turns one
pulse into one dot product.

Conventions: envelopes are complex arrays in sqrt(W) on a uniform, centered
time grid; spectra use numpy FFT ordering; dispersion applies the all-pass
transfer exp(+1j * (beta2 * length / 2) * omega**2).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.constants import Boltzmann, Planck, c as light_speed, elementary_charge


class AliasingError(RuntimeError):
    """Too much field energy near the edge of the frequency grid."""


class EmptyReadoutError(RuntimeError):
    """No photocurrent peak above the configured threshold."""


class ModulationFlatnessWarning(UserWarning):
    """Mask window extends beyond the flat part of the pulse."""


class ActivationDomainWarning(UserWarning):
    """Energy outside the activation table domain; clamped to the endpoints."""


# Fraction of the frequency grid treated as the guard band, and the maximum
# relative energy allowed there before propagation refuses to proceed.
ALIAS_GUARD_FRACTION = 0.05
ALIAS_ENERGY_LIMIT = 1e-6


@dataclass(frozen=True)
class TimeGrid:
    """Uniform simulation window; one pulse per window."""

    n_samples: int = 2**16
    window: float = 20e-9
    center_wavelength: float = 1550e-9

    def __post_init__(self) -> None:
        n = int(self.n_samples)
        if n < 2 or (n & (n - 1)) != 0:
            raise ValueError(f"n_samples must be a power of two >= 2, got {n}")
        if self.window <= 0 or self.center_wavelength <= 0:
            raise ValueError("window and center_wavelength must be positive")

    @property
    def dt(self) -> float:
        return self.window / self.n_samples

    @property
    def nyquist(self) -> float:
        """One-sided frequency extent of the grid in Hz."""
        return 0.5 / self.dt

    @property
    def center_frequency(self) -> float:
        return light_speed / self.center_wavelength

    def times(self) -> np.ndarray:
        return (np.arange(self.n_samples) - self.n_samples // 2) * self.dt

    def angular_frequencies(self) -> np.ndarray:
        """Baseband angular frequencies in FFT ordering."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_samples, self.dt)


@dataclass(frozen=True)
class OpticalField:
    """Complex envelope samples over a TimeGrid."""

    envelope: np.ndarray
    grid: TimeGrid

    def __post_init__(self) -> None:
        env = np.asarray(self.envelope, dtype=complex)
        if env.shape != (self.grid.n_samples,):
            raise ValueError(
                f"envelope shape {env.shape} does not match grid ({self.grid.n_samples},)"
            )
        object.__setattr__(self, "envelope", env)

    def power(self) -> np.ndarray:
        """Instantaneous power |E|^2 in W."""
        return np.abs(self.envelope) ** 2

    def energy(self) -> float:
        """Pulse energy in J."""
        return float(np.sum(self.power()) * self.grid.dt)


@dataclass(frozen=True)
class PhotocurrentTrace:
    """Detected photocurrent samples (A) over the field's time grid."""

    current: np.ndarray
    grid: TimeGrid


@dataclass(frozen=True)
class FiberSpan:
    """Second-order dispersion of one fiber segment."""

    beta2: float
    length: float
    role: str = "SMF"

    def __post_init__(self) -> None:
        if self.length < 0:
            raise ValueError("span length must be >= 0")
        if self.role not in ("SMF", "DCF"):
            raise ValueError(f"span role must be SMF or DCF, got {self.role!r}")

    @property
    def gdd(self) -> float:
        """Accumulated group-delay dispersion beta2 * length in s^2."""
        return self.beta2 * self.length


def matched_compression_span(gdd: float, beta2: float = 1.2e-25) -> FiberSpan:
    """Dispersion-compensating span whose GDD exactly cancels ``gdd``.

    Default beta2 is +120 ps^2/km (normal-dispersion DCF at 1550 nm); the
    sign of beta2 is flipped automatically if needed so length stays >= 0.
    """
    if gdd == 0.0:
        return FiberSpan(beta2=beta2, length=0.0, role="DCF")
    b2 = beta2 if (gdd < 0) == (beta2 > 0) else -beta2
    return FiberSpan(beta2=b2, length=-gdd / b2, role="DCF")


@dataclass(frozen=True)
class ModulationMask:
    """Equal-width non-negative segments tiling one window of the pulse."""

    segment_values: np.ndarray
    window_start: float
    window_width: float

    def __post_init__(self) -> None:
        values = np.asarray(self.segment_values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("segment_values must be a non-empty 1-D array")
        if np.any(values < 0.0):
            raise ValueError("segment values must be non-negative")
        if self.window_width <= 0:
            raise ValueError("window_width must be positive")
        object.__setattr__(self, "segment_values", values)

    @property
    def segment_count(self) -> int:
        return self.segment_values.size

    @property
    def segment_width(self) -> float:
        return self.window_width / self.segment_count

    def boundaries(self) -> np.ndarray:
        return self.window_start + self.segment_width * np.arange(self.segment_count + 1)


@dataclass(frozen=True)
class AmplifierParams:
    """EDFA model: flat gain plus optional white ASE."""

    gain_db: float = 20.0
    noise_figure_db: float = 4.0
    enabled: bool = True
    noise_enabled: bool = False

    @property
    def gain_linear(self) -> float:
        return 10.0 ** (self.gain_db / 10.0)

    @property
    def spontaneous_emission_factor(self) -> float:
        """n_sp = F/2 with F the linear noise figure."""
        return 10.0 ** (self.noise_figure_db / 10.0) / 2.0


@dataclass(frozen=True)
class DetectorParams:
    """Square-law photodetector with shot and thermal noise."""

    responsivity: float = 1.0  # A/W
    bandwidth: float | None = None  # Hz; None resolves to grid Nyquist / 4
    temperature: float = 290.0  # K
    load_resistance: float = 50.0  # ohm
    noise_enabled: bool = False

    def __post_init__(self) -> None:
        if self.responsivity <= 0 or self.temperature <= 0 or self.load_resistance <= 0:
            raise ValueError("detector parameters must be positive")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")

    def resolve_bandwidth(self, grid: TimeGrid) -> float:
        return self.bandwidth if self.bandwidth is not None else grid.nyquist / 4.0


@dataclass(frozen=True)
class ReadoutConfig:
    """How a compressed pulse becomes one number.

    ``coherent_sum`` integrates the complex envelope: exactly linear in the
    mask, valid on unchirped (flat-phase) fields. ``gated_peak_sqrt``
    integrates photocurrent in a narrow gate at the peak and takes the square
    root: the physical readout, linear in the mask near the coherent peak.
    """

    mode: str = "gated_peak_sqrt"
    gate_width: float = 2e-12
    peak_threshold: float = 0.0

    def __post_init__(self) -> None:
        if self.mode not in ("coherent_sum", "gated_peak_sqrt"):
            raise ValueError(f"unknown readout mode {self.mode!r}")
        if self.mode == "gated_peak_sqrt" and self.gate_width <= 0:
            raise ValueError("gate_width must be positive in gated mode")


# ---------------------------------------------------------------------------
# Pulse synthesis and propagation


def generate_stretched_pulse(
    grid: TimeGrid,
    width: float = 12e-9,
    flatness_order: int = 6,
    chirp_gdd: float = -2.0e-20,
    peak_amplitude: float = 1.0,
) -> OpticalField:
    """Synthesize the stretched pulse directly instead of propagating km of fiber.

    The temporal envelope is the super-Gaussian exp(-((t/T0)^(2m))/2) with
    T0 = width/2, so ``width`` is the full width at 1/e of peak intensity.
    A nonzero ``chirp_gdd`` adds the temporal phase -t^2/(2*chirp_gdd) of a
    pulse that accumulated that much group-delay dispersion, so a matched
    compression span (GDD = -chirp_gdd) collapses it to its transform limit.
    """
    if width >= grid.window:
        raise ValueError(
            f"pulse width {width} must fit inside the {grid.window} window"
        )
    if width <= 0:
        raise ValueError("pulse width must be positive")
    if flatness_order < 1:
        raise ValueError("flatness_order must be >= 1")
    t = grid.times()
    t0 = width / 2.0
    envelope = peak_amplitude * np.exp(-0.5 * (t / t0) ** (2 * int(flatness_order)))
    envelope = envelope.astype(complex)
    if chirp_gdd != 0.0:
        envelope *= np.exp(-1j * t**2 / (2.0 * chirp_gdd))
    return OpticalField(envelope=envelope, grid=grid)


def transform_limited_pulse(
    grid: TimeGrid,
    angular_bandwidth: float,
    flatness_order: int = 6,
    peak_amplitude: float = 1.0,
) -> OpticalField:
    """Unchirped pulse whose spectral intensity is a super-Gaussian.

    ``angular_bandwidth`` is the 1/e half-width of the spectral intensity in
    rad/s. Stretching this pulse by GDD phi2 maps the spectrum onto time and
    yields a flat-topped pulse of full width ~ 2 * angular_bandwidth * |phi2|;
    used to validate the direct synthesis above against real propagation.
    """
    if angular_bandwidth <= 0:
        raise ValueError("angular_bandwidth must be positive")
    omega = grid.angular_frequencies()
    spectrum = np.exp(-0.5 * (omega / angular_bandwidth) ** (2 * int(flatness_order)))
    envelope = np.fft.fftshift(np.fft.ifft(spectrum))
    envelope *= peak_amplitude / np.max(np.abs(envelope))
    return OpticalField(envelope=envelope, grid=grid)


def _check_aliasing(spectrum: np.ndarray, grid: TimeGrid) -> None:
    freqs = np.fft.fftfreq(grid.n_samples, grid.dt)
    guard = np.abs(freqs) >= (1.0 - ALIAS_GUARD_FRACTION) * grid.nyquist
    total = float(np.sum(np.abs(spectrum) ** 2))
    if total == 0.0:
        return
    fraction = float(np.sum(np.abs(spectrum[guard]) ** 2)) / total
    if fraction > ALIAS_ENERGY_LIMIT:
        raise AliasingError(
            f"{fraction:.3e} of the field energy sits in the outer "
            f"{ALIAS_GUARD_FRACTION:.0%} of the frequency grid"
        )


def propagate(
    field: OpticalField, span: FiberSpan, check_aliasing: bool = True
) -> OpticalField:
    """Apply the all-pass dispersion transfer of one span.

    exp(+1j * (gdd/2) * omega^2) in the frequency domain; energy is exactly
    preserved. Raises AliasingError when more than ALIAS_ENERGY_LIMIT of the
    energy sits in the outer ALIAS_GUARD_FRACTION of the frequency grid;
    disable the check only for fields whose deterministic part was already
    validated (added white noise fills the band by construction).
    """
    if span.gdd == 0.0:
        return OpticalField(envelope=field.envelope.copy(), grid=field.grid)
    spectrum = np.fft.fft(field.envelope)
    if check_aliasing:
        _check_aliasing(spectrum, field.grid)
    omega = field.grid.angular_frequencies()
    spectrum *= np.exp(0.5j * span.gdd * omega**2)
    return OpticalField(envelope=np.fft.ifft(spectrum), grid=field.grid)


# ---------------------------------------------------------------------------
# Modulation


def _mask_drive(mask: ModulationMask, grid: TimeGrid, edge_time: float) -> np.ndarray:
    """Sample the modulator drive: piecewise-constant segments with
    raised-cosine transitions of duration ``edge_time`` at every boundary.

    Transitions are symmetric about each boundary, so segment integrals match
    the ideal rectangular tiling exactly; edge_time = 0 gives hard edges.
    """
    t = grid.times()
    bounds = mask.boundaries()
    if edge_time < 0:
        raise ValueError("edge_time must be >= 0")
    if edge_time >= mask.segment_width:
        raise ValueError("edge_time must be shorter than one segment")

    # Levels including the zero field outside the window.
    levels = np.concatenate([[0.0], mask.segment_values, [0.0]])
    drive = levels[np.searchsorted(bounds, t, side="right")]
    if edge_time > 0.0:
        half = edge_time / 2.0
        for b, lo, hi in zip(bounds, levels[:-1], levels[1:]):
            sel = np.abs(t - b) < half
            u = (t[sel] - (b - half)) / edge_time
            drive[sel] = lo + (hi - lo) * 0.5 * (1.0 - np.cos(np.pi * u))
    return drive


def modulate(
    field: OpticalField, mask: ModulationMask, edge_time: float = 0.0
) -> OpticalField:
    """Multiply the envelope by the segment mask; zero outside the window.

    Issues ModulationFlatnessWarning when the pulse intensity inside the mask
    window droops below 98% of its peak, since segment accuracy then degrades.
    """
    grid = field.grid
    lo = mask.window_start
    hi = mask.window_start + mask.window_width
    if lo < -grid.window / 2 or hi > grid.window / 2:
        raise ValueError("mask window does not fit inside the time grid")

    power = field.power()
    peak = power.max()
    if peak > 0.0:
        t = grid.times()
        inside = (t >= lo) & (t <= hi)
        if power[inside].min() < 0.98 * peak:
            warnings.warn(
                "mask window extends beyond the flat region of the pulse",
                ModulationFlatnessWarning,
                stacklevel=2,
            )
    drive = _mask_drive(mask, grid, edge_time)
    return OpticalField(envelope=field.envelope * drive, grid=grid)


# ---------------------------------------------------------------------------
# Amplification, detection, readout


def amplify(
    field: OpticalField, params: AmplifierParams, rng: np.random.Generator | None = None
) -> OpticalField:
    """Scale the envelope by sqrt(G) and, optionally, add white ASE.

    The ASE variance per sample is n_sp * h * nu * (G - 1) * f_sim with
    f_sim = 1/dt the simulation bandwidth, split evenly between quadratures.
    """
    if not params.enabled:
        return field
    gain = params.gain_linear
    if gain < 1.0:
        raise ValueError(f"amplifier gain must be >= 1 linear, got {gain}")
    envelope = field.envelope * np.sqrt(gain)
    if params.noise_enabled and gain > 1.0:
        if rng is None:
            raise ValueError("rng is required when amplifier noise is enabled")
        variance = (
            params.spontaneous_emission_factor
            * Planck
            * field.grid.center_frequency
            * (gain - 1.0)
            / field.grid.dt
        )
        sigma = np.sqrt(variance / 2.0)
        n = field.grid.n_samples
        envelope = envelope + sigma * (
            rng.standard_normal(n) + 1j * rng.standard_normal(n)
        )
    return OpticalField(envelope=envelope, grid=field.grid)


def detect(
    field: OpticalField, params: DetectorParams, rng: np.random.Generator | None = None
) -> PhotocurrentTrace:
    """Square-law detection: i(t) = R * |E|^2, low-passed to the detector
    bandwidth, plus optional per-sample shot and thermal noise."""
    grid = field.grid
    bandwidth = params.resolve_bandwidth(grid)
    if bandwidth > grid.nyquist:
        raise ValueError(
            f"detector bandwidth {bandwidth} exceeds grid Nyquist {grid.nyquist}"
        )
    power = field.power()
    current = params.responsivity * power

    spectrum = np.fft.rfft(current)
    freqs = np.fft.rfftfreq(grid.n_samples, grid.dt)
    spectrum[freqs > bandwidth] = 0.0
    current = np.fft.irfft(spectrum, n=grid.n_samples)

    if params.noise_enabled:
        if rng is None:
            raise ValueError("rng is required when detector noise is enabled")
        shot_var = 2.0 * elementary_charge * params.responsivity * power * bandwidth
        thermal_var = 4.0 * Boltzmann * params.temperature * bandwidth / params.load_resistance
        current = current + np.sqrt(shot_var) * rng.standard_normal(grid.n_samples)
        current = current + np.sqrt(thermal_var) * rng.standard_normal(grid.n_samples)
    return PhotocurrentTrace(current=current, grid=grid)


def readout(
    signal: OpticalField | PhotocurrentTrace, cfg: ReadoutConfig
) -> float:
    """Reduce a compressed pulse to one non-negative number.

    coherent_sum: |integral of the envelope| (needs an OpticalField).
    gated_peak_sqrt: locate the photocurrent peak, integrate the current over
    the gate, and return the square root (needs a PhotocurrentTrace).
    """
    if cfg.mode == "coherent_sum":
        if not isinstance(signal, OpticalField):
            raise TypeError("coherent_sum readout needs the optical field")
        return float(np.abs(signal.envelope.sum()) * signal.grid.dt)

    if not isinstance(signal, PhotocurrentTrace):
        raise TypeError("gated_peak_sqrt readout needs a photocurrent trace")
    current = signal.current
    peak_index = int(np.argmax(current))
    if current[peak_index] < cfg.peak_threshold:
        raise EmptyReadoutError(
            f"no photocurrent above threshold {cfg.peak_threshold}"
        )
    t = signal.grid.times()
    gate = np.abs(t - t[peak_index]) <= cfg.gate_width / 2.0
    integral = float(current[gate].sum() * signal.grid.dt)
    return float(np.sqrt(max(integral, 0.0)))


def apply_activation_curve(energy: float, curve: Sequence | None) -> float:
    """Monotone-interpolated transfer of the attenuation stage.

    ``curve`` is a sequence of (input, output) rows sorted by input; None is
    the identity. Inputs outside the table are clamped to the endpoints with
    a warning.
    """
    if curve is None:
        return energy
    table = np.asarray(curve, dtype=float)
    if table.ndim != 2 or table.shape[1] != 2 or table.shape[0] < 2:
        raise ValueError("activation curve must be an (n >= 2, 2) table")
    x, y = table[:, 0], table[:, 1]
    if np.any(np.diff(x) <= 0) or np.any(np.diff(y) < 0):
        raise ValueError("activation curve must be monotone")
    if energy < x[0] or energy > x[-1]:
        warnings.warn(
            f"energy {energy} outside activation table domain [{x[0]}, {x[-1]}]",
            ActivationDomainWarning,
            stacklevel=2,
        )
    return float(np.interp(energy, x, y))


# ---------------------------------------------------------------------------
# Whole-loop configuration and execution


@dataclass(frozen=True)
class PhysicsConfig:
    """Everything needed to turn a pulse schedule into readouts."""

    grid: TimeGrid = field(default_factory=TimeGrid)
    pulse_width: float = 12e-9
    flatness_order: int = 6
    stretch_gdd: float = -2.0e-20  # s^2 accumulated by the stretch stage
    peak_power: float = 1e-3  # W at the modulator input
    mask_fraction: float = 0.6  # mask window as a fraction of pulse width
    edge_time: float = 5e-12  # modulator transition time
    smf_beta2: float = -2.17e-26  # s^2/m, anomalous at 1550 nm
    dcf_beta2: float = 1.2e-25  # s^2/m
    amplifier: AmplifierParams = field(default_factory=AmplifierParams)
    detector: DetectorParams = field(default_factory=DetectorParams)
    readout: ReadoutConfig = field(default_factory=ReadoutConfig)
    activation_curve: tuple | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.mask_fraction <= 1.0:
            raise ValueError("mask_fraction must be in (0, 1]")
        if self.peak_power <= 0:
            raise ValueError("peak_power must be positive")
        if self.readout.mode == "gated_peak_sqrt" and self.stretch_gdd == 0.0:
            raise ValueError(
                "gated readout needs a chirped pulse (stretch_gdd != 0) to compress"
            )
        if self.readout.mode == "coherent_sum" and self.stretch_gdd != 0.0:
            raise ValueError(
                "coherent_sum readout is only exact on unchirped fields; "
                "set stretch_gdd = 0 (see PhysicsConfig.idealized)"
            )

    def idealized(self) -> "PhysicsConfig":
        """Flat-pulse, coherent-readout variant used for algebra checks."""
        return replace(
            self,
            stretch_gdd=0.0,
            readout=replace(self.readout, mode="coherent_sum"),
        )

    def with_noise(self, amplifier_noise: bool, detector_noise: bool) -> "PhysicsConfig":
        return replace(
            self,
            amplifier=replace(self.amplifier, noise_enabled=amplifier_noise),
            detector=replace(self.detector, noise_enabled=detector_noise),
        )

    def stretch_span(self) -> FiberSpan:
        """SMF-equivalent span realizing the configured stretch GDD."""
        if self.stretch_gdd == 0.0:
            return FiberSpan(beta2=self.smf_beta2, length=0.0, role="SMF")
        b2 = self.smf_beta2 if (self.stretch_gdd < 0) == (self.smf_beta2 < 0) else -self.smf_beta2
        return FiberSpan(beta2=b2, length=self.stretch_gdd / b2, role="SMF")

    def compression_span(self) -> FiberSpan:
        return matched_compression_span(self.stretch_gdd, self.dcf_beta2)

    def mask_for(self, segment_values: np.ndarray) -> ModulationMask:
        width = self.mask_fraction * self.pulse_width
        return ModulationMask(
            segment_values=segment_values,
            window_start=-width / 2.0,
            window_width=width,
        )


@dataclass(frozen=True)
class ScheduleResult:
    """Readouts in schedule order: four product values plus the reference per
    group, already passed through the activation curve."""

    product_readouts: np.ndarray  # (groups, 4)
    reference_readouts: np.ndarray  # (groups,)


def prepare_pulses(schedule, physics: PhysicsConfig) -> list:
    """Deterministic front half of the loop: one modulated field per pulse.

    Returns, per group, the list [p1, p2, p3, p4, reference] of fields at the
    amplifier input; reused across noise trials since nothing here is random.
    The aliasing guard runs here, once per pulse, on the noise-free field.
    """
    base = generate_stretched_pulse(
        physics.grid,
        width=physics.pulse_width,
        flatness_order=physics.flatness_order,
        chirp_gdd=physics.stretch_gdd,
        peak_amplitude=np.sqrt(physics.peak_power),
    )
    prepared = []
    for group in schedule.groups:
        fields = [
            modulate(base, physics.mask_for(values), physics.edge_time)
            for values in group.products
        ]
        fields.append(modulate(base, physics.mask_for(group.reference), physics.edge_time))
        if physics.stretch_gdd != 0.0:
            for f in fields:
                _check_aliasing(np.fft.fft(f.envelope), physics.grid)
        prepared.append(fields)
    return prepared


def _run_one_pulse(
    field_in: OpticalField,
    physics: PhysicsConfig,
    span: FiberSpan,
    rng: np.random.Generator | None,
) -> float:
    amplified = amplify(field_in, physics.amplifier, rng)
    compressed = propagate(amplified, span, check_aliasing=False)
    if physics.readout.mode == "gated_peak_sqrt":
        trace = detect(compressed, physics.detector, rng)
        value = readout(trace, physics.readout)
    else:
        value = readout(compressed, physics.readout)
    return apply_activation_curve(value, physics.activation_curve)


def run_prepared(
    prepared: list, physics: PhysicsConfig, rng: np.random.Generator | None = None
) -> ScheduleResult:
    """Back half of the loop (amplify, compress, detect, read) per pulse."""
    span = physics.compression_span()
    products = np.zeros((len(prepared), 4))
    references = np.zeros(len(prepared))
    for g, fields in enumerate(prepared):
        for k, field_in in enumerate(fields):
            label = "reference" if k == 4 else f"product {k}"
            try:
                value = _run_one_pulse(field_in, physics, span, rng)
            except Exception as err:
                raise RuntimeError(f"group {g}, {label}: {err}") from err
            if k == 4:
                references[g] = value
            else:
                products[g, k] = value
    return ScheduleResult(product_readouts=products, reference_readouts=references)


def run_schedule(
    schedule, physics: PhysicsConfig, rng: np.random.Generator | None = None
) -> ScheduleResult:
    """Simulate every pulse of a schedule through the optical loop.

    Fully deterministic when both noise flags are off; with noise enabled an
    ``rng`` must be supplied.
    """
    return run_prepared(prepare_pulses(schedule, physics), physics, rng)
