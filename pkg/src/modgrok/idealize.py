"""Ideal square/cosine waves, median-matched square fits, and idealized MLPs.

Idealized models replace every weight vector of a neuron by a parametric wave
sharing one frequency. Input vectors use ``f`` and the output vector uses
``g``, each either ``cos`` or ``sign o cos`` (with ``sign(0) = +1``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import check_vector
from .mlp import Model
from .spectral import dominant_component, dominant_components, phases_at, wrap_angle

logger = logging.getLogger(__name__)

KINDS = ("square", "cosine")


def wave_function(kind, x):
    """``cos`` or ``sign o cos`` evaluated at angles ``x``."""
    c = np.cos(x)
    if kind == "cosine":
        return c
    if kind == "square":
        return np.where(c >= 0.0, 1.0, -1.0)
    raise ValueError(f"unknown wave kind {kind!r}; expected one of {KINDS}")


@dataclass(frozen=True)
class WaveSpec:
    kind: str
    frequency: int
    phase: float = 0.0
    amplitude: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown wave kind {self.kind!r}")
        if self.frequency < 0 or (self.kind == "square" and self.frequency < 1):
            raise ValueError(f"invalid frequency {self.frequency} for a {self.kind} wave")
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")

    def angle(self, t, p):
        # reduce k*t mod p first so large j keep full precision
        return 2.0 * np.pi * np.mod(self.frequency * np.asarray(t, dtype=np.float64), p) / p - self.phase

    def __call__(self, t, p):
        """Wave value at (possibly fractional) positions ``t``."""
        return self.offset + self.amplitude * wave_function(self.kind, self.angle(t, p))


def synth_wave(spec, p):
    """Integer samples ``v[j] = offset + A * F(2 pi k j / p - phase)``, ``j < p``."""
    if spec.frequency > (p - 1) // 2:
        raise ValueError(f"frequency {spec.frequency} exceeds {(p - 1) // 2} for p={p}")
    return spec(np.arange(p), p)


class SquareWaveFit(NamedTuple):
    wave: WaveSpec
    upper_median: float
    lower_median: float


def fit_ideal_square_wave(w):
    """Square wave at the dominant frequency/phase of ``w`` with median-matched levels.

    Frequency and phase are taken from the dominant Fourier component as is.
    The upper level is the median of ``w`` over the positive half-periods of
    that wave and the lower level the median over the negative ones.
    """
    w = check_vector(w)
    p = w.shape[0]
    comp = dominant_component(w)
    phase = comp.phase
    unit = synth_wave(WaveSpec("square", comp.frequency, phase), p)
    upper = float(np.median(w[unit > 0]))
    lower = float(np.median(w[unit < 0]))
    if upper < lower:
        # anti-aligned levels: the same wave shifted by half a period
        upper, lower = lower, upper
        phase = wrap_angle(phase + np.pi)
    wave = WaveSpec("square", comp.frequency, phase, (upper - lower) / 2.0, (upper + lower) / 2.0)
    return SquareWaveFit(wave, upper, lower)


def cosine_counterpart(wave):
    """Cosine with the same frequency, phase, amplitude and offset."""
    return WaveSpec("cosine", wave.frequency, wave.phase, wave.amplitude, wave.offset)


def mean_nearest_point_distance(w, spec, resolution=100):
    """Mean over ``j`` of the distance from ``(j, w[j])`` to the sampled wave curve.

    The wave is sampled at ``t = 0, 1/resolution, ..., p - 1/resolution`` and
    distances are Euclidean in raw (index, weight) units.
    """
    w = check_vector(w)
    if resolution < 10:
        raise ValueError("resolution must be >= 10")
    p = w.shape[0]
    t = np.arange(p * resolution) / resolution
    curve = spec(t, p)
    out = np.empty(p)
    for j in range(p):
        centre = j * resolution
        # the sample at t=j bounds the search radius
        radius = abs(curve[centre] - w[j])
        lo = max(0, centre - int(np.ceil(radius * resolution)) - 1)
        hi = min(t.shape[0], centre + int(np.ceil(radius * resolution)) + 2)
        dt = t[lo:hi] - j
        dv = curve[lo:hi] - w[j]
        out[j] = np.sqrt(np.min(dt * dt + dv * dv))
    return float(out.mean())


class ConstructionSetting(NamedTuple):
    input_kind: str
    output_kind: str

    @property
    def name(self):
        short = {"square": "Sq", "cosine": "Cos"}
        return f"{short[self.input_kind]}->{short[self.output_kind]}"

    @classmethod
    def parse(cls, text):
        if isinstance(text, cls):
            return text
        # "Sq->Cos", "sq→cos", "sq2cos" and "SQ_COS" all reduce to "sqcos"
        key = "".join(c for c in str(text).lower() if c.isalpha())
        try:
            return SETTINGS[key]
        except KeyError:
            raise ValueError(f"unknown setting {text!r}; expected one of {list(SETTING_NAMES)}") from None


COS_COS = ConstructionSetting("cosine", "cosine")
SQ_COS = ConstructionSetting("square", "cosine")
SQ_SQ = ConstructionSetting("square", "square")
SETTING_NAMES = {"Cos->Cos": COS_COS, "Sq->Cos": SQ_COS, "Sq->Sq": SQ_SQ}
SETTINGS = {"".join(c for c in k.lower() if c.isalpha()): v for k, v in SETTING_NAMES.items()}


def neuron_frequency(i, p):
    """Non-zero frequency in ``[1, (p-1)/2]`` assigned to constructed neuron ``i``.

    ``(i mod (p-1)) + 1`` cycles through every non-zero residue; residues above
    ``(p-1)/2`` are folded onto their mirror ``p - k``.
    """
    k = (np.asarray(i) % (p - 1)) + 1
    return np.where(k > (p - 1) // 2, p - k, k)


def _wave_rows(kind, freqs, phases, p, amplitude=1.0, offset=0.0):
    j = np.arange(p)
    ang = 2.0 * np.pi * (np.outer(freqs, j) % p) / p - np.asarray(phases)[:, None]
    amp = np.asarray(amplitude, dtype=np.float64).reshape(-1, 1) if np.ndim(amplitude) else amplitude
    off = np.asarray(offset, dtype=np.float64).reshape(-1, 1) if np.ndim(offset) else offset
    return off + amp * wave_function(kind, ang)


def build_wave_model(freqs, phase_a, phase_b, phase_out, setting, p, amp_in=1.0, amp_b=None, amp_out=1.0):
    """Model whose neuron ``i`` carries waves at ``freqs[i]`` with the given phases.

    Neurons with frequency 0 are left entirely zero. All biases are zero.
    """
    setting = ConstructionSetting.parse(setting)
    freqs = np.asarray(freqs, dtype=np.int64)
    active = (freqs > 0)[:, None]
    amp_b = amp_in if amp_b is None else amp_b
    w_a = _wave_rows(setting.input_kind, freqs, phase_a, p, amp_in) * active
    w_b = _wave_rows(setting.input_kind, freqs, phase_b, p, amp_b) * active
    w_out = _wave_rows(setting.output_kind, freqs, phase_out, p, amp_out) * active
    return Model(w_a, w_b, np.zeros(freqs.shape[0]), w_out)


def construct_scratch_model(p=97, n_hidden=256, setting=SQ_COS, seed=0):
    """Hand-built MLP with random input phases and output phase ``phi_a + phi_b``."""
    if n_hidden < 1:
        raise ValueError("n_hidden must be >= 1")
    rng = np.random.default_rng(seed)
    phase_a = rng.uniform(-np.pi, np.pi, size=n_hidden)
    phase_b = rng.uniform(-np.pi, np.pi, size=n_hidden)
    freqs = neuron_frequency(np.arange(n_hidden), p)
    return build_wave_model(freqs, phase_a, phase_b, phase_a + phase_b, setting, p)


@dataclass
class WaveParameters:
    """Per-neuron wave parameters read off a trained model."""

    frequency: np.ndarray
    phase_a: np.ndarray
    phase_b: np.ndarray
    phase_out: np.ndarray
    amp_a: np.ndarray
    amp_b: np.ndarray
    amp_out: np.ndarray
    valid: np.ndarray

    @property
    def n_degenerate(self):
        return int(np.count_nonzero(~self.valid))


PHASE_SOURCES = ("shared", "own")


def extract_wave_parameters(model, phase_source="shared"):
    """Per-neuron frequency, phases and amplitudes for idealization.

    The frequency is the dominant bin of ``w_a``. With ``phase_source="shared"``
    the phases of ``w_b`` and ``w_out`` are read at that same bin; with
    ``"own"`` each vector's phase comes from its own dominant bin.
    """
    if phase_source not in PHASE_SOURCES:
        raise ValueError(f"phase_source must be one of {PHASE_SOURCES}")
    p = model.p
    comp = dominant_components(model.w_a)
    freqs = comp["frequency"]
    valid = comp["valid"].copy()
    safe = np.where(valid, freqs, 1)
    j = np.arange(p)
    basis = np.exp(-2j * np.pi * (np.outer(safe, j) % p) / p)

    def at_freq(W):
        coef = np.sum(W * basis, axis=1)
        mag = np.abs(coef)
        ok = mag > 1e-10 * p * np.max(np.abs(W), axis=1)
        return phases_at(W, safe), 2.0 * mag / p, ok

    phase_b, amp_b, ok_b = at_freq(model.w_b)
    phase_out, amp_out, ok_out = at_freq(model.w_out)
    if phase_source == "own":
        own_b, own_out = dominant_components(model.w_b), dominant_components(model.w_out)
        phase_b, phase_out = own_b["phase"], own_out["phase"]
        ok_b, ok_out = own_b["valid"], own_out["valid"]
    valid &= ok_b & ok_out
    zero = np.where(valid, 1.0, 0.0)
    return WaveParameters(
        frequency=np.where(valid, freqs, 0),
        phase_a=comp["phase"] * zero,
        phase_b=phase_b * zero,
        phase_out=phase_out * zero,
        amp_a=comp["amplitude"] * zero,
        amp_b=amp_b * zero,
        amp_out=amp_out * zero,
        valid=valid,
    )


def extract_idealized_model(trained, setting=SQ_COS, amplitude_weighted=False, phase_source="shared"):
    """Replace every neuron of ``trained`` by ideal waves at its extracted parameters.

    By default all waves have unit amplitude and zero offset, and all biases
    are zero. ``amplitude_weighted`` scales each wave by its measured
    amplitude ``2|w_hat[k]|/p`` instead. Neurons without a usable dominant
    component are zeroed. ``phase_source`` is passed to
    :func:`extract_wave_parameters`.
    """
    params = extract_wave_parameters(trained, phase_source)
    if params.n_degenerate:
        logger.info("zeroed %d neurons without a dominant component", params.n_degenerate)
    if amplitude_weighted:
        amps = dict(amp_in=params.amp_a, amp_b=params.amp_b, amp_out=params.amp_out)
    else:
        amps = {}
    return build_wave_model(
        params.frequency, params.phase_a, params.phase_b, params.phase_out, setting, trained.p, **amps
    )
