"""Neuron-level diagnostics of a trained (or idealized) checkpoint."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .idealize import cosine_counterpart, fit_ideal_square_wave, mean_nearest_point_distance
from .mlp import evaluate_accuracy
from .spectral import (
    DegenerateInputError,
    NoDominantComponentError,
    circular_correlation,
    dominant_components,
    periodicity_scores,
    wrap_angle,
)
from .stats import paired_ttest

logger = logging.getLogger(__name__)

STRUCTURED_THRESHOLD = 12.0
UNSTRUCTURED_THRESHOLD = 5.0


@dataclass
class NeuronClassification:
    structured: np.ndarray
    unstructured: np.ndarray
    excluded: np.ndarray
    scores_a: np.ndarray
    scores_b: np.ndarray
    high: float = STRUCTURED_THRESHOLD
    low: float = UNSTRUCTURED_THRESHOLD
    # neurons whose group would differ if classified on w_b instead of w_a
    disagreements: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def n_neurons(self):
        return self.scores_a.shape[0]

    def labels(self):
        """Per-neuron group name."""
        out = np.full(self.n_neurons, "excluded", dtype=object)
        out[self.structured] = "structured"
        out[self.unstructured] = "unstructured"
        return out


def _groups(scores, high, low):
    return np.where(scores > high, 2, np.where(scores < low, 0, 1))


def classify_neurons(model, high=STRUCTURED_THRESHOLD, low=UNSTRUCTURED_THRESHOLD):
    """Split neurons by the periodicity of ``w_a``: ``> high`` structured, ``< low`` unstructured."""
    if low > high:
        raise ValueError("low threshold must not exceed high threshold")
    scores_a = periodicity_scores(model.w_a)
    scores_b = periodicity_scores(model.w_b)
    ga = _groups(scores_a, high, low)
    gb = _groups(scores_b, high, low)
    disagree = np.flatnonzero(ga != gb)
    if disagree.size:
        logger.info("w_a and w_b classifications disagree on %d neurons", disagree.size)
    return NeuronClassification(
        structured=np.flatnonzero(ga == 2),
        unstructured=np.flatnonzero(ga == 0),
        excluded=np.flatnonzero(ga == 1),
        scores_a=scores_a,
        scores_b=scores_b,
        high=high,
        low=low,
        disagreements=disagree,
    )


def ablate_neurons(model, neurons):
    """Copy of ``model`` with the output rows of ``neurons`` zeroed."""
    out = model.copy()
    out.w_out[np.asarray(neurons, dtype=np.int64)] = 0.0
    return out


@dataclass
class AblationResult:
    before: float
    after: float
    delta: float  # after - before
    n_ablated: int


def ablate_unstructured(model, classification, X_val, y_val):
    before = evaluate_accuracy(model, X_val, y_val)
    after = evaluate_accuracy(ablate_neurons(model, classification.unstructured), X_val, y_val)
    return AblationResult(before, after, after - before, int(classification.unstructured.size))


def dominant_frequencies(model):
    """Dominant frequency of ``w_a``, ``w_b``, ``w_out`` per neuron (0 where undefined)."""
    return np.stack([dominant_components(getattr(model, k))["frequency"] for k in ("w_a", "w_b", "w_out")])


def frequency_match_rate(model, classification):
    """Fraction of neurons whose three dominant frequencies coincide.

    Returns ``(rate over all neurons, rate over structured neurons)``; the
    second is NaN when there are no structured neurons.
    """
    freqs = dominant_frequencies(model)
    match = (freqs[0] == freqs[1]) & (freqs[1] == freqs[2]) & (freqs[0] > 0)
    overall = float(match.mean())
    s = classification.structured
    structured = float(match[s].mean()) if s.size else float("nan")
    return overall, structured


@dataclass
class PhaseReport:
    phase_a: np.ndarray
    phase_b: np.ndarray
    phase_out: np.ndarray
    phase_sum: np.ndarray
    valid: np.ndarray
    r_all: float
    r_structured: float
    n_excluded: int
    degenerate_all: bool = False
    degenerate_structured: bool = False


def _safe_corr(x, y):
    if x.shape[0] < 2:
        return float("nan"), True
    try:
        return circular_correlation(x, y), False
    except DegenerateInputError:
        return float("nan"), True


def phase_sum_report(model, classification):
    """Dominant phases of each vector and circular correlation of ``phi_out`` with ``phi_a + phi_b``.

    Neurons where any of the three vectors lacks a dominant component are
    left out of both correlations. Undefined correlations are NaN with the
    matching ``degenerate_*`` flag set.
    """
    comps = [dominant_components(getattr(model, k)) for k in ("w_a", "w_b", "w_out")]
    valid = comps[0]["valid"] & comps[1]["valid"] & comps[2]["valid"]
    pa, pb, po = (c["phase"] for c in comps)
    psum = wrap_angle(pa + pb)
    r_all, deg_all = _safe_corr(psum[valid], po[valid])
    s = classification.structured
    s = s[valid[s]]
    r_s, deg_s = _safe_corr(psum[s], po[s])
    return PhaseReport(pa, pb, po, psum, valid, r_all, r_s, int((~valid).sum()), deg_all, deg_s)


def neuron_fit_distances(w, resolution=100):
    """Mean nearest-point distance of ``w`` to its ideal square wave and to the matching cosine."""
    fit = fit_ideal_square_wave(w)
    d_sq = mean_nearest_point_distance(w, fit.wave, resolution)
    d_cos = mean_nearest_point_distance(w, cosine_counterpart(fit.wave), resolution)
    return d_sq, d_cos


def fit_distances(model, neurons, resolution=100, vectors=("w_a", "w_b")):
    """Per-neuron ``(square distance, cosine distance)``, averaged over the input vectors.

    Neurons where any vector has no dominant component are dropped; the
    returned index array lists the neurons kept.
    """
    kept, d_sq, d_cos = [], [], []
    for i in np.asarray(neurons, dtype=np.int64):
        try:
            pairs = [neuron_fit_distances(getattr(model, v)[i], resolution) for v in vectors]
        except NoDominantComponentError:
            continue
        kept.append(i)
        d_sq.append(np.mean([a for a, _ in pairs]))
        d_cos.append(np.mean([b for _, b in pairs]))
    return np.asarray(kept, dtype=np.int64), np.asarray(d_sq), np.asarray(d_cos)


def fit_distance_ttest(model, classification, restrict="structured", resolution=100):
    """Paired t-test of square-fit minus cosine-fit distances over a neuron set."""
    if restrict == "structured":
        neurons = classification.structured
    elif restrict == "all":
        neurons = np.arange(classification.n_neurons)
    else:
        raise ValueError("restrict must be 'all' or 'structured'")
    _, d_sq, d_cos = fit_distances(model, neurons, resolution)
    return paired_ttest(d_sq, d_cos)


@dataclass
class BiasStats:
    mean: float
    sd: float
    max_abs: float
    per_neuron: dict  # neuron index -> effective bias


def effective_biases(model, neurons):
    """``bias_h + offset(w_a) + offset(w_b)`` with offsets from the ideal square fits."""
    out = {}
    for i in np.asarray(neurons, dtype=np.int64):
        try:
            off_a = fit_ideal_square_wave(model.w_a[i]).wave.offset
            off_b = fit_ideal_square_wave(model.w_b[i]).wave.offset
        except NoDominantComponentError:
            continue
        out[int(i)] = float(model.bias_h[i] + off_a + off_b)
    return out


def effective_bias_stats(model, classification):
    per = effective_biases(model, classification.structured)
    vals = np.asarray(list(per.values()))
    if vals.size == 0:
        return BiasStats(float("nan"), float("nan"), float("nan"), per)
    sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
    return BiasStats(float(vals.mean()), sd, float(np.abs(vals).max()), per)


def analyze_model(model, X_val=None, y_val=None, resolution=100):
    """Every diagnostic for one checkpoint as a JSON-ready dict."""
    cls = classify_neurons(model)
    match_all, match_s = frequency_match_rate(model, cls)
    phases = phase_sum_report(model, cls)
    bias = effective_bias_stats(model, cls)
    freqs = dominant_frequencies(model)

    tests = {}
    for restrict in ("structured", "all"):
        try:
            r = fit_distance_ttest(model, cls, restrict, resolution)
            tests[restrict] = r._asdict()
        except ValueError as exc:  # fewer than two usable neurons
            tests[restrict] = {"error": str(exc)}

    summary = {
        "n_hidden": model.n_hidden,
        "p": model.p,
        "n_structured": int(cls.structured.size),
        "n_unstructured": int(cls.unstructured.size),
        "n_excluded": int(cls.excluded.size),
        "n_classification_disagreements": int(cls.disagreements.size),
        "mean_periodicity": float(cls.scores_a.mean()),
        "frequency_match_all": match_all,
        "frequency_match_structured": match_s,
        "r_all": phases.r_all,
        "r_structured": phases.r_structured,
        "n_phase_excluded": phases.n_excluded,
        "ttest": tests,
        "effective_bias": {
            "mean": bias.mean,
            "sd": bias.sd,
            "max_abs": bias.max_abs,
        },
    }
    if X_val is not None:
        abl = ablate_unstructured(model, cls, X_val, y_val)
        summary["accuracy"] = abl.before
        summary["ablation"] = {"before": abl.before, "after": abl.after, "delta": abl.delta}

    labels = cls.labels()
    neurons = []
    for i in range(model.n_hidden):
        neurons.append(
            {
                "neuron": i,
                "group": labels[i],
                "periodicity_a": float(cls.scores_a[i]),
                "periodicity_b": float(cls.scores_b[i]),
                "freq_a": int(freqs[0, i]),
                "freq_b": int(freqs[1, i]),
                "freq_out": int(freqs[2, i]),
                "phase_a": float(phases.phase_a[i]),
                "phase_b": float(phases.phase_b[i]),
                "phase_out": float(phases.phase_out[i]),
                "phase_sum": float(phases.phase_sum[i]),
                "b_eff": bias.per_neuron.get(i),
                "out_norm": float(np.linalg.norm(model.w_out[i])),
            }
        )
    return {"summary": summary, "neurons": neurons}


SWEEP_COLUMNS = ("alpha", "val_acc", "mean_periodicity", "r_all", "r_structured", "n_structured")


def sweep_summary(runs, X_val=None, y_val=None):
    """One row per run, sorted by alpha.

    ``runs`` yields ``(alpha, model)`` or ``(alpha, model, val_acc)``; when the
    accuracy is missing it is measured on ``X_val, y_val``.
    """
    rows = []
    for run in runs:
        alpha, model = run[0], run[1]
        acc = run[2] if len(run) > 2 else evaluate_accuracy(model, X_val, y_val)
        cls = classify_neurons(model)
        ph = phase_sum_report(model, cls)
        rows.append(
            {
                "alpha": float(alpha),
                "val_acc": float(acc),
                "mean_periodicity": float(cls.scores_a.mean()),
                "r_all": ph.r_all,
                "r_structured": ph.r_structured,
                "n_structured": int(cls.structured.size),
            }
        )
    if not rows:
        raise ValueError("sweep_summary needs at least one run")
    return sorted(rows, key=lambda r: r["alpha"])
