"""Probabilistic left/right hand identification.

A hand segment is summarized by its normalized horizontal position x and
ellipse angle theta.  Each hand side owns two shifted Maxwell densities
(one per variable): the left likelihood evaluates (x, theta) directly, the
right one evaluates the mirrored pair (1 - x, pi - theta).  Segments are
labeled by a likelihood ratio with a competitive rule so one frame never
holds two left or two right hands.
"""

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import erf

from .errors import DataError, FormatError
from .geometry import EllipseFeatures

MODEL_VERSION = 1

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class HandLabel(str, Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class MaxwellParams:
    """Shifted Maxwell density: d displaces the support, a scales the spread."""

    d: float
    a: float

    def __post_init__(self):
        if self.a <= 0:
            raise DataError("Maxwell amplitude a must be positive")


@dataclass(frozen=True)
class LRModel:
    left_x: MaxwellParams
    left_theta: MaxwellParams
    right_x: MaxwellParams
    right_theta: MaxwellParams


# Fitted constants for head-mounted egocentric video; rows (left, right),
# columns (d_x, a_x, d_theta, a_theta).  Angles are radians.
DEFAULT_MODEL = LRModel(
    left_x=MaxwellParams(-0.05, 0.24),
    left_theta=MaxwellParams(-0.63, 0.94),
    right_x=MaxwellParams(-0.08, 0.21),
    right_theta=MaxwellParams(-0.91, 1.10),
)


def maxwell_pdf(v, params):
    """Density sqrt(2/pi) * (v-d)^2 / a^3 * exp(-(v-d)^2 / (2 a^2)), 0 below d."""
    a, d = params.a, params.d
    v = np.asarray(v, dtype=np.float64)
    y = v - d
    dens = _SQRT_2_OVER_PI * y * y / a ** 3 * np.exp(-y * y / (2.0 * a * a))
    out = np.where(y >= 0, dens, 0.0)
    return float(out) if out.ndim == 0 else out


def maxwell_cdf(v, params):
    a, d = params.a, params.d
    v = np.asarray(v, dtype=np.float64)
    y = np.maximum(v - d, 0.0)
    out = erf(y / (a * math.sqrt(2.0))) - _SQRT_2_OVER_PI * y / a * np.exp(-y * y / (2 * a * a))
    return float(out) if out.ndim == 0 else out


def _pair_density(v, params, hi, renormalize):
    dens = maxwell_pdf(v, params)
    if renormalize:
        mass = maxwell_cdf(hi, params) - maxwell_cdf(0.0, params)
        if mass > 0:
            dens = dens / mass
    return dens


def likelihoods(f, model=DEFAULT_MODEL, renormalize=False):
    """(p_left, p_right) for features; accepts scalars or equal-shape arrays.

    ``renormalize`` divides each marginal by its mass on the truncated
    domain ([0,1] for positions, [0,pi] for angles); the default keeps raw
    densities, matching the ratio test as published.
    """
    if isinstance(f, EllipseFeatures):
        x, theta = f.x, f.theta
    else:
        x, theta = f
    p_left = (_pair_density(x, model.left_x, 1.0, renormalize)
              * _pair_density(theta, model.left_theta, math.pi, renormalize))
    p_right = (_pair_density(1.0 - np.asarray(x, dtype=np.float64), model.right_x, 1.0, renormalize)
               * _pair_density(math.pi - np.asarray(theta, dtype=np.float64),
                               model.right_theta, math.pi, renormalize))
    return p_left, p_right


def likelihood_ratio(f, model=DEFAULT_MODEL, renormalize=False):
    """Lambda = p_left / p_right with 0/0 -> 1 and p/0 -> +inf."""
    p_left, p_right = likelihoods(f, model, renormalize)
    p_left = np.asarray(p_left, dtype=np.float64)
    p_right = np.asarray(p_right, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(
            p_right > 0, p_left / np.where(p_right > 0, p_right, 1.0),
            np.where(p_left > 0, np.inf, 1.0),
        )
    return float(ratio) if ratio.ndim == 0 else ratio


def independent_labels(features, model=DEFAULT_MODEL):
    """Per-segment labels ignoring the one-left-one-right constraint."""
    labels = []
    for f in features:
        ratio = likelihood_ratio(f, model)
        if ratio > 1.0:
            labels.append(HandLabel.LEFT)
        elif ratio < 1.0:
            labels.append(HandLabel.RIGHT)
        else:
            labels.append(HandLabel.LEFT if f.x < 0.5 else HandLabel.RIGHT)
    return labels


def competitive_labels(features, model=DEFAULT_MODEL):
    """Labels under the competitive rule; None marks a discarded segment.

    One segment: left iff its ratio exceeds 1 (ties fall back to the
    smaller-x convention).  Two segments: the higher ratio takes left, the
    other right.  Three segments: the best left (max ratio) and best right
    (min ratio) survive, the middle one is discarded.
    """
    n = len(features)
    if n == 0:
        return []
    if n > 3:
        raise DataError("competitive assignment expects at most 3 segments")
    ratios = [likelihood_ratio(f, model) for f in features]

    if n == 1:
        return independent_labels(features, model)
    if n == 2:
        (r1, f1), (r2, f2) = zip(ratios, features)
        if r1 > r2 or (r1 == r2 and f1.x <= f2.x):
            return [HandLabel.LEFT, HandLabel.RIGHT]
        return [HandLabel.RIGHT, HandLabel.LEFT]

    # Three segments: survivorship. Ties prefer smaller x for the left
    # winner and larger x for the right winner.
    left_idx = min(range(3), key=lambda i: (-ratios[i], features[i].x))
    rest = [i for i in range(3) if i != left_idx]
    right_idx = min(rest, key=lambda i: (ratios[i], -features[i].x))
    labels = [None, None, None]
    labels[left_idx] = HandLabel.LEFT
    labels[right_idx] = HandLabel.RIGHT
    return labels


def assign_ids(segments, model=DEFAULT_MODEL):
    """Label 1..3 (contour, features) segments; discarded ones are dropped.

    Returns a list of (contour, HandLabel) with at most one left and one
    right entry.
    """
    if not segments:
        return []
    labels = competitive_labels([f for _, f in segments], model)
    return [(contour, label)
            for (contour, _), label in zip(segments, labels) if label is not None]


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

def _fit_maxwell(values, d_lo):
    """Maximum-likelihood (d, a) for one marginal.

    For fixed d the optimal amplitude is closed-form,
    a(d)^2 = mean((v - d)^2) / 3, leaving a bounded 1-D profile-likelihood
    search over the displacement.
    """
    v = np.asarray(values, dtype=np.float64)
    d_hi = float(v.min()) - 1e-9

    def neg_profile(d):
        y = v - d
        a_sq = np.mean(y * y) / 3.0
        return -(2.0 * np.sum(np.log(y)) - 1.5 * len(v) * np.log(a_sq))

    result = minimize_scalar(neg_profile, bounds=(d_lo, d_hi), method="bounded",
                             options={"xatol": 1e-9})
    d = float(result.x)
    a = math.sqrt(np.mean((v - d) ** 2) / 3.0)
    return MaxwellParams(d=d, a=min(max(a, 1e-4), 5.0))


def fit_model(samples, min_per_class=30):
    """Fit all four Maxwell marginals from labeled (features, label) pairs.

    Left samples contribute (x, theta) directly; right samples contribute
    the mirrored (1 - x, pi - theta).  Deterministic given the data.
    """
    left = [f for f, label in samples if label == HandLabel.LEFT]
    right = [f for f, label in samples if label == HandLabel.RIGHT]
    if len(left) < min_per_class or len(right) < min_per_class:
        raise DataError(
            f"insufficient data: need >= {min_per_class} samples per class, "
            f"got {len(left)} left / {len(right)} right")
    return LRModel(
        left_x=_fit_maxwell([f.x for f in left], -1.0),
        left_theta=_fit_maxwell([f.theta for f in left], -math.pi),
        right_x=_fit_maxwell([1.0 - f.x for f in right], -1.0),
        right_theta=_fit_maxwell([math.pi - f.theta for f in right], -math.pi),
    )


# ---------------------------------------------------------------------------
# Model file (plain key = value text)
# ---------------------------------------------------------------------------

_FIELDS = ("left_x", "left_theta", "right_x", "right_theta")


def save_lr_model(model, path):
    lines = [f"format_version = {MODEL_VERSION}"]
    for name in _FIELDS:
        params = getattr(model, name)
        lines.append(f"{name}_d = {params.d!r}")
        lines.append(f"{name}_a = {params.a!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_lr_model(path):
    entries = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"bad model line: {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        entries[key] = value
    if entries.get("format_version") != str(MODEL_VERSION):
        raise FormatError(f"unsupported model version {entries.get('format_version')!r}")
    try:
        kwargs = {name: MaxwellParams(d=float(entries[f"{name}_d"]),
                                      a=float(entries[f"{name}_a"]))
                  for name in _FIELDS}
    except KeyError as exc:
        raise FormatError(f"model file missing key {exc}") from exc
    return LRModel(**kwargs)
