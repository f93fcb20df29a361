"""Mamdani fuzzy inference used to score job/VM pairings.

Membership functions are piecewise linear (triangles and trapezoids), rules
use min conjunction and min implication, rule outputs are aggregated with
max, and the crisp value is the discrete centroid of the aggregated region.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

INPUT_LABELS = ("low", "medium", "high")
OUTPUT_LABELS = ("poor", "adequate", "good")

TYPE_A = "TypeA"
TYPE_B = "TypeB"
CROSSOVER = "Crossover"
VARIANTS = (TYPE_A, TYPE_B, CROSSOVER)


class FuzzyConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FuzzySet:
    """A triangle (3 breakpoints) or trapezoid (4 breakpoints)."""

    label: str
    points: tuple[float, ...]

    def __post_init__(self) -> None:
        pts = tuple(float(p) for p in self.points)
        if len(pts) not in (3, 4):
            raise FuzzyConfigError(f"set {self.label!r}: need 3 or 4 breakpoints, got {len(pts)}")
        if any(b < a for a, b in zip(pts, pts[1:])):
            raise FuzzyConfigError(f"set {self.label!r}: breakpoints must be non-decreasing: {pts}")
        object.__setattr__(self, "points", pts)

    @property
    def trapezoid(self) -> tuple[float, float, float, float]:
        p = self.points
        if len(p) == 3:
            return (p[0], p[1], p[1], p[2])
        return (p[0], p[1], p[2], p[3])

    @property
    def start(self) -> float:
        return self.points[0]

    @property
    def end(self) -> float:
        return self.points[-1]

    def __call__(self, x):
        return membership(self, x)


def membership(fset: FuzzySet, x):
    """Degree of ``x`` in ``fset``. Accepts scalars or numpy arrays."""
    a, b, c, d = fset.trapezoid
    if np.ndim(x) == 0:
        x = float(x)
        if x < a or x > d:
            return 0.0
        if b <= x <= c:
            return 1.0
        if x < b:
            return (x - a) / (b - a)
        return (d - x) / (d - c)

    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    out[(x >= b) & (x <= c)] = 1.0
    rising = (x >= a) & (x < b)
    if b > a:
        out[rising] = (x[rising] - a) / (b - a)
    falling = (x > c) & (x <= d)
    if d > c:
        out[falling] = (d - x[falling]) / (d - c)
    return out


@dataclass(frozen=True)
class LinguisticVariable:
    name: str
    lo: float
    hi: float
    sets: tuple[FuzzySet, FuzzySet, FuzzySet]

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise FuzzyConfigError(f"{self.name}: universe needs lo < hi, got [{self.lo}, {self.hi}]")
        if len(self.sets) != 3:
            raise FuzzyConfigError(f"{self.name}: exactly three sets required")
        first, _, third = self.sets
        if first.end != third.start:
            raise FuzzyConfigError(
                f"{self.name}: last breakpoint of {first.label!r} ({first.end}) must equal "
                f"first breakpoint of {third.label!r} ({third.start})"
            )
        # Coverage: the union of supports must span the universe without holes.
        probe = np.unique(np.concatenate([[self.lo, self.hi], *[s.points for s in self.sets]]))
        probe = probe[(probe >= self.lo) & (probe <= self.hi)]
        mids = (probe[:-1] + probe[1:]) / 2
        xs = np.concatenate([probe, mids])
        if np.any(self.degrees(xs).max(axis=-1) <= 0.0):
            raise FuzzyConfigError(f"{self.name}: sets leave part of [{self.lo}, {self.hi}] uncovered")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.sets)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise FuzzyConfigError(f"{self.name}: unknown label {label!r}") from None

    def degrees(self, x) -> np.ndarray:
        """Membership in each set, shape ``(..., 3)``, after clamping to the universe."""
        xc = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        return np.stack([membership(s, xc) for s in self.sets], axis=-1)

    def peak(self, label: str) -> float:
        """A point where ``label`` has membership 1 and the other sets have 0."""
        a, b, c, d = self.sets[self.index(label)].trapezoid
        return (b + c) / 2


def fuzzify(var: LinguisticVariable, x: float) -> tuple[float, float, float]:
    x = min(max(float(x), var.lo), var.hi)
    return tuple(float(membership(s, x)) for s in var.sets)


def template_sets(lo: float, hi: float, labels: Sequence[str] = INPUT_LABELS) -> tuple[FuzzySet, ...]:
    """Three overlapping sets laid out proportionally over ``[lo, hi]``."""
    span = hi - lo
    q1, mid, q3 = lo + 0.15 * span, lo + 0.5 * span, lo + 0.85 * span
    return (
        FuzzySet(labels[0], (lo, lo, q1, mid)),
        FuzzySet(labels[1], (q1, mid, q3)),
        FuzzySet(labels[2], (mid, q3, hi, hi)),
    )


@dataclass(frozen=True)
class FuzzyRule:
    antecedent: tuple[tuple[str, str], ...]
    consequent: str

    def __str__(self) -> str:
        cond = " and ".join(f"{var} is {lab}" for var, lab in self.antecedent)
        return f"if {cond} then suitability is {self.consequent}"


@dataclass(frozen=True)
class InferenceSystem:
    inputs: tuple[LinguisticVariable, ...]
    output: LinguisticVariable
    rules: tuple[FuzzyRule, ...]
    resolution: int = 201
    # Derived lookup tables, filled in __post_init__.
    _rule_index: np.ndarray = field(init=False, repr=False, compare=False)
    _rule_out: np.ndarray = field(init=False, repr=False, compare=False)
    _xs: np.ndarray = field(init=False, repr=False, compare=False)
    _out_curves: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.resolution < 3:
            raise FuzzyConfigError(f"resolution must be >= 3, got {self.resolution}")
        if (self.output.lo, self.output.hi) != (0.0, 1.0):
            raise FuzzyConfigError("output universe must be [0, 1]")
        names = [v.name for v in self.inputs]
        by_name = {v.name: v for v in self.inputs}
        idx = np.zeros((len(self.rules), len(self.inputs)), dtype=np.intp)
        out = np.zeros(len(self.rules), dtype=np.intp)
        seen = set()
        for r, rule in enumerate(self.rules):
            ante = dict(rule.antecedent)
            if set(ante) != set(names):
                raise FuzzyConfigError(f"rule {r} antecedent {sorted(ante)} does not match inputs {names}")
            for k, name in enumerate(names):
                idx[r, k] = by_name[name].index(ante[name])
            out[r] = self.output.index(rule.consequent)
            seen.add(tuple(idx[r]))
        if len(seen) != 3 ** len(self.inputs) or len(self.rules) != len(seen):
            raise FuzzyConfigError(
                f"rule base incomplete: {len(seen)} distinct combinations, need {3 ** len(self.inputs)}"
            )
        xs = np.linspace(0.0, 1.0, self.resolution)
        object.__setattr__(self, "_rule_index", idx)
        object.__setattr__(self, "_rule_out", out)
        object.__setattr__(self, "_xs", xs)
        object.__setattr__(self, "_out_curves", self.output.degrees(xs).T.copy())

    @property
    def samples(self) -> np.ndarray:
        return self._xs

    def consequent_strengths(self, degrees: Sequence[np.ndarray]) -> np.ndarray:
        """Max firing strength per output label.

        ``degrees[k]`` holds input k's fuzzified degrees with shape ``(..., 3)``;
        all entries must broadcast together. Returns shape ``(..., 3)``.
        """
        fire = None
        for k, deg in enumerate(degrees):
            term = np.asarray(deg)[..., self._rule_index[:, k]]
            fire = term if fire is None else np.minimum(fire, term)
        out = np.zeros(fire.shape[:-1] + (len(self.output.sets),))
        for label in range(len(self.output.sets)):
            mask = self._rule_out == label
            if mask.any():
                out[..., label] = fire[..., mask].max(axis=-1)
        return out

    def region_from_strengths(self, strengths: np.ndarray) -> np.ndarray:
        s = np.asarray(strengths)[..., :, None]
        return np.minimum(s, self._out_curves).max(axis=-2)

    def centroids_from_strengths(self, strengths: np.ndarray, chunk: int = 16384) -> np.ndarray:
        """Vectorised ``defuzzify_centroid(region_from_strengths(s))``."""
        strengths = np.asarray(strengths, dtype=float)
        flat = strengths.reshape(-1, strengths.shape[-1])
        result = np.empty(len(flat))
        for i in range(0, len(flat), chunk):
            region = _rescale(self.region_from_strengths(flat[i : i + chunk]))
            mass = region.sum(axis=-1)
            if np.any(mass <= 0.0):
                raise ValueError("empty output region")
            result[i : i + chunk] = region @ self._xs / mass
        return result.reshape(strengths.shape[:-1])


def infer(system: InferenceSystem, inputs: Sequence[float]) -> np.ndarray:
    """Aggregated output region sampled at ``system.resolution`` points on [0, 1]."""
    if len(inputs) != len(system.inputs):
        raise ValueError(f"expected {len(system.inputs)} inputs, got {len(inputs)}")
    degrees = [var.degrees(x) for var, x in zip(system.inputs, inputs)]
    return system.region_from_strengths(system.consequent_strengths(degrees))


def _rescale(region: np.ndarray) -> np.ndarray:
    # Power-of-two scaling so each row peaks in [0.5, 1). Exact for normal
    # floats, and keeps subnormal regions from underflowing in the products.
    peak = region.max(axis=-1, keepdims=True)
    _, exp = np.frexp(np.where(peak > 0, peak, 1.0))
    return np.ldexp(region, -exp)


def defuzzify_centroid(region, xs=None) -> float:
    region = np.asarray(region, dtype=float)
    if region.ndim != 1 or len(region) < 3:
        raise ValueError("region needs at least 3 samples")
    if xs is None:
        xs = np.linspace(0.0, 1.0, len(region))
    region = _rescale(region)
    mass = region.sum()
    if mass <= 0.0:
        raise ValueError("empty output region")
    return float(region @ xs / mass)


# --- rule-table generation -------------------------------------------------

DEFAULT_WEIGHTS = {
    TYPE_A: {"vm_mips": 0.6, "vm_ram": 0.4},
    TYPE_B: {"vm_bandwidth": 1.0},
    CROSSOVER: {"vm_bandwidth": 0.2, "vm_mips": 0.5, "vm_ram": 0.3},
}

# Input order per variant; the job variable always comes first.
VARIANT_INPUTS = {
    TYPE_A: ("job_length", "vm_mips", "vm_ram"),
    TYPE_B: ("job_length", "vm_bandwidth"),
    CROSSOVER: ("job_length", "vm_bandwidth", "vm_mips", "vm_ram"),
}


@dataclass(frozen=True)
class Bands:
    """Thresholds on surplus = capacity - demand (both scaled to [0, 1])."""

    poor_below: Fraction = Fraction(-1, 2)
    good_from: Fraction = Fraction(-1, 6)
    overshoot_above: Fraction = Fraction(1, 2)

    def classify(self, surplus: Fraction) -> str:
        if surplus < self.poor_below:
            return "poor"
        if surplus < self.good_from or surplus > self.overshoot_above:
            return "adequate"
        return "good"


def _exact(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x))


def surplus(job_label: int, resource_labels: Mapping[str, int], weights: Mapping[str, float]) -> Fraction:
    """Capacity minus demand for one label combination, in exact arithmetic."""
    capacity = sum((_exact(weights[name]) * idx for name, idx in resource_labels.items()), Fraction(0))
    return capacity / 2 - Fraction(job_label, 2)


def generate_rules(
    input_names: Sequence[str], weights: Mapping[str, float], bands: Bands = Bands()
) -> tuple[FuzzyRule, ...]:
    """One rule per combination of input labels; the first input is the job demand."""
    job_name, *resources = input_names
    if set(resources) != set(weights):
        raise FuzzyConfigError(f"weights {sorted(weights)} do not match resources {sorted(resources)}")
    rules = []
    for combo in itertools.product(range(3), repeat=len(input_names)):
        job_idx, *res_idx = combo
        s = surplus(job_idx, dict(zip(resources, res_idx)), weights)
        ante = tuple((name, INPUT_LABELS[i]) for name, i in zip(input_names, combo))
        rules.append(FuzzyRule(ante, bands.classify(s)))
    return tuple(rules)


# --- default variables and the suitability model ---------------------------

DEFAULT_UNIVERSES = {
    "job_length": (1000.0, 20000.0),
    "vm_mips": (500.0, 2000.0),
    "vm_ram": (256.0, 2048.0),
    "vm_bandwidth": (500.0, 1000.0),
}

# Chosen so that mips = 1000 fuzzifies to (0.3, 0.7, 0.0).
VM_MIPS_SETS = {"low": (500, 500, 650, 1150), "medium": (650, 1150, 1650), "high": (1150, 1650, 2000, 2000)}
SUITABILITY_SETS = {"poor": (0, 0, 0.25, 0.5), "adequate": (0.25, 0.5, 0.75), "good": (0.5, 0.75, 1, 1)}


@dataclass(frozen=True)
class FuzzyConfig:
    """Everything that shapes the suitability model. Hashable so models can be cached."""

    universes: tuple[tuple[str, float, float], ...] = tuple((k, *v) for k, v in DEFAULT_UNIVERSES.items())
    # (variable, label, breakpoints) overrides on top of the proportional template.
    breakpoints: tuple[tuple[str, str, tuple[float, ...]], ...] = tuple(
        [("vm_mips", lab, tuple(map(float, p))) for lab, p in VM_MIPS_SETS.items()]
        + [("suitability", lab, tuple(map(float, p))) for lab, p in SUITABILITY_SETS.items()]
    )
    weights: tuple[tuple[str, tuple[tuple[str, float], ...]], ...] = tuple(
        (variant, tuple(sorted(w.items()))) for variant, w in DEFAULT_WEIGHTS.items()
    )
    bands: Bands = Bands()
    resolution: int = 201

    @classmethod
    def from_dict(cls, data: Mapping | None) -> "FuzzyConfig":
        data = dict(data or {})
        known = {"universes", "breakpoints", "weights", "bands", "resolution"}
        unknown = set(data) - known
        if unknown:
            raise FuzzyConfigError(f"fuzzy: unknown field(s) {sorted(unknown)}")
        base = cls()
        universes = dict((n, (lo, hi)) for n, lo, hi in base.universes)
        for name, bounds in (data.get("universes") or {}).items():
            if name not in universes:
                raise FuzzyConfigError(f"fuzzy.universes: unknown variable {name!r}")
            lo, hi = bounds
            universes[name] = (float(lo), float(hi))
        bps = {(v, lab): p for v, lab, p in base.breakpoints}
        for var, sets in (data.get("breakpoints") or {}).items():
            for lab, pts in sets.items():
                bps[(var, lab)] = tuple(float(p) for p in pts)
        weights = {v: dict(w) for v, w in base.weights}
        for variant, w in (data.get("weights") or {}).items():
            if variant not in weights:
                raise FuzzyConfigError(f"fuzzy.weights: unknown variant {variant!r}")
            weights[variant] = {k: float(x) for k, x in w.items()}
        bands_data = data.get("bands") or {}
        bad = set(bands_data) - {"poor_below", "good_from", "overshoot_above"}
        if bad:
            raise FuzzyConfigError(f"fuzzy.bands: unknown field(s) {sorted(bad)}")
        bands = Bands(**{k: Fraction(str(v)) for k, v in bands_data.items()})
        return cls(
            universes=tuple((n, *b) for n, b in universes.items()),
            breakpoints=tuple((v, lab, p) for (v, lab), p in bps.items()),
            weights=tuple((v, tuple(sorted(w.items()))) for v, w in weights.items()),
            bands=bands,
            resolution=int(data.get("resolution", base.resolution)),
        )

    def variable(self, name: str) -> LinguisticVariable:
        if name == "suitability":
            lo, hi, labels = 0.0, 1.0, OUTPUT_LABELS
        else:
            bounds = {n: (lo, hi) for n, lo, hi in self.universes}
            if name not in bounds:
                raise FuzzyConfigError(f"unknown variable {name!r}")
            (lo, hi), labels = bounds[name], INPUT_LABELS
        sets = list(template_sets(lo, hi, labels))
        overrides = {lab: p for v, lab, p in self.breakpoints if v == name}
        for i, lab in enumerate(labels):
            if lab in overrides:
                sets[i] = FuzzySet(lab, overrides[lab])
        unknown = set(overrides) - set(labels)
        if unknown:
            raise FuzzyConfigError(f"{name}: unknown label(s) {sorted(unknown)}")
        return LinguisticVariable(name, lo, hi, tuple(sets))


class SuitabilityModel:
    """The three inference systems (TypeA, TypeB, Crossover) built from one config."""

    def __init__(self, config: FuzzyConfig = FuzzyConfig()):
        self.config = config
        self.variables = {name: config.variable(name) for name, _, _ in config.universes}
        output = config.variable("suitability")
        weights = dict(config.weights)
        self.systems: dict[str, InferenceSystem] = {}
        for variant, names in VARIANT_INPUTS.items():
            rules = generate_rules(names, dict(weights[variant]), config.bands)
            self.systems[variant] = InferenceSystem(
                tuple(self.variables[n] for n in names), output, rules, config.resolution
            )

    @staticmethod
    def _vm_value(vm, name: str) -> float:
        return {"vm_mips": vm.mips, "vm_ram": vm.ram_mb, "vm_bandwidth": vm.bandwidth}[name]

    def crisp_inputs(self, job, vm, variant: str) -> list[float]:
        names = VARIANT_INPUTS[variant]
        return [job.length_mi] + [self._vm_value(vm, n) for n in names[1:]]

    def score(self, job, vm, variant: str) -> float:
        system = self.systems[variant]
        return defuzzify_centroid(infer(system, self.crisp_inputs(job, vm, variant)), system.samples)

    def matrix(self, jobs, vms, variant: str) -> np.ndarray:
        """Suitability of every (job, vm) pair, shape ``(len(jobs), len(vms))``."""
        system = self.systems[variant]
        names = VARIANT_INPUTS[variant]
        lengths = np.array([j.length_mi for j in jobs], dtype=float)
        job_deg = self.variables[names[0]].degrees(lengths)[:, None, :]
        degrees = [job_deg]
        for name in names[1:]:
            vals = np.array([self._vm_value(v, name) for v in vms], dtype=float)
            degrees.append(self.variables[name].degrees(vals)[None, :, :])
        return system.centroids_from_strengths(system.consequent_strengths(degrees))


@lru_cache(maxsize=8)
def get_model(config: FuzzyConfig = FuzzyConfig()) -> SuitabilityModel:
    return SuitabilityModel(config)


def suitability(job, vm, variant: str, model: SuitabilityModel | None = None) -> float:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    return (model or get_model()).score(job, vm, variant)
