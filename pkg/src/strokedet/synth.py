"""Synthetic paddle-force runs with construction-known onset/ending events.

Each athlete gets a fixed style (stroke rate, rise fraction, duty cycle, base
amplitude); each run sums one asymmetric raised-cosine pulse per stroke period
and adds baseline noise. The ground-truth onset (ending) of a stroke is the
first (last) sample where that pulse's own values exceed 5% of its amplitude:
exactly known to the generator, but not recoverable from the mixed noisy
signal by a simple analytic rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .labels import ENDING, ONSET, EventLabel
from .runs import BOAT_TYPES, SAMPLE_RATE_HZ, RawRun

GROUND_TRUTH_LEVEL = 0.05

DUTY_RANGE = (0.45, 0.7)
AMPLITUDE_RANGE = (0.8, 1.2)


@dataclass
class SynthConfig:
    n_athletes: int = 7
    runs_per_athlete: int = 2
    run_duration: float = 30.0  # seconds
    stroke_rate_range: tuple = (40.0, 120.0)  # strokes/min
    pulse_asymmetry_range: tuple = (0.2, 0.5)  # rise fraction of pulse duration
    amplitude_jitter: float = 0.1  # relative sigma per stroke
    baseline_noise: float = 0.02  # absolute sigma
    dropout_prob: float = 0.002  # per-sample invalidation probability
    seed: int = 0
    sample_rate: int = SAMPLE_RATE_HZ

    def __post_init__(self):
        lo, hi = self.stroke_rate_range
        if not 0 < lo <= hi:
            raise ConfigError(f"invalid stroke rate range {self.stroke_rate_range}")
        lo, hi = self.pulse_asymmetry_range
        if not 0 < lo <= hi < 1:
            raise ConfigError(f"invalid asymmetry range {self.pulse_asymmetry_range}")
        if not 0.0 <= self.dropout_prob <= 1.0:
            raise ConfigError(f"dropout_prob must be in [0, 1], got {self.dropout_prob}")
        if self.amplitude_jitter < 0 or self.baseline_noise < 0:
            raise ConfigError("jitter and noise sigmas must be >= 0")
        if self.n_athletes < 1 or self.runs_per_athlete < 1 or self.run_duration <= 0:
            raise ConfigError("athlete/run counts and duration must be positive")


@dataclass(frozen=True)
class AthleteStyle:
    athlete_id: str
    stroke_rate: float
    rise_fraction: float
    duty: float
    amplitude: float
    boat_type: str


@dataclass
class SynthRun:
    run: RawRun
    events: list  # run-relative EventLabels, strictly alternating onset/ending
    style: AthleteStyle


def draw_style(athlete_id: str, cfg: SynthConfig, rng: np.random.Generator) -> AthleteStyle:
    return AthleteStyle(
        athlete_id=athlete_id,
        stroke_rate=float(rng.uniform(*cfg.stroke_rate_range)),
        rise_fraction=float(rng.uniform(*cfg.pulse_asymmetry_range)),
        duty=float(rng.uniform(*DUTY_RANGE)),
        amplitude=float(rng.uniform(*AMPLITUDE_RANGE)),
        boat_type=str(rng.choice(BOAT_TYPES)),
    )


def _pulse_shape(n_rise: int, n_fall: int) -> np.ndarray:
    """Raised cosine rising over n_rise samples and decaying over n_fall."""
    rise = 0.5 * (1.0 - np.cos(np.pi * np.arange(n_rise + 1) / n_rise))
    fall = 0.5 * (1.0 + np.cos(np.pi * np.arange(1, n_fall + 1) / n_fall))
    return np.concatenate([rise, fall])


def generate_run(cfg: SynthConfig, style: AthleteStyle, rng: np.random.Generator,
                 run_id: str) -> SynthRun:
    n = int(round(cfg.run_duration * cfg.sample_rate))
    period = cfg.sample_rate * 60.0 / style.stroke_rate
    duration = max(4, int(round(style.duty * period)))
    n_rise = max(1, int(round(style.rise_fraction * duration)))
    n_fall = max(1, duration - n_rise)
    shape = _pulse_shape(n_rise, n_fall)

    signal = np.zeros(n)
    events = []
    stroke = 0
    while True:
        start = int(round(stroke * period))
        if start + shape.size > n:
            break
        amplitude = style.amplitude * max(0.1, 1.0 + cfg.amplitude_jitter * rng.standard_normal())
        pulse = amplitude * shape
        signal[start:start + shape.size] += pulse
        above = np.flatnonzero(pulse > GROUND_TRUTH_LEVEL * amplitude)
        events.append(EventLabel(t=start + int(above[0]), kind=ONSET))
        events.append(EventLabel(t=start + int(above[-1]), kind=ENDING))
        stroke += 1

    if cfg.baseline_noise > 0:
        signal = signal + cfg.baseline_noise * rng.standard_normal(n)

    for prev, nxt in zip(events, events[1:]):
        if nxt.t <= prev.t:
            raise ConfigError(
                f"style {style.athlete_id} produced non-alternating events; "
                "stroke rate and duty are inconsistent"
            )
    run = RawRun(
        run_id=run_id,
        athlete_id=style.athlete_id,
        boat_type=style.boat_type,
        force=signal,
        valid=np.ones(n, dtype=bool),
        sample_rate=cfg.sample_rate,
    )
    return SynthRun(run=run, events=events, style=style)


def inject_dropouts(run: RawRun, dropout_prob: float, rng: np.random.Generator) -> RawRun:
    """Invalidate samples independently; always leaves at least one valid sample."""
    if not 0.0 <= dropout_prob <= 1.0:
        raise ConfigError(f"dropout_prob must be in [0, 1], got {dropout_prob}")
    if dropout_prob == 0.0:
        return run
    drop = rng.random(len(run)) < dropout_prob
    if drop.all():
        drop[len(run) // 2] = False
    return RawRun(
        run_id=run.run_id,
        athlete_id=run.athlete_id,
        boat_type=run.boat_type,
        force=run.force,
        valid=run.valid & ~drop,
        sample_rate=run.sample_rate,
    )


def generate_dataset(cfg: SynthConfig) -> list:
    """n_athletes x runs_per_athlete runs; a pure function of the config."""
    root = np.random.SeedSequence(cfg.seed)
    athlete_seqs = root.spawn(cfg.n_athletes)
    dataset = []
    for i, athlete_seq in enumerate(athlete_seqs):
        children = athlete_seq.spawn(cfg.runs_per_athlete + 1)
        style = draw_style(f"a{i:02d}", cfg, np.random.default_rng(children[0]))
        for j in range(cfg.runs_per_athlete):
            rng = np.random.default_rng(children[j + 1])
            synth_run = generate_run(cfg, style, rng, run_id=f"{i:02d}x{j:02d}")
            if cfg.dropout_prob > 0:
                synth_run.run = inject_dropouts(synth_run.run, cfg.dropout_prob, rng)
            dataset.append(synth_run)
    return dataset
