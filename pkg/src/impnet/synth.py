"""Labelled synthetic 40x21 spectrogram patches with controlled frequency shifts.

Five pattern families stand in for the spectro-temporal feature categories
observed in trained first-layer filters: narrow low-band harmonics, broad
high-band harmonics, on/offset bursts, formant blobs and formant sweeps.
A sample is a class template translated by a whole number of frequency
bins and delayed by a random whole number of frames (``time_jitter``),
plus i.i.d. Gaussian noise.

Train and validation shifts are uniform on ``[-shift_train, shift_train]``;
test shifts are uniform on the annulus ``shift_train < |s| <= shift_test``,
so the test split only contains shift magnitudes never seen in training.

Dataset directory layout (written by :func:`save_dataset`)::

    spec.txt                     key = value synthesis parameters
    {train,val,test}.impf        feature archive, one 40x21x1 tensor per sample
    {train,val,test}.csv         utt_id,label,shift
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .tensor import DTYPE, GaussianSource, load_archive, save_archive

log = logging.getLogger(__name__)

N_FREQ = 40
N_TIME = 21
SPLITS = ("train", "val", "test")
KINDS = ("HarmonicNarrow", "HarmonicBroad", "OnOffset", "FormantGabor", "FormantSweep")


@dataclass(frozen=True)
class PatternClass:
    id: int
    kind: str
    band: float           # lowest harmonic / formant centre / burst low edge, in bins
    bandwidth: float      # gaussian width of spectral lines, in bins
    spacing: float = 0.0  # harmonic spacing, or burst height
    slope: float = 0.0    # sweep slope, bins per frame
    onset: int = 0        # burst onset frame
    duration: int = 0     # active frames (0 = whole patch); bursts start at onset

    def _active(self, t: np.ndarray) -> np.ndarray:
        if self.duration <= 0:
            return np.ones_like(t)
        start = self.onset if self.kind == "OnOffset" else N_TIME // 2 - self.duration // 2
        return ((t >= start) & (t < start + self.duration)).astype(DTYPE)

    def template(self, time_offset: int = 0) -> np.ndarray:
        """Noise-free 40x21x1 pattern; ``time_offset`` delays its temporal events."""
        f = np.arange(N_FREQ, dtype=DTYPE)[:, None]
        t = np.arange(N_TIME, dtype=DTYPE)[None, :] - time_offset
        centre = N_TIME // 2

        def line(c):
            return np.exp(-0.5 * ((f - c) / self.bandwidth) ** 2)

        if self.kind in ("HarmonicNarrow", "HarmonicBroad"):
            img = sum(line(self.band + h * self.spacing) for h in range(3)) * self._active(t)
        elif self.kind == "OnOffset":
            inside = ((f >= self.band) & (f < self.band + self.spacing)).astype(DTYPE)
            img = inside * self._active(t)
        elif self.kind == "FormantGabor":
            img = line(self.band) * np.exp(-0.5 * ((t - centre) / 2.0) ** 2)
        elif self.kind == "FormantSweep":
            img = line(self.band + self.slope * (t - centre)) * self._active(t)
        else:
            raise ConfigError(f"unknown pattern kind {self.kind!r}")
        img = np.clip(img, 0.0, 1.0)
        return img[:, :, None]


def default_classes() -> list[PatternClass]:
    # short events in separate bands, so both the spectral position and the
    # temporal shape carry class information
    return [
        PatternClass(0, "HarmonicNarrow", band=6, bandwidth=0.6, spacing=5, duration=7),
        PatternClass(1, "HarmonicBroad", band=21, bandwidth=1.5, spacing=6, duration=7),
        PatternClass(2, "OnOffset", band=10, bandwidth=1.0, spacing=20, onset=9, duration=3),
        PatternClass(3, "FormantGabor", band=29, bandwidth=2.0),
        PatternClass(4, "FormantSweep", band=14, bandwidth=1.0, slope=1.0, duration=9),
    ]


@dataclass
class SynthSpec:
    n_classes: int = 5
    shift_train: int = 2
    shift_test: int = 5
    noise_stddev: float = 0.1
    time_jitter: int = 6
    samples_per_class: int = 400
    val_per_class: int = 40
    test_per_class: int = 100
    seed: int = 0
    classes: list[PatternClass] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self.classes:
            if not 1 <= self.n_classes <= len(KINDS):
                raise ConfigError(f"n_classes must lie in 1..{len(KINDS)}")
            self.classes = default_classes()[:self.n_classes]
        self.n_classes = len(self.classes)
        if self.shift_train < 0:
            raise ConfigError("shift_train must be non-negative")
        if self.time_jitter < 0:
            raise ConfigError("time_jitter must be non-negative")
        if self.noise_stddev < 0:
            raise ConfigError("noise_stddev must be non-negative")

    def to_text(self) -> str:
        keys = [f.name for f in fields(self) if f.name != "classes"]
        return "".join(f"{k} = {getattr(self, k)!r}\n" for k in keys)


def parse_synth_spec(text: str) -> SynthSpec:
    types = {f.name: f.type for f in fields(SynthSpec) if f.name != "classes"}
    kw = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = (s.strip() for s in line.partition("="))
        if not sep or key not in types:
            raise ConfigError(f"line {lineno}: unknown synthesis key {key!r}")
        try:
            kw[key] = float(val) if types[key] == "float" else int(val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
    return SynthSpec(**kw)


@dataclass
class SynthSample:
    tensor: np.ndarray
    label: int
    applied_shift: int
    clipped: bool = False


def shift_frequency(x: np.ndarray, shift: int) -> np.ndarray:
    """Translate along frequency by ``shift`` bins (positive = upward), zero fill."""
    out = np.zeros_like(x)
    n = x.shape[0]
    if shift >= 0:
        out[shift:] = x[:n - shift] if shift < n else 0.0
    else:
        out[:n + shift] = x[-shift:]
    return out


def render(cls: PatternClass, shift: int, noise: GaussianSource | None = None,
           noise_stddev: float = 0.0, time_offset: int = 0) -> SynthSample:
    tmpl = cls.template(time_offset)
    moved = shift_frequency(tmpl, shift)
    clipped = not np.isclose(moved.sum(), tmpl.sum(), rtol=1e-9, atol=0.0)
    if clipped:
        log.debug("class %d shifted by %d loses %.3g of its mass", cls.id, shift,
                  1.0 - moved.sum() / tmpl.sum())
    if noise is not None and noise_stddev > 0:
        moved = moved + noise.normal(moved.size, 0.0, noise_stddev).reshape(moved.shape, order="F")
    return SynthSample(moved, cls.id, int(shift), clipped)


@dataclass
class Split:
    X: np.ndarray         # (n, 40, 21, 1)
    y: np.ndarray         # (n,)
    shifts: np.ndarray    # (n,)
    ids: list[str]

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, idx) -> "Split":
        idx = np.asarray(idx)
        return Split(self.X[idx], self.y[idx], self.shifts[idx], [self.ids[i] for i in idx])


def _draw_shift(gen: np.random.Generator, lo: int, hi: int) -> int:
    """Uniform integer with lo <= |s| <= hi (both signs when lo > 0)."""
    if lo == 0:
        return int(gen.integers(-hi, hi + 1))
    mag = int(gen.integers(lo, hi + 1))
    return mag if gen.random() < 0.5 else -mag


def _make_split(spec: SynthSpec, split_id: int, per_class: int, lo: int, hi: int,
                name: str) -> Split:
    samples, ids, n_clipped = [], [], 0
    for c, cls in enumerate(spec.classes):
        for j in range(per_class):
            i = c * per_class + j
            gen = np.random.Generator(np.random.PCG64(
                np.random.SeedSequence(spec.seed, spawn_key=(split_id, i, 0))))
            shift = _draw_shift(gen, lo, hi)
            offset = int(gen.integers(-spec.time_jitter, spec.time_jitter + 1))
            noise = GaussianSource(spec.seed, stream=(split_id, i, 1))
            s = render(cls, shift, noise, spec.noise_stddev, offset)
            n_clipped += s.clipped
            samples.append(s)
            ids.append(f"{name}-{i:06d}")
    if n_clipped:
        log.info("%s: %d of %d samples clipped at the frequency edges", name, n_clipped, len(samples))
    X = np.stack([s.tensor for s in samples]) if samples else np.zeros((0, N_FREQ, N_TIME, 1))
    return Split(X, np.array([s.label for s in samples], dtype=np.int64),
                 np.array([s.applied_shift for s in samples], dtype=np.int64), ids)


def make_dataset(spec: SynthSpec) -> dict[str, Split]:
    """Stratified train / val / test splits; every sample has its own RNG streams."""
    if spec.shift_test <= spec.shift_train:
        raise ConfigError(f"empty test annulus: shift_test={spec.shift_test} "
                          f"<= shift_train={spec.shift_train}")
    return {
        "train": _make_split(spec, 0, spec.samples_per_class, 0, spec.shift_train, "train"),
        "val": _make_split(spec, 1, spec.val_per_class, 0, spec.shift_train, "val"),
        "test": _make_split(spec, 2, spec.test_per_class, spec.shift_train + 1,
                            spec.shift_test, "test"),
    }


def save_split(directory, name: str, split: Split) -> None:
    d = Path(directory)
    save_archive(d / f"{name}.impf", zip(split.ids, split.X))
    with open(d / f"{name}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["utt_id", "label", "shift"])
        for uid, lab, sh in zip(split.ids, split.y, split.shifts):
            w.writerow([uid, int(lab), int(sh)])


def save_dataset(directory, spec: SynthSpec, data: dict[str, Split]) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "spec.txt").write_text(spec.to_text())
    for name, split in data.items():
        save_split(d, name, split)


def load_split(directory, name: str) -> Split:
    d = Path(directory)
    entries = load_archive(d / f"{name}.impf")
    try:
        with open(d / f"{name}.csv", newline="") as fh:
            rows = {r["utt_id"]: (int(r["label"]), int(r.get("shift") or 0))
                    for r in csv.DictReader(fh)}
    except (KeyError, ValueError) as exc:
        raise DataError(f"{d / (name + '.csv')}: malformed labels: {exc}") from exc
    ids = [k for k, _ in entries]
    missing = [k for k in ids if k not in rows]
    if missing:
        raise DataError(f"{name}: no label for {missing[0]} (and {len(missing) - 1} more)")
    shapes = {t.shape for _, t in entries}
    if len(shapes) > 1:
        raise DataError(f"{name}: mixed tensor shapes {sorted(shapes)}")
    X = np.stack([t for _, t in entries]) if entries else np.zeros((0, N_FREQ, N_TIME, 1))
    return Split(X, np.array([rows[k][0] for k in ids], dtype=np.int64),
                 np.array([rows[k][1] for k in ids], dtype=np.int64), ids)


def load_spec(directory) -> SynthSpec:
    return parse_synth_spec((Path(directory) / "spec.txt").read_text())


def has_split(directory, name: str) -> bool:
    return (Path(directory) / f"{name}.impf").exists()
