"""Multi-dimensional biophysical scorer.

Four metric families (composition, physicochemistry, complexity, function)
each produce named sub-scores in [0, 1]; the overall score is their weighted
mean. The individual formulas are reconstructions chosen to match each
family's stated intent; they are not published formulas. All constants live
in :class:`ScorerConfig` and default to shipped data files.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping, Union

import numpy as np

from .core import RESIDUES, Sequence, encode_residues, residues_to_str
from .errors import ConfigError, EmptySequence

METRICS = (
    "aa_distribution",
    "aa_diversity",
    "rare_aa",
    "hydropathy",
    "charge_balance",
    "stability_proxy",
    "global_entropy",
    "local_complexity",
    "repeat_penalty",
    "ss_balance",
    "motif",
)

Matcher = Union[str, "re.Pattern[str]", Callable[[str], bool]]

_LOG20 = math.log(20.0)


def load_table(path) -> np.ndarray:
    """Read a 20-row ``residue<TAB>value`` file into a vector in residue order."""
    values: dict[str, float] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t") if "\t" in line else line.split()
        if len(parts) != 2:
            raise ConfigError(f"{path}: expected 'residue<TAB>value', got {raw!r}")
        res, val = parts[0].strip(), float(parts[1])
        if res not in RESIDUES or len(res) != 1:
            raise ConfigError(f"{path}: unknown residue {res!r}")
        if res in values:
            raise ConfigError(f"{path}: duplicate residue {res!r}")
        values[res] = val
    missing = set(RESIDUES) - set(values)
    if missing:
        raise ConfigError(f"{path}: missing residues {''.join(sorted(missing))}")
    return np.array([values[r] for r in RESIDUES], dtype=float)


def _compile(m: Matcher) -> Callable[[str], bool]:
    if callable(m) and not isinstance(m, re.Pattern):
        return m
    pat = re.compile(m) if isinstance(m, str) else m
    return lambda s: pat.search(s) is not None


def _vec(x, name: str) -> np.ndarray:
    if isinstance(x, Mapping):
        try:
            x = [float(x[r]) for r in RESIDUES]
        except KeyError as exc:
            raise ConfigError(f"{name}: missing residue {exc.args[0]!r}") from None
    arr = np.asarray(x, dtype=float)
    if arr.shape != (20,) or not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} must be 20 finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScorerConfig:
    background_freqs: np.ndarray
    hydropathy_table: np.ndarray
    helix_propensity: np.ndarray
    sheet_propensity: np.ndarray
    charge_map: Mapping[str, float] = field(
        default_factory=lambda: {"K": 1.0, "R": 1.0, "D": -1.0, "E": -1.0, "H": 0.1}
    )
    gravy_window: tuple[float, float] = (-2.0, 1.0)
    rare_caps: Mapping[str, float] = field(default_factory=lambda: {"C": 0.04, "W": 0.03})
    complexity_window: int = 12
    charge_norm: float = 0.25
    motif_registry: Mapping[str, tuple] = field(default_factory=dict)
    weights: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("background_freqs", "hydropathy_table", "helix_propensity", "sheet_propensity"):
            object.__setattr__(self, name, _vec(getattr(self, name), name))
        bg = self.background_freqs
        if np.any(bg < 0) or abs(bg.sum() - 1.0) > 1e-9:
            raise ConfigError(f"background_freqs must be non-negative and sum to 1 (sum={bg.sum()!r})")
        lo, hi = (float(v) for v in self.gravy_window)
        if not lo < hi:
            raise ConfigError(f"gravy_window needs lo < hi, got {self.gravy_window!r}")
        object.__setattr__(self, "gravy_window", (lo, hi))
        if isinstance(self.complexity_window, bool) or not isinstance(self.complexity_window, int) \
                or self.complexity_window < 4:
            raise ConfigError("complexity_window must be an integer >= 4")
        if not self.charge_norm > 0:
            raise ConfigError("charge_norm must be positive")
        for r, cap in self.rare_caps.items():
            if r not in RESIDUES or not 0 < cap <= 1:
                raise ConfigError(f"rare cap {r}={cap!r} invalid")
        for r in self.charge_map:
            if r not in RESIDUES:
                raise ConfigError(f"charge_map: unknown residue {r!r}")
        unknown = set(self.weights) - set(METRICS)
        if unknown:
            raise ConfigError(f"weights for unknown metrics: {sorted(unknown)}")
        w = np.array([float(self.weights.get(m, 1.0)) for m in METRICS])
        if np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
            raise ConfigError("weights must be non-negative, finite and not all zero")
        w.setflags(write=False)
        object.__setattr__(self, "_w", w)
        charge = np.array([float(self.charge_map.get(r, 0.0)) for r in RESIDUES])
        charge.setflags(write=False)
        object.__setattr__(self, "_charge", charge)
        object.__setattr__(self, "_charged", np.abs(charge) >= 0.5)
        object.__setattr__(self, "_rare", tuple((RESIDUES.index(r), float(c)) for r, c in self.rare_caps.items()))
        motifs = {tag: tuple(_compile(m) for m in pats) for tag, pats in self.motif_registry.items()}
        object.__setattr__(self, "_motifs", motifs)
        xlogx = np.zeros(self.complexity_window + 1)
        k = np.arange(1, self.complexity_window + 1)
        xlogx[1:] = k * np.log(k)
        object.__setattr__(self, "_xlogx", xlogx)

    @property
    def weight_vector(self) -> np.ndarray:
        return self._w

    @classmethod
    def from_dict(cls, d: Mapping, base_dir=None) -> "ScorerConfig":
        d = dict(d)
        for key in ("background_freqs", "hydropathy_table", "helix_propensity", "sheet_propensity"):
            if isinstance(d.get(key), str):
                p = Path(d[key])
                if not p.is_absolute() and base_dir is not None:
                    p = Path(base_dir) / p
                d[key] = load_table(p)
        if "motif_registry" in d:
            d["motif_registry"] = {t: tuple(p) for t, p in d["motif_registry"].items()}
        if "gravy_window" in d:
            d["gravy_window"] = tuple(d["gravy_window"])
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown scorer config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "ScorerConfig":
        """Load a JSON config. Table entries may be inline or paths relative to the file."""
        path = Path(path)
        base = json.loads(_default_json())
        base.update(json.loads(path.read_text()))
        data_dir = resources.files("epgf") / "data"
        for key in ("background_freqs", "hydropathy_table", "helix_propensity", "sheet_propensity"):
            v = base[key]
            if isinstance(v, str) and not (path.parent / v).exists():
                base[key] = str(data_dir / v)
        return cls.from_dict(base, base_dir=path.parent)

    @classmethod
    def default(cls) -> "ScorerConfig":
        return _DEFAULT()

    def replace(self, **changes) -> "ScorerConfig":
        kw = {name: getattr(self, name) for name in self.__dataclass_fields__}
        kw.update(changes)
        return type(self)(**kw)


def _default_json() -> str:
    return (resources.files("epgf") / "data" / "default_scorer.json").read_text()


def _load_default() -> ScorerConfig:
    data_dir = resources.files("epgf") / "data"
    return ScorerConfig.from_dict(json.loads(_default_json()), base_dir=str(data_dir))


_cache: list[ScorerConfig] = []


def _DEFAULT() -> ScorerConfig:
    if not _cache:
        _cache.append(_load_default())
    return _cache[0]


@dataclass(frozen=True)
class MetricReport:
    sub_scores: dict[str, float]
    overall: float
    n_metrics: int

    def __post_init__(self):
        for k, v in self.sub_scores.items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"sub-score {k}={v!r} outside [0, 1]")
        if not 0.0 <= self.overall <= 1.0:
            raise ValueError(f"overall {self.overall!r} outside [0, 1]")

    def to_dict(self) -> dict:
        return {"overall": self.overall, "n_metrics": self.n_metrics, "sub_scores": dict(self.sub_scores)}


def _clamp(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else float(x)


def _residue_ids(seq) -> np.ndarray:
    if isinstance(seq, Sequence):
        ids = seq.residue_ids
    elif isinstance(seq, str):
        ids = encode_residues(seq)
    else:
        ids = np.asarray(seq, dtype=np.int64)
        ids = ids[(ids >= 0) & (ids < 20)]
    if ids.size == 0:
        raise EmptySequence()
    return ids


def _runs(ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Run-length encode: (value of each run, length of each run)."""
    change = np.flatnonzero(ids[1:] != ids[:-1]) + 1
    starts = np.concatenate(([0], change))
    lengths = np.diff(np.concatenate((starts, [ids.size])))
    return ids[starts], lengths


def _entropy_from_counts(counts: np.ndarray, n: int) -> float:
    nz = counts[counts > 0]
    if nz.size <= 1:
        return 0.0
    return max(0.0, math.log(n) - float(np.dot(nz, np.log(nz))) / n)


def composition_metrics(seq, cfg: ScorerConfig | None = None) -> dict[str, float]:
    """aa_distribution, aa_diversity and rare_aa.

    ``aa_distribution`` is one minus the total-variation distance between the
    residue frequencies and the background; ``rare_aa`` falls linearly from 1
    at a residue's cap to 0 at three times the cap (worst rare residue wins).
    """
    cfg = cfg or ScorerConfig.default()
    ids = _residue_ids(seq)
    return _composition(ids, np.bincount(ids, minlength=20), cfg)


def _composition(ids, counts, cfg) -> dict[str, float]:
    n = ids.size
    freq = counts / n
    dist = 1.0 - 0.5 * float(np.abs(freq - cfg.background_freqs).sum())
    diversity = int(np.count_nonzero(counts)) / min(n, 20)
    rare = 1.0
    for idx, cap in cfg._rare:
        f = freq[idx]
        if f > cap:
            rare = min(rare, 1.0 - (f - cap) / (2.0 * cap))
    return {"aa_distribution": _clamp(dist), "aa_diversity": _clamp(diversity), "rare_aa": _clamp(rare)}


def gravy(seq, cfg: ScorerConfig | None = None) -> float:
    cfg = cfg or ScorerConfig.default()
    return float(cfg.hydropathy_table[_residue_ids(seq)].mean())


def net_charge(seq, cfg: ScorerConfig | None = None) -> float:
    cfg = cfg or ScorerConfig.default()
    return float(cfg._charge[_residue_ids(seq)].sum())


def physchem_metrics(seq, cfg: ScorerConfig | None = None) -> dict[str, float]:
    cfg = cfg or ScorerConfig.default()
    ids = _residue_ids(seq)
    return _physchem(ids, _runs(ids), cfg)


def _physchem(ids, runs, cfg) -> dict[str, float]:
    n = ids.size
    g = float(cfg.hydropathy_table[ids].mean())
    lo, hi = cfg.gravy_window
    outside = max(lo - g, g - hi, 0.0)
    hydro = 1.0 - outside / 2.0
    net = float(cfg._charge[ids].sum())
    charge = 1.0 - min(1.0, abs(net) / n / cfg.charge_norm)
    vals, lens = runs
    bad = cfg._charged[vals] & (lens >= 4)
    stability = 1.0 - min(1.0, int(lens[bad].sum()) / n)
    return {"hydropathy": _clamp(hydro), "charge_balance": _clamp(charge), "stability_proxy": _clamp(stability)}


def complexity_metrics(seq, cfg: ScorerConfig | None = None) -> dict[str, float]:
    cfg = cfg or ScorerConfig.default()
    ids = _residue_ids(seq)
    return _complexity(ids, np.bincount(ids, minlength=20), _runs(ids), cfg)


def _complexity(ids, counts, runs, cfg) -> dict[str, float]:
    n = ids.size
    if np.all(counts == counts[0]):
        glob = 1.0  # uniform over all 20 residues
    else:
        glob = _entropy_from_counts(counts, n) / _LOG20
    w = cfg.complexity_window
    if n < w:
        local = glob
    else:
        onehot = np.zeros((n + 1, 20), dtype=np.int32)
        onehot[np.arange(1, n + 1), ids] = 1
        cum = np.cumsum(onehot, axis=0)
        win = cum[w:] - cum[:-w]
        h = math.log(w) - cfg._xlogx[win].sum(axis=1) / w
        local = float(np.maximum(h, 0.0).min()) / math.log(min(w, 20))
    longest = int(runs[1].max())
    repeat = 1.0 - min(1.0, (longest - 1) / 9.0)
    return {"global_entropy": _clamp(glob), "local_complexity": _clamp(local), "repeat_penalty": _clamp(repeat)}


def functional_metrics(seq, tag: str | None = None, cfg: ScorerConfig | None = None) -> dict[str, float]:
    """ss_balance and motif.

    ``ss_balance`` averages how close the mean helix and mean sheet
    propensities sit to the neutral value 1.0. ``motif`` is the fraction of
    the tag's registered patterns found in the sequence, or 1.0 when there is
    no tag or nothing registered for it.
    """
    cfg = cfg or ScorerConfig.default()
    return _functional(_residue_ids(seq), tag, cfg)


def _functional(ids, tag, cfg) -> dict[str, float]:
    helix = _clamp(1.0 - abs(float(cfg.helix_propensity[ids].mean()) - 1.0))
    sheet = _clamp(1.0 - abs(float(cfg.sheet_propensity[ids].mean()) - 1.0))
    matchers = cfg._motifs.get(tag) if tag is not None else None
    if not matchers:
        motif = 1.0
    else:
        text = residues_to_str(ids.tolist())
        motif = sum(1 for m in matchers if m(text)) / len(matchers)
    return {"ss_balance": _clamp((helix + sheet) / 2.0), "motif": _clamp(motif)}


def aggregate(sub_scores: Mapping[str, float], cfg: ScorerConfig | None = None) -> float:
    """Weighted mean of sub-scores: sum(w_i * m_i) / sum(w_i)."""
    cfg = cfg or ScorerConfig.default()
    w = dict(zip(METRICS, cfg.weight_vector))
    num = math.fsum(w.get(k, 1.0) * v for k, v in sub_scores.items())
    den = math.fsum(w.get(k, 1.0) for k in sub_scores)
    return _clamp(num / den)


def bioscore(seq, tag: str | None = None, cfg: ScorerConfig | None = None) -> MetricReport:
    cfg = cfg or ScorerConfig.default()
    ids = _residue_ids(seq)
    counts = np.bincount(ids, minlength=20)
    runs = _runs(ids)
    subs: dict[str, float] = {}
    subs.update(_composition(ids, counts, cfg))
    subs.update(_physchem(ids, runs, cfg))
    subs.update(_complexity(ids, counts, runs, cfg))
    subs.update(_functional(ids, tag, cfg))
    return MetricReport(sub_scores=subs, overall=aggregate(subs, cfg), n_metrics=len(subs))


def score_many(seqs: Iterable, tag: str | None = None, cfg: ScorerConfig | None = None) -> list[MetricReport]:
    cfg = cfg or ScorerConfig.default()
    return [bioscore(s, tag, cfg) for s in seqs]
