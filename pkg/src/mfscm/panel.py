"""Data model, ingestion, and validation for mixed-frequency donor panels.

A panel holds one treated unit observed at the baseline frequency plus a
donor pool whose units are observed at the same, a lower, or a higher
frequency. Time is indexed by integer baseline periods t = 1..T; a
higher-frequency unit carries m observations per period addressed by the
within-period lag k = 1..m (k = 1 is the latest observation of the
period), and a lower-frequency unit is observed once per cycle of
m_tilde periods, either as a within-cycle aggregate or as a point sample
at a declared offset.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, PanelParseError, PanelValidationError

try:  # stdlib on 3.11+
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - environment dependent
    import tomli as _toml

AGGREGATE = "aggregate"
POINT_SAMPLE = "point_sample"


@dataclass(frozen=True)
class Same:
    """Outcome observed once per baseline period."""


@dataclass(frozen=True)
class Lower:
    """Outcome observed once per cycle of ``m_tilde`` baseline periods."""

    m_tilde: int
    mode: str = AGGREGATE
    sample_point: int | None = None

    def __post_init__(self):
        if self.m_tilde < 2:
            raise ConfigError(f"lower-frequency ratio m_tilde must be >= 2, got {self.m_tilde}")
        if self.mode not in (AGGREGATE, POINT_SAMPLE):
            raise ConfigError(f"unknown low-frequency mode {self.mode!r}")
        if self.mode == POINT_SAMPLE:
            if self.sample_point is None or not 1 <= self.sample_point <= self.m_tilde:
                raise ConfigError(
                    f"point_sample mode needs sample_point in 1..{self.m_tilde}, got {self.sample_point}"
                )

    def observation_times(self, T: int) -> np.ndarray:
        """Baseline periods at which this unit is observed, for horizon T."""
        if self.mode == AGGREGATE:
            return np.arange(self.m_tilde, T + 1, self.m_tilde)
        return np.arange(self.sample_point, T + 1, self.m_tilde)


@dataclass(frozen=True)
class Higher:
    """Outcome observed ``m`` times per baseline period."""

    m: int

    def __post_init__(self):
        if self.m < 2:
            raise ConfigError(f"higher-frequency ratio m must be >= 2, got {self.m}")


FrequencyClass = Same | Lower | Higher


def _freeze(arr) -> np.ndarray:
    out = np.asarray(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class UnitSeries:
    """One unit's outcomes and optional baseline-frequency covariates.

    ``outcomes`` is shaped by frequency class: (T,) for Same, (n_obs,)
    with ``obs_times`` for Lower, and (T, m) for Higher where column
    k-1 holds the observation at t - (k-1)/m.
    """

    unit_id: str
    freq: FrequencyClass
    outcomes: np.ndarray
    covariates: np.ndarray | None = None
    obs_times: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "outcomes", _freeze(self.outcomes))
        if self.covariates is not None:
            object.__setattr__(self, "covariates", _freeze(self.covariates))
        if self.obs_times is not None:
            times = np.asarray(self.obs_times, dtype=int)
            times.setflags(write=False)
            object.__setattr__(self, "obs_times", times)

    @property
    def n_periods(self) -> int | None:
        """Baseline horizon implied by the outcomes, when determined."""
        if isinstance(self.freq, Same):
            return int(self.outcomes.shape[0])
        if isinstance(self.freq, Higher):
            return int(self.outcomes.shape[0])
        return None


@dataclass(frozen=True)
class MixedPanel:
    """Treated unit, donor pool, pre/post split, and shared covariate count."""

    treated: UnitSeries
    donors: tuple[UnitSeries, ...]
    T0: int
    T1: int
    Q: int

    def __post_init__(self):
        object.__setattr__(self, "donors", tuple(self.donors))

    @property
    def T(self) -> int:
        return self.T0 + self.T1

    @property
    def J(self) -> int:
        return len(self.donors)

    @property
    def donor_ids(self) -> tuple[str, ...]:
        return tuple(d.unit_id for d in self.donors)

    def groups(self) -> tuple[list[int], list[int], list[int]]:
        """Donor indices partitioned by frequency class (same, lower, higher)."""
        same, lower, higher = [], [], []
        for i, d in enumerate(self.donors):
            if isinstance(d.freq, Same):
                same.append(i)
            elif isinstance(d.freq, Lower):
                lower.append(i)
            else:
                higher.append(i)
        return same, lower, higher

    def donor(self, unit_id: str) -> UnitSeries:
        for d in self.donors:
            if d.unit_id == unit_id:
                return d
        raise KeyError(unit_id)


def validate_panel(panel: MixedPanel) -> list[str]:
    """Check every panel invariant; returns one diagnostic per violation."""
    diags: list[str] = []
    T = panel.T
    if panel.T0 < 1:
        diags.append(f"T0 must be positive, got {panel.T0}")
    if panel.T1 < 1:
        diags.append("post-treatment period empty: T0 must be strictly less than the horizon")
    if not isinstance(panel.treated.freq, Same):
        diags.append("treated must be baseline frequency")
    if not panel.donors:
        diags.append("donor pool is empty")

    seen: set[str] = set()
    for u in (panel.treated, *panel.donors):
        if u.unit_id in seen:
            diags.append(f"duplicate unit id {u.unit_id!r}")
        seen.add(u.unit_id)

    for u in (panel.treated, *panel.donors):
        diags.extend(_unit_diagnostics(u, T, panel.Q))

    _, lower, _ = panel.groups()
    if panel.Q == 0 and lower:
        names = ", ".join(panel.donors[i].unit_id for i in lower)
        diags.append(
            f"low-frequency donors ({names}) need covariates for reconstruction but Q = 0"
        )
    return diags


def _unit_diagnostics(u: UnitSeries, T: int, Q: int) -> list[str]:
    diags: list[str] = []
    freq = u.freq
    if isinstance(freq, Same):
        if u.outcomes.ndim != 1 or u.outcomes.shape[0] != T:
            diags.append(f"unit {u.unit_id!r}: expected {T} outcomes, got shape {u.outcomes.shape}")
        else:
            bad = np.nonzero(~np.isfinite(u.outcomes))[0]
            for t in bad:
                diags.append(f"unit {u.unit_id!r}: missing value at t={t + 1}")
    elif isinstance(freq, Higher):
        if u.outcomes.ndim != 2 or u.outcomes.shape != (T, freq.m):
            diags.append(
                f"unit {u.unit_id!r}: expected outcome shape ({T}, {freq.m}), got {u.outcomes.shape}"
            )
        else:
            bad_t, bad_k = np.nonzero(~np.isfinite(u.outcomes))
            for t, k in zip(bad_t, bad_k):
                diags.append(f"unit {u.unit_id!r}: missing value at t={t + 1}, k={k + 1}")
    else:
        expected = freq.observation_times(T)
        if u.obs_times is None or u.outcomes.ndim != 1:
            diags.append(f"unit {u.unit_id!r}: low-frequency unit needs observation times")
        elif not np.array_equal(u.obs_times, expected):
            missing = sorted(set(expected.tolist()) - set(np.asarray(u.obs_times).tolist()))
            extra = sorted(set(np.asarray(u.obs_times).tolist()) - set(expected.tolist()))
            parts = []
            if missing:
                parts.append(f"missing t={missing}")
            if extra:
                parts.append(f"unexpected t={extra}")
            diags.append(f"unit {u.unit_id!r}: observation times inconsistent ({'; '.join(parts)})")
        elif u.outcomes.shape[0] != expected.shape[0]:
            diags.append(
                f"unit {u.unit_id!r}: {u.outcomes.shape[0]} outcomes for {expected.shape[0]} observation times"
            )
        else:
            for i in np.nonzero(~np.isfinite(u.outcomes))[0]:
                diags.append(f"unit {u.unit_id!r}: missing value at t={int(u.obs_times[i])}")
    if Q > 0:
        if u.covariates is None:
            diags.append(f"unit {u.unit_id!r}: covariates required (Q={Q}) but absent")
        elif u.covariates.shape != (Q, T):
            diags.append(
                f"unit {u.unit_id!r}: expected covariate shape ({Q}, {T}), got {u.covariates.shape}"
            )
        elif not np.all(np.isfinite(u.covariates)):
            diags.append(f"unit {u.unit_id!r}: missing covariate values")
    elif u.covariates is not None and u.covariates.size:
        diags.append(f"unit {u.unit_id!r}: covariates present but Q = 0")
    return diags


# ---------------------------------------------------------------------------
# manifest + CSV ingestion
# ---------------------------------------------------------------------------

_FREQ_TAGS = {"same", "lower", "higher"}


def read_manifest(path: str | Path) -> dict:
    """Parse a panel manifest (TOML) and check required keys."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = _toml.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"manifest not found: {path}")
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"manifest {path}: {exc}")
    for key in ("T0", "Q", "treated", "donors"):
        if key not in doc:
            raise ConfigError(f"manifest {path}: missing required key {key!r}")
    if not isinstance(doc["T0"], int) or doc["T0"] < 1:
        raise ConfigError(f"manifest {path}: T0 must be a positive integer")
    if not isinstance(doc["Q"], int) or doc["Q"] < 0:
        raise ConfigError(f"manifest {path}: Q must be a nonnegative integer")
    if not doc["donors"]:
        raise ConfigError(f"manifest {path}: donor list is empty")
    return doc


def _freq_from_entry(entry: dict, where: str) -> FrequencyClass:
    tag = entry.get("freq", "same")
    if tag not in _FREQ_TAGS:
        raise ConfigError(f"{where}: unknown frequency tag {tag!r} (expected same/lower/higher)")
    if tag == "same":
        return Same()
    if tag == "higher":
        if "m" not in entry:
            raise ConfigError(f"{where}: higher-frequency unit needs key 'm'")
        return Higher(m=int(entry["m"]))
    if "m_tilde" not in entry:
        raise ConfigError(f"{where}: lower-frequency unit needs key 'm_tilde'")
    mode = entry.get("mode", AGGREGATE)
    sp = entry.get("sample_point")
    return Lower(m_tilde=int(entry["m_tilde"]), mode=mode, sample_point=sp)


def _read_outcome_csv(path: Path) -> list[tuple[int, int | None, float]]:
    rows: list[tuple[int, int | None, float]] = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"outcome file not found: {path}")
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "k", "value"]:
            raise PanelParseError(path, 1, f"expected header 't,k,value', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise PanelParseError(path, lineno, f"expected 3 fields, got {len(row)}")
            try:
                t = int(row[0])
            except ValueError:
                raise PanelParseError(path, lineno, f"bad period index {row[0]!r}")
            k: int | None = None
            if row[1].strip():
                try:
                    k = int(row[1])
                except ValueError:
                    raise PanelParseError(path, lineno, f"bad lag index {row[1]!r}")
            try:
                v = float(row[2])
            except ValueError:
                raise PanelParseError(path, lineno, f"bad value {row[2]!r}")
            rows.append((t, k, v))
    if not rows:
        raise PanelParseError(path, 2, "no outcome rows")
    return rows


def _read_covariate_csv(path: Path, Q: int, T: int, unit_id: str) -> np.ndarray:
    X = np.full((Q, T), np.nan)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"covariate file not found: {path}")
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "q", "value"]:
            raise PanelParseError(path, 1, f"expected header 't,q,value', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise PanelParseError(path, lineno, f"expected 3 fields, got {len(row)}")
            try:
                t, q, v = int(row[0]), int(row[1]), float(row[2])
            except ValueError:
                raise PanelParseError(path, lineno, f"bad covariate row {row!r}")
            if not 1 <= q <= Q:
                raise PanelParseError(path, lineno, f"covariate index q={q} outside 1..{Q}")
            if not 1 <= t <= T:
                raise PanelParseError(path, lineno, f"period t={t} outside 1..{T} for unit {unit_id!r}")
            X[q - 1, t - 1] = v
    return X


def _build_unit(entry: dict, base: Path, Q: int, T: int, diags: list[str]) -> UnitSeries:
    unit_id = str(entry.get("id", ""))
    if not unit_id:
        raise ConfigError("unit entry missing 'id'")
    where = f"unit {unit_id!r}"
    freq = _freq_from_entry(entry, where)
    if "outcomes" not in entry:
        raise ConfigError(f"{where}: missing 'outcomes' file")
    rows = _read_outcome_csv(base / entry["outcomes"])

    covariates = None
    if Q > 0 and "covariates" in entry:
        covariates = _read_covariate_csv(base / entry["covariates"], Q, T, unit_id)

    if isinstance(freq, Higher):
        out = np.full((T, freq.m), np.nan)
        for t, k, v in rows:
            if k is None:
                diags.append(f"{where}: higher-frequency row at t={t} lacks a lag index k")
                continue
            if not (1 <= t <= T and 1 <= k <= freq.m):
                diags.append(f"{where}: observation (t={t}, k={k}) outside the declared grid")
                continue
            out[t - 1, k - 1] = v
        miss_t, miss_k = np.nonzero(~np.isfinite(out))
        for t, k in zip(miss_t, miss_k):
            diags.append(f"{where}: missing observation at t={t + 1}, k={k + 1}")
        return UnitSeries(unit_id, freq, out, covariates)

    times = np.array([t for t, _, _ in rows], dtype=int)
    values = np.array([v for _, _, v in rows], dtype=float)
    order = np.argsort(times, kind="stable")
    times, values = times[order], values[order]
    if isinstance(freq, Same):
        expected = np.arange(1, T + 1)
    else:
        expected = freq.observation_times(T)
    if times.shape[0] != expected.shape[0] or not np.array_equal(times, expected):
        missing = sorted(set(expected.tolist()) - set(times.tolist()))
        extra = sorted(set(times.tolist()) - set(expected.tolist()))
        parts = []
        if missing:
            parts.append(f"missing t={missing}")
        if extra:
            parts.append(f"unexpected t={extra}")
        diags.append(f"{where}: observation times inconsistent with horizon T={T} ({'; '.join(parts)})")
        # pad so downstream shapes stay coherent; validation already failed
        full = np.full(expected.shape[0], np.nan)
        pos = {int(t): i for i, t in enumerate(expected)}
        for t, v in zip(times, values):
            if int(t) in pos:
                full[pos[int(t)]] = v
        values, times = full, expected
    if isinstance(freq, Same):
        return UnitSeries(unit_id, freq, values, covariates)
    return UnitSeries(unit_id, freq, values, covariates, obs_times=times)


def load_panel(manifest: str | Path) -> MixedPanel:
    """Load and validate a mixed panel from a manifest and its CSV files.

    The horizon T is taken from the treated unit's outcome file; every
    donor must be consistent with it after frequency conversion.
    """
    manifest = Path(manifest)
    doc = read_manifest(manifest)
    base = manifest.parent
    T0, Q = doc["T0"], doc["Q"]

    treated_rows = _read_outcome_csv(base / _require(doc["treated"], "outcomes", "treated"))
    T = max(t for t, _, _ in treated_rows)

    diags: list[str] = []
    treated = _build_unit(doc["treated"], base, Q, T, diags)
    if not isinstance(treated.freq, Same):
        diags.append("treated must be baseline frequency")

    donors = tuple(_build_unit(entry, base, Q, T, diags) for entry in doc["donors"])
    panel = MixedPanel(treated=treated, donors=donors, T0=T0, T1=T - T0, Q=Q)
    diags.extend(validate_panel(panel))
    if diags:
        # stable de-duplication: load-time and invariant checks can overlap
        uniq = list(dict.fromkeys(diags))
        raise PanelValidationError(uniq)
    return panel


def _require(entry: dict, key: str, where: str):
    if key not in entry:
        raise ConfigError(f"{where}: missing {key!r}")
    return entry[key]


# ---------------------------------------------------------------------------
# writing (round-trips bit-exactly through load_panel)
# ---------------------------------------------------------------------------


def write_panel(panel: MixedPanel, out_dir: str | Path, manifest_name: str = "panel.toml") -> Path:
    """Write a panel as per-unit CSV files plus a manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for unit in (panel.treated, *panel.donors):
        entries.append(_write_unit(unit, out, panel.Q))
    lines = [f"T0 = {panel.T0}", f"Q = {panel.Q}", ""]
    lines += ["[treated]"] + _entry_lines(entries[0]) + [""]
    for e in entries[1:]:
        lines += ["[[donors]]"] + _entry_lines(e) + [""]
    manifest = out / manifest_name
    manifest.write_text("\n".join(lines), encoding="utf-8")
    return manifest


def _entry_lines(entry: dict) -> list[str]:
    lines = []
    for key, val in entry.items():
        if isinstance(val, str):
            lines.append(f"{key} = {json.dumps(val)}")
        else:
            lines.append(f"{key} = {val}")
    return lines


def _write_unit(unit: UnitSeries, out: Path, Q: int) -> dict:
    safe = "".join(c if c.isalnum() or c in "-_" else "_" for c in unit.unit_id)
    ofile = f"{safe}.csv"
    entry: dict = {"id": unit.unit_id, "outcomes": ofile}
    freq = unit.freq
    if isinstance(freq, Same):
        entry["freq"] = "same"
        rows = [(t + 1, "", unit.outcomes[t]) for t in range(unit.outcomes.shape[0])]
    elif isinstance(freq, Higher):
        entry["freq"] = "higher"
        entry["m"] = freq.m
        rows = [
            (t + 1, k + 1, unit.outcomes[t, k])
            for t in range(unit.outcomes.shape[0])
            for k in range(freq.m)
        ]
    else:
        entry["freq"] = "lower"
        entry["m_tilde"] = freq.m_tilde
        entry["mode"] = freq.mode
        if freq.sample_point is not None:
            entry["sample_point"] = freq.sample_point
        rows = [(int(t), "", v) for t, v in zip(unit.obs_times, unit.outcomes)]
    with open(out / ofile, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "k", "value"])
        for t, k, v in rows:
            w.writerow([t, k, repr(float(v))])
    if Q > 0 and unit.covariates is not None:
        xfile = f"{safe}_x.csv"
        entry["covariates"] = xfile
        with open(out / xfile, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "q", "value"])
            for q in range(unit.covariates.shape[0]):
                for t in range(unit.covariates.shape[1]):
                    w.writerow([t + 1, q + 1, repr(float(unit.covariates[q, t]))])
    return entry


# ---------------------------------------------------------------------------
# truncation (placebo-in-time refits on a shortened horizon)
# ---------------------------------------------------------------------------


def truncate_unit(unit: UnitSeries, T_new: int) -> UnitSeries:
    """Restrict a unit to baseline periods 1..T_new."""
    freq = unit.freq
    cov = unit.covariates[:, :T_new] if unit.covariates is not None else None
    if isinstance(freq, Same):
        return UnitSeries(unit.unit_id, freq, unit.outcomes[:T_new], cov)
    if isinstance(freq, Higher):
        return UnitSeries(unit.unit_id, freq, unit.outcomes[:T_new], cov)
    keep = unit.obs_times <= T_new
    return UnitSeries(unit.unit_id, freq, unit.outcomes[keep], cov, obs_times=unit.obs_times[keep])


def truncate_panel(panel: MixedPanel, T0_new: int, T_new: int) -> MixedPanel:
    """Panel restricted to 1..T_new with the pre/post split at T0_new."""
    return MixedPanel(
        treated=truncate_unit(panel.treated, T_new),
        donors=tuple(truncate_unit(d, T_new) for d in panel.donors),
        T0=T0_new,
        T1=T_new - T0_new,
        Q=panel.Q,
    )
