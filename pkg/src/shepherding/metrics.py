"""Evaluation metrics computed from trajectory logs.

Integral metrics are discretized as left Riemann sums at the logging step,
matching the cadence of the trajectory log.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


def containment_fraction(state, rho_G: float) -> float:
    """Fraction of targets inside the (closed) goal disk."""
    if state.n_targets < 1:
        raise ValueError("need at least one target")
    dist = np.linalg.norm(state.target_pos - state.goal_center, axis=1)
    return float((dist <= rho_G).mean())


def gathering_time(chi_series, chi_star: float, dt: float) -> float | None:
    """First instant with chi >= chi_star; the first crossing counts even if
    chi later dips below the threshold."""
    chi = np.asarray(chi_series, dtype=float)
    if chi.size == 0:
        raise ValueError("empty containment series")
    hits = np.flatnonzero(chi >= chi_star)
    return float(hits[0] * dt) if hits.size else None


def settling_time(chi_series, chi_star: float, t_contain: float,
                  t_max: float, dt: float) -> float | None:
    """First instant from which chi >= chi_star holds for the containment
    window min(t + t_contain, t_max).

    A candidate only counts if the series actually covers its window, so a
    log that was cut short cannot fake a settled episode.
    """
    chi = np.asarray(chi_series, dtype=float)
    if chi.size == 0:
        raise ValueError("empty containment series")
    ok = chi >= chi_star
    t_last = (chi.size - 1) * dt
    for k in np.flatnonzero(ok):
        t_k = k * dt
        t_end = min(t_k + t_contain, t_max)
        if t_end > t_last + dt * 1e-9:
            return None  # window extends past the log; cannot confirm
        k_end = int(round(t_end / dt))
        if ok[k:k_end + 1].all():
            return float(t_k)
    return None


def path_length(log, upto_t: float) -> float:
    """Mean distance travelled by each herder up to `upto_t`."""
    steps = np.asarray(log.times) <= upto_t + 1e-12
    pos = np.asarray(log.herder_pos)[steps]
    if pos.shape[0] < 2:
        return 0.0
    seg = np.linalg.norm(np.diff(pos, axis=0), axis=2)  # (K, N)
    return float(seg.sum(axis=0).mean())


def cooperation_index(selections, upto_t: float, dt: float) -> float:
    """Time-averaged fraction of distinct pursued targets.

    Steps where at most one distinct target is pursued (including idle
    herders) contribute zero. Undefined for a single herder.
    """
    sel = np.asarray(selections, dtype=int)
    if sel.ndim != 2 or sel.shape[1] < 2:
        raise ValueError("cooperation index needs at least two herders")
    k_max = min(sel.shape[0], int(round(upto_t / dt)))
    if k_max <= 0:
        return float("nan")
    n = sel.shape[1]
    vals = np.empty(k_max)
    for k in range(k_max):
        pursued = {int(s) for s in sel[k] if s >= 0}
        vals[k] = max(len(pursued) - 1, 0) / (n - 1)
    return float(vals.mean())


@dataclass(frozen=True)
class EpisodeMetrics:
    """Summary quantities of one episode."""

    chi_series: np.ndarray
    gathering: float | None      # t_g (s)
    settling: float | None       # t_s (s)
    path_final: float            # d_f (m)
    path_gathering: float        # d_g (m), nan if never gathered
    coop_final: float            # psi_f, nan for N=1
    coop_gathering: float        # psi_g
    success: bool                # settling time is finite

    def row(self) -> dict:
        return {
            "success": int(self.success),
            "t_g": _num(self.gathering),
            "t_s": _num(self.settling),
            "d_g": self.path_gathering,
            "d_f": self.path_final,
            "psi_g": self.coop_gathering,
            "psi_f": self.coop_final,
        }


def _num(v):
    return float("nan") if v is None else float(v)


def episode_metrics(log, chi_star: float, t_contain: float, t_max: float) -> EpisodeMetrics:
    """Evaluate every §-level metric on one trajectory log."""
    dt = log.params.dt
    chi = log.chi_series()
    t_g = gathering_time(chi, chi_star, dt)
    t_s = settling_time(chi, chi_star, t_contain, t_max, dt)
    t_end = float(log.times[-1])
    d_f = path_length(log, t_end)
    d_g = path_length(log, t_g) if t_g is not None else float("nan")
    if log.params.n_herders >= 2:
        psi_f = cooperation_index(log.selections, t_end, dt)
        psi_g = (cooperation_index(log.selections, t_g, dt)
                 if t_g is not None else float("nan"))
    else:
        psi_f = psi_g = float("nan")
    return EpisodeMetrics(chi, t_g, t_s, d_f, d_g, psi_f, psi_g,
                          success=t_s is not None)


SUMMARY_COLUMNS = ["seed", "success", "t_g", "t_s", "d_g", "d_f", "psi_g", "psi_f"]


def write_summary_csv(path, rows: list[dict], provenance: str | None = None,
                      extra_columns: list[str] = ()):  # noqa: B006
    """Per-episode summary plus `median` and `iqr` aggregate rows."""
    cols = SUMMARY_COLUMNS + list(extra_columns)
    with open(path, "w", newline="") as fh:
        if provenance:
            fh.write(f"# {provenance}\n")
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in cols])
        data = {c: np.array([float(row.get(c, float("nan"))) for row in rows])
                for c in cols[1:]}
        med, iqr = ["median"], ["iqr"]
        for c in cols[1:]:
            vals = data[c]
            if c == "success":
                med.append(_fmt(vals.mean()))  # success rate
                iqr.append(_fmt(0.0))
                continue
            finite = vals[np.isfinite(vals)]
            if finite.size == 0:
                med.append(_fmt(float("nan")))
                iqr.append(_fmt(float("nan")))
            else:
                q1, q2, q3 = np.percentile(finite, [25, 50, 75])
                med.append(_fmt(q2))
                iqr.append(_fmt(q3 - q1))
        writer.writerow(med)
        writer.writerow(iqr)


def read_summary_csv(path) -> tuple[list[str], dict]:
    """Read a summary CSV back: per-episode columns only (aggregates dropped)."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = list(csv.reader(lines))
    header = reader[0]
    body = [r for r in reader[1:] if r and r[0] not in ("median", "iqr")]
    cols = {name: np.array([float(r[i]) for r in body])
            for i, name in enumerate(header)}
    return header, cols


def _fmt(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.9g" % float(v)
