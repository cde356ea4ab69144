"""
Analyse des séries temporelles de vitesse de la sphère.

Détection des pics et creux de U(t), amplitude, période, rapport d'asymétrie
(dents de scie) et critère d'oscillations entretenues ; détection du sillage
négatif sur les profils axiaux.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from .config import config
from .errors import InvalidParameterError

logger = logging.getLogger(__name__)

SMOOTHING_WINDOW = 25
MIN_SAMPLES = 100
MIN_CYCLES = 5
SUSTAIN_RATIO = 0.8


@dataclass
class OscillationReport:
    """Résumé des oscillations d'une série U(t)."""

    peak_times: List[float] = field(default_factory=list)
    peak_values: List[float] = field(default_factory=list)
    trough_times: List[float] = field(default_factory=list)
    trough_values: List[float] = field(default_factory=list)
    amplitude: float = 0.0
    amplitude_first_half: float = 0.0
    period: float = float("nan")
    asymmetry: float = 1.0
    cycles: int = 0
    sustained: bool = False
    U_mean: float = float("nan")

    def summary(self) -> Dict[str, float]:
        """Grandeurs scalaires (ligne de résumé d'un balayage)."""
        data = asdict(self)
        for key in ("peak_times", "peak_values", "trough_times", "trough_values"):
            data.pop(key)
        return data


def _extrema(t: np.ndarray, raw: np.ndarray, smooth: np.ndarray) -> List[tuple]:
    """Changements de signe de la dérivée lissée, zéros ignorés, filtre de proéminence."""
    slope = np.sign(np.gradient(smooth, t))
    nonzero = np.nonzero(slope)[0]
    if nonzero.size < 2:
        return []

    span = float(smooth.max() - smooth.min())
    prominence = max(1e-3 * span, 1e-9 * max(1.0, float(np.abs(smooth).max())))
    half = SMOOTHING_WINDOW // 2

    candidates = []
    for i, j in zip(nonzero[:-1], nonzero[1:]):
        if slope[i] == slope[j]:
            continue
        kind = "peak" if slope[i] > 0 else "trough"
        lo, hi = max(i - half, 0), min(j + half + 1, raw.size)
        window = raw[lo:hi]
        idx = lo + int(np.argmax(window) if kind == "peak" else np.argmin(window))
        candidates.append((idx, kind))

    kept: List[tuple] = []
    for idx, kind in candidates:
        if kept and kept[-1][1] == kind:
            prev = kept[-1][0]
            better = raw[idx] > raw[prev] if kind == "peak" else raw[idx] < raw[prev]
            if better:
                kept[-1] = (idx, kind)
            continue
        if kept and abs(raw[idx] - raw[kept[-1][0]]) < prominence:
            continue
        kept.append((idx, kind))
    return kept


def _half_amplitude(peaks: np.ndarray, troughs: np.ndarray) -> float:
    if peaks.size == 0 or troughs.size == 0:
        return 0.0
    return float(peaks.mean() - troughs.mean())


def analyze_oscillations(t, U) -> OscillationReport:
    """
    Analyse une série (t, U).

    Lissage par moyenne glissante centrée sur 25 échantillons ; extrema aux
    changements de signe de la dérivée lissée. Oscillations entretenues si au
    moins 5 cycles complets et amplitude de la seconde moitié ≥ 0.8 × celle de
    la première.

    Raises:
        InvalidParameterError: moins de 100 échantillons.
    """
    t = np.asarray(t, dtype=float)
    U = np.asarray(U, dtype=float)
    if t.size < MIN_SAMPLES:
        raise InvalidParameterError(
            config.ERROR_MESSAGES["too_few_samples"].format(count=t.size, minimum=MIN_SAMPLES)
        )

    smooth = pd.Series(U).rolling(SMOOTHING_WINDOW, center=True, min_periods=1).mean().to_numpy()
    extrema = _extrema(t, U, smooth)

    peaks = [i for i, kind in extrema if kind == "peak"]
    troughs = [i for i, kind in extrema if kind == "trough"]
    report = OscillationReport(
        peak_times=t[peaks].tolist(),
        peak_values=U[peaks].tolist(),
        trough_times=t[troughs].tolist(),
        trough_values=U[troughs].tolist(),
        U_mean=float(U.mean()),
    )

    t_mid = t[0] + 0.5 * (t[-1] - t[0])
    pt, pv = np.array(report.peak_times), np.array(report.peak_values)
    tt, tv = np.array(report.trough_times), np.array(report.trough_values)
    report.amplitude = _half_amplitude(pv[pt >= t_mid], tv[tt >= t_mid])
    report.amplitude_first_half = _half_amplitude(pv[pt < t_mid], tv[tt < t_mid])
    report.cycles = max(len(peaks) - 1, 0)
    if len(peaks) >= 2:
        report.period = float(np.diff(pt).mean())

    falling, rising = [], []
    for (i, kind_i), (j, _) in zip(extrema[:-1], extrema[1:]):
        (falling if kind_i == "peak" else rising).append(t[j] - t[i])
    if falling and rising:
        report.asymmetry = float(np.mean(falling) / np.mean(rising))

    report.sustained = (
        report.cycles >= MIN_CYCLES
        and report.amplitude > 0.0
        and report.amplitude >= SUSTAIN_RATIO * report.amplitude_first_half
    )
    logger.info(
        f"📊 Oscillations : {report.cycles} cycle(s), amplitude {report.amplitude:.4g}, "
        f"asymétrie {report.asymmetry:.3f}, entretenues={report.sustained}"
    )
    return report


@dataclass
class WakeReport:
    """Sillage derrière la sphère le long de l'axe."""

    per_time: pd.DataFrame
    first_negative_time: Optional[float]
    last_negative_time: Optional[float]
    disappears: bool


def detect_negative_wake(axis_df: pd.DataFrame, z_behind: float = 1.0, tol: float = 1e-8) -> WakeReport:
    """
    Sillage négatif : fluide derrière la sphère (z > 1) se déplaçant à l'opposé de la chute.

    La vitesse dans le sens de la chute vaut −u_z_lab ; elle est négative en
    présence d'un sillage négatif.

    Args:
        axis_df (pd.DataFrame): Colonnes t, z, u_z, u_z_lab (``axis_profile.csv``).
    """
    behind = axis_df[axis_df["z"] > z_behind]
    fall_speed = -behind["u_z_lab"]
    per_time = (
        fall_speed.groupby(behind["t"]).min().rename("min_fall_velocity").reset_index()
    )
    per_time["negative"] = per_time["min_fall_velocity"] < -tol

    negative_times = per_time.loc[per_time["negative"], "t"]
    first = float(negative_times.iloc[0]) if not negative_times.empty else None
    last = float(negative_times.iloc[-1]) if not negative_times.empty else None
    disappears = first is not None and bool(((per_time["t"] > last) & ~per_time["negative"]).any())
    if first is not None:
        logger.info(f"🔍 Sillage négatif entre t={first:.3f} et t={last:.3f} (disparaît={disappears})")
    return WakeReport(per_time=per_time, first_negative_time=first, last_negative_time=last, disappears=disappears)
