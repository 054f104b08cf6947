"""Greedy time-window coincidence matching between signal and idler streams."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..scenarios import DetectionEvent, EventStream


@dataclass(frozen=True)
class CoincidencePair:
    signal_event: DetectionEvent
    idler_event: DetectionEvent
    dt: float


@dataclass
class Coincidences:
    """Matched index pairs into the signal and idler streams.

    ``dt`` is the delay-corrected idler-minus-signal time of each pair.
    """

    signal_index: np.ndarray
    idler_index: np.ndarray
    dt: np.ndarray
    n_signal: int
    n_idler: int

    def __len__(self) -> int:
        return len(self.dt)

    @property
    def match_rate(self) -> float:
        return len(self) / self.n_signal if self.n_signal else 0.0

    def pairs(self, signal: EventStream, idler: EventStream) -> list[CoincidencePair]:
        sig_events = list(signal.events())
        idl_events = list(idler.events())
        return [
            CoincidencePair(sig_events[i], idl_events[j], float(d))
            for i, j, d in zip(self.signal_index, self.idler_index, self.dt)
        ]


def _corrected(stream: EventStream, delays: Mapping[str, float] | None) -> np.ndarray:
    if not delays:
        return stream.t.astype(float)
    lookup = np.array([delays.get(name, 0.0) for name in stream.detector_names])
    return stream.t - lookup[stream.detector]


def match_coincidences(
    signal: EventStream,
    idler: EventStream,
    window_s: float,
    delays: Mapping[str, float] | None = None,
) -> Coincidences:
    """Pair each signal event with the nearest unused idler event.

    Known arm delays (``delays[detector]``, seconds) are subtracted first.
    Signal events are visited in time order and each idler event is used at
    most once; a pair is kept when its corrected separation is within
    ``window_s``.

    Raises
    ------
    ValueError
        If either stream is not sorted by time.
    """
    if np.any(np.diff(signal.t) < 0) or np.any(np.diff(idler.t) < 0):
        raise ValueError("coincidence matching needs time-sorted streams")
    cs = _corrected(signal, delays)
    ci = _corrected(idler, delays)
    order = np.argsort(ci, kind="stable")
    ci_sorted = ci[order]
    n_i = len(ci_sorted)

    # nearest candidates by bisection; the python loop only walks past used events
    start = np.searchsorted(ci_sorted, cs)
    used = np.zeros(n_i, dtype=bool)
    sig_idx, idl_idx, dts = [], [], []
    ci_list = ci_sorted.tolist()
    for s_i, (t, j) in enumerate(zip(cs.tolist(), start.tolist())):
        left = j - 1
        while left >= 0 and used[left] and t - ci_list[left] <= window_s:
            left -= 1
        right = j
        while right < n_i and used[right] and ci_list[right] - t <= window_s:
            right += 1
        best, best_dt = -1, window_s
        if left >= 0 and not used[left] and t - ci_list[left] <= best_dt:
            best, best_dt = left, t - ci_list[left]
        if right < n_i and not used[right] and ci_list[right] - t <= window_s:
            if best < 0 or ci_list[right] - t < best_dt:
                best = right
        if best >= 0:
            used[best] = True
            sig_idx.append(s_i)
            idl_idx.append(best)
            dts.append(ci_list[best] - t)
    idl_orig = order[np.array(idl_idx, dtype=np.int64)] if idl_idx else np.array([], dtype=np.int64)
    return Coincidences(
        np.array(sig_idx, dtype=np.int64), idl_orig, np.array(dts, dtype=float), len(cs), n_i
    )
