"""CSV artifact formats, manifests and deterministic text encoding.

Every artifact starts with a header row. Floats are written with
shortest-round-trip repr so that a rerun under the same seed reproduces
each file byte for byte; manifests carry the config hash and seed but no
timestamps for the same reason.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .ema import EmaEvent
from .pipeline import Dataset
from .synth import Cohort
from .timeseries import Channel, SignalRecord

LABEL_TEXT = {1: "response", 0: "non_response", -1: ""}
TEXT_LABEL = {"response": 1, "non_response": 0, "": -1}


def fmt(x) -> str:
    """Number to text: integers bare, floats via repr, NaN as empty."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    xf = float(x)
    if np.isnan(xf):
        return ""
    if xf == int(xf) and abs(xf) < 1e15:
        return repr(xf)
    return repr(xf)


def signal_filename(pid: str, channel: Channel) -> str:
    return f"{pid}_{channel.value}.csv"


def write_signal_csv(path: Path, records: list[SignalRecord]) -> None:
    """Concatenate a participant-channel's day records into one file."""
    channel = records[0].channel
    header = "epoch_s,x,y,z" if channel is Channel.ACC3 else "epoch_s,value"
    with open(path, "w") as f:
        f.write(header + "\n")
        for rec in records:
            times = rec.times()
            if channel is Channel.ACC3:
                for t, row in zip(times, rec.samples):
                    f.write(f"{t:.6f},{row[0]!r},{row[1]!r},{row[2]!r}\n")
            else:
                for t, v in zip(times, rec.samples):
                    f.write(f"{t:.6f},{v!r}\n")


def read_signal_csv(path: Path, pid: str, channel: Channel) -> list[SignalRecord]:
    """Load a signal file and split it into contiguous uniform records at
    sampling gaps (device-off periods)."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    times = data[:, 0]
    values = data[:, 1:] if channel is Channel.ACC3 else data[:, 1]
    if times.size < 2:
        raise ValueError(f"{path}: too few samples")
    diffs = np.diff(times)
    step = float(np.median(diffs))
    breaks = np.flatnonzero(diffs > 1.5 * step) + 1
    records = []
    for lo, hi in zip(np.r_[0, breaks], np.r_[breaks, times.size]):
        n = hi - lo
        if n < 2:
            continue
        rate = (n - 1) / (times[hi - 1] - times[lo])
        records.append(SignalRecord(pid, channel, rate, float(times[lo]), values[lo:hi]))
    return records


def write_ema_csv(path: Path, events: list[EmaEvent]) -> None:
    with open(path, "w") as f:
        f.write("pid,notify_epoch_s,responded,onset_epoch_s," +
                ",".join(f"r{i}" for i in range(1, 14)) + "\n")
        for e in events:
            if e.responded:
                tail = f"{e.onset_epoch_s:.6f}," + ",".join(str(r) for r in e.ratings)
            else:
                tail = "," + ",".join([""] * 13)
            f.write(f"{e.participant_id},{e.notify_epoch_s:.6f},{int(e.responded)},{tail}\n")


def read_ema_csv(path: Path) -> list[EmaEvent]:
    events = []
    with open(path) as f:
        header = f.readline()
        if not header.startswith("pid,notify_epoch_s"):
            raise ValueError(f"{path}: unexpected header")
        for line in f:
            parts = line.rstrip("\n").split(",")
            pid, notify, responded, onset = parts[0], float(parts[1]), parts[2] == "1", parts[3]
            ratings = None
            onset_val = None
            if responded:
                onset_val = float(onset)
                ratings = tuple(int(r) for r in parts[4:17])
            events.append(EmaEvent(pid, notify, responded, onset_val, ratings))
    return events


def write_ground_truth_csv(path: Path, cohort: Cohort) -> None:
    """Per-minute latent affect and per-event response probability."""
    with open(path, "w") as f:
        f.write("kind,pid,epoch_s,value\n")
        for p in cohort.participants:
            t = p.truth
            for epoch, val in zip(t.minute_epochs, t.minute_affect):
                f.write(f"affect,{p.participant_id},{epoch:.6f},{val!r}\n")
            for e, prob in zip(p.events, t.event_probabilities):
                f.write(f"response_prob,{p.participant_id},{e.notify_epoch_s:.6f},{prob!r}\n")


def write_meta_csv(path: Path, entries: dict[str, float | str]) -> None:
    with open(path, "w") as f:
        f.write("key,value\n")
        for key in sorted(entries):
            value = entries[key]
            f.write(f"{key},{fmt(value) if isinstance(value, (int, float, np.floating)) else value}\n")


def read_meta_csv(path: Path) -> dict[str, str]:
    out = {}
    with open(path) as f:
        f.readline()
        for line in f:
            key, value = line.rstrip("\n").split(",", 1)
            out[key] = value
    return out


def write_feature_columns(path: Path, names: tuple[str, ...]) -> None:
    with open(path, "w") as f:
        f.write("index,name\n")
        for i, name in enumerate(names):
            f.write(f"{i},{name}\n")


def read_feature_columns(path: Path) -> tuple[str, ...]:
    names = []
    with open(path) as f:
        f.readline()
        for line in f:
            _, name = line.rstrip("\n").split(",", 1)
            names.append(name)
    return tuple(names)


def write_rows_csv(path: Path, datasets: list[Dataset]) -> None:
    """Feature rows (complete only) with whatever labels are attached."""
    if not datasets:
        raise ValueError("nothing to write")
    n_feat = len(datasets[0].names)
    with open(path, "w") as f:
        f.write("pid,event_id,seg_start_s,label,affect," +
                ",".join(f"f_{i}" for i in range(n_feat)) + "\n")
        for ds in datasets:
            for i in range(ds.n_rows):
                e = int(ds.event_idx[i])
                f.write(
                    f"{ds.participant_id},{e if e >= 0 else ''},{ds.seg_start_s[i]:.6f},"
                    f"{LABEL_TEXT[int(ds.y[i])]},{fmt(ds.affect[i])},"
                    + ",".join(repr(float(v)) for v in ds.X[i])
                    + "\n"
                )


def read_rows_csv(
    path: Path,
    names: tuple[str, ...],
    events_by_pid: dict[str, list[EmaEvent]],
    seg_len_s: float = 60.0,
) -> list[Dataset]:
    """Rebuild per-participant datasets from a feature/label CSV."""
    per: dict[str, list] = {}
    n_feat = len(names)
    with open(path) as f:
        f.readline()
        for line in f:
            parts = line.rstrip("\n").split(",")
            pid = parts[0]
            per.setdefault(pid, []).append(parts)
    datasets = []
    for pid in sorted(per):
        rows = per[pid]
        n = len(rows)
        X = np.empty((n, n_feat))
        seg_start = np.empty(n)
        event_idx = np.empty(n, dtype=np.int64)
        y = np.empty(n, dtype=np.int8)
        affect = np.full(n, np.nan)
        events = events_by_pid.get(pid, [])
        pa = np.full(n, np.nan)
        na = np.full(n, np.nan)
        for i, parts in enumerate(rows):
            event_idx[i] = int(parts[1]) if parts[1] else -1
            seg_start[i] = float(parts[2])
            y[i] = TEXT_LABEL[parts[3]]
            affect[i] = float(parts[4]) if parts[4] else np.nan
            X[i] = [float(v) for v in parts[5 : 5 + n_feat]]
            if event_idx[i] >= 0 and events and events[event_idx[i]].responded:
                pa[i] = events[event_idx[i]].pa_mean
                na[i] = events[event_idx[i]].na_mean
        datasets.append(
            Dataset(
                participant_id=pid, X=X, names=names, seg_start_s=seg_start,
                seg_end_s=seg_start + seg_len_s, event_idx=event_idx, y=y,
                affect=affect, pa=pa, na=na, events=events,
            )
        )
    return datasets


def write_kv_csv(path: Path, entries: dict[str, float]) -> None:
    """The machine-readable key=value summary format shared by several
    artifacts."""
    with open(path, "w") as f:
        f.write("key,value\n")
        for key in sorted(entries):
            f.write(f"{key},{fmt(entries[key])}\n")


def read_kv_csv(path: Path) -> dict[str, float]:
    out = {}
    with open(path) as f:
        f.readline()
        for line in f:
            key, value = line.rstrip("\n").split(",", 1)
            out[key] = float(value) if value else float("nan")
    return out


def write_table_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(fmt(v) if isinstance(v, (int, float, np.floating, np.integer))
                             else str(v) for v in row) + "\n")


def write_manifest(path: Path, step: str, config_hash: str, seed: int, artifacts: list[str]) -> None:
    doc = {
        "step": step,
        "config_hash": config_hash,
        "seed": seed,
        "artifacts": sorted(artifacts),
    }
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
