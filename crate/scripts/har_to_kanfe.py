#!/usr/bin/env python3
"""Convert public HAR datasets into kanfe's canonical recording format.

One output file per subject:

    #KANFE-DATA v1; subject=<id>; rate=<Hz>; channels=<name,...>
    <label>,<v1>,...,<vc>
    ...
    <blank line between discontinuous segments>

Usage:
    har_to_kanfe.py wisdm       WISDM_ar_v1.1_raw.txt          OUT
    har_to_kanfe.py pamap2      PAMAP2_Dataset/                 OUT [--wrist] [--drop-null]
    har_to_kanfe.py motionsense A_DeviceMotion_data/            OUT
    har_to_kanfe.py mmfit       mm-fit/                         OUT [--wrist] [--subject-map MAP.csv]

Downloads (manual):
    WISDM v1.1   https://www.cis.fordham.edu/wisdm/dataset.php
    PAMAP2       https://archive.ics.uci.edu/dataset/231/pamap2+physical+activity+monitoring
    MotionSense  https://github.com/mmalekzadeh/motion-sense
    MM-Fit       https://mmfit.github.io/
"""

import argparse
import csv
import math
import os
import sys
from pathlib import Path


def write_subject(out_dir, subject, rate, channels, segments):
    """segments: list of (labels, rows) with rows a list of float lists."""
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{subject}.csv"
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"#KANFE-DATA v1; subject={subject}; rate={rate:g}; channels={','.join(channels)}\n")
        first = True
        for labels, rows in segments:
            if not rows:
                continue
            if not first:
                f.write("\n")
            first = False
            for label, row in zip(labels, rows):
                f.write(str(label) + "," + ",".join(repr(float(v)) for v in row) + "\n")
    return path


def forward_fill(rows):
    """Replaces NaNs by the last finite value of the channel; drops leading
    rows that have no finite value yet. Returns (kept indices, rows)."""
    last = [None] * (len(rows[0]) if rows else 0)
    keep, out = [], []
    for i, row in enumerate(rows):
        filled = []
        for ch, v in enumerate(row):
            if math.isfinite(v):
                last[ch] = v
            filled.append(last[ch])
        if all(v is not None for v in filled):
            keep.append(i)
            out.append(filled)
    return keep, out


# --- WISDM ---------------------------------------------------------------

WISDM_ACTIVITIES = ["Walking", "Jogging", "Upstairs", "Downstairs", "Sitting", "Standing"]
WISDM_RATE = 20.0
# a timestamp jump larger than this (seconds) starts a new segment
WISDM_MAX_GAP = 1.0


def convert_wisdm(src, out, _args):
    text = Path(src).read_text(encoding="utf-8", errors="replace")
    per_user = {}
    skipped = 0
    for record in text.replace("\n", ";").split(";"):
        fields = [f.strip() for f in record.split(",")]
        if len(fields) != 6 or not fields[0]:
            skipped += bool(record.strip())
            continue
        try:
            user, act, ts = int(fields[0]), fields[1], int(fields[2])
            xyz = [float(v) for v in fields[3:6]]
        except ValueError:
            skipped += 1
            continue
        if act not in WISDM_ACTIVITIES or not all(math.isfinite(v) for v in xyz):
            skipped += 1
            continue
        per_user.setdefault(user, []).append((ts, WISDM_ACTIVITIES.index(act), xyz))
    paths = []
    for user, samples in sorted(per_user.items()):
        segments, labels, rows, prev = [], [], [], None
        for ts, label, xyz in samples:
            if prev is not None and (ts <= 0 or prev <= 0 or not 0 < (ts - prev) / 1e9 <= WISDM_MAX_GAP):
                segments.append((labels, rows))
                labels, rows = [], []
            labels.append(label)
            rows.append(xyz)
            prev = ts
        segments.append((labels, rows))
        paths.append(write_subject(out, f"wisdm{user:02d}", WISDM_RATE, ["acc_x", "acc_y", "acc_z"], segments))
    return paths, skipped


# --- PAMAP2 --------------------------------------------------------------

# protocol activities; id 0 (transient / other) becomes class 0 unless dropped
PAMAP2_ACTIVITIES = [1, 2, 3, 4, 5, 6, 7, 12, 13, 16, 17, 24]
PAMAP2_IMUS = [("hand", 3), ("chest", 20), ("ankle", 37)]
# per IMU: temperature, ±16g acc, ±6g acc, gyro, magnetometer (orientation is documented as invalid)
PAMAP2_FIELDS = ["temp", "acc16_x", "acc16_y", "acc16_z", "acc6_x", "acc6_y", "acc6_z",
                 "gyro_x", "gyro_y", "gyro_z", "mag_x", "mag_y", "mag_z"]
PAMAP2_RATE = 100.0


def pamap2_label(activity, drop_null):
    if activity in PAMAP2_ACTIVITIES:
        return PAMAP2_ACTIVITIES.index(activity) + (0 if drop_null else 1)
    if activity == 0 and not drop_null:
        return 0
    return None


def convert_pamap2(src, out, args):
    imus = PAMAP2_IMUS[:1] if args.wrist else PAMAP2_IMUS
    channels = [f"{name}_{field}" for name, _ in imus for field in PAMAP2_FIELDS]
    files = sorted(Path(src).glob("**/subject*.dat"))
    by_subject = {}
    for f in files:
        by_subject.setdefault(f.stem, []).append(f)
    paths, skipped = [], 0
    for subject, parts in sorted(by_subject.items()):
        segments = []
        for part in sorted(parts):
            labels, rows = [], []

            def flush():
                if rows:
                    keep, filled = forward_fill(rows)
                    segments.append(([labels[i] for i in keep], filled))

            for line in part.read_text().splitlines():
                cols = line.split()
                if len(cols) < 54:
                    skipped += 1
                    continue
                label = pamap2_label(int(float(cols[1])), args.drop_null)
                if label is None:
                    # excluded activities split the recording
                    flush()
                    labels, rows = [], []
                    continue
                labels.append(label)
                rows.append([float(cols[start + j]) for _, start in imus for j in range(13)])
            flush()
        if segments:
            paths.append(write_subject(out, subject, PAMAP2_RATE, channels, segments))
    return paths, skipped


# --- MotionSense ---------------------------------------------------------

MOTIONSENSE_ACTIVITIES = ["dws", "ups", "wlk", "jog", "sit", "std"]
MOTIONSENSE_RATE = 50.0


def convert_motionsense(src, out, _args):
    per_subject = {}
    channels = None
    for trial in sorted(p for p in Path(src).iterdir() if p.is_dir()):
        act = trial.name.split("_")[0]
        if act not in MOTIONSENSE_ACTIVITIES:
            continue
        label = MOTIONSENSE_ACTIVITIES.index(act)
        for f in sorted(trial.glob("sub_*.csv"), key=lambda p: int(p.stem.split("_")[1])):
            with open(f, newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader)
                names = [h.replace(".", "_") for h in header[1:]]
                if channels is None:
                    channels = names
                elif names != channels:
                    raise SystemExit(f"{f}: unexpected columns {header}")
                rows = [[float(v) for v in r[1:]] for r in reader if r]
            subject = int(f.stem.split("_")[1])
            per_subject.setdefault(subject, []).append(([label] * len(rows), rows))
    paths = [
        write_subject(out, f"motionsense{s:02d}", MOTIONSENSE_RATE, channels, segs)
        for s, segs in sorted(per_subject.items())
    ]
    return paths, 0


# --- MM-Fit --------------------------------------------------------------

MMFIT_ACTIVITIES = ["non_activity", "squats", "pushups", "dumbbell_shoulder_press", "lunges",
                    "dumbbell_rows", "situps", "tricep_extensions", "bicep_curls",
                    "lateral_shoulder_raises", "jumping_jacks"]
MMFIT_RATE = 50.0
# devices and modalities kept; each stream is (frame, timestamp_ms, x, y, z)
MMFIT_STREAMS = ["sw_l_acc", "sw_l_gyr", "sw_r_acc", "sw_r_gyr",
                 "sp_r_acc", "sp_r_gyr", "eb_l_acc", "eb_l_gyr"]
MMFIT_WRIST = MMFIT_STREAMS[:4]


def convert_mmfit(src, out, args):
    import numpy as np

    subject_of = {}
    if args.subject_map:
        with open(args.subject_map, newline="") as fh:
            for workout, subject in csv.reader(fh):
                subject_of[workout.strip()] = subject.strip()
    streams = MMFIT_WRIST if args.wrist else MMFIT_STREAMS
    channels = [f"{s}_{a}" for s in streams for a in "xyz"]
    per_subject, skipped = {}, 0
    for workout in sorted(p for p in Path(src).iterdir() if p.is_dir() and p.name.startswith("w")):
        w = workout.name
        data = {}
        for s in streams:
            f = workout / f"{w}_{s}.npy"
            if not f.exists():
                break
            data[s] = np.load(f)
        label_file = workout / f"{w}_labels.csv"
        if len(data) != len(streams) or not label_file.exists():
            skipped += 1
            continue
        lo = max(d[0, 1] for d in data.values())
        hi = min(d[-1, 1] for d in data.values())
        if hi <= lo:
            skipped += 1
            continue
        grid = np.arange(lo, hi, 1000.0 / MMFIT_RATE)
        cols = [np.interp(grid, d[:, 1], d[:, 2 + a]) for d in data.values() for a in range(3)]
        # exercise sets are given in video frames; map grid times to frames via the first stream
        ref = next(iter(data.values()))
        frames = np.interp(grid, ref[:, 1], ref[:, 0])
        labels = np.zeros(len(grid), dtype=int)
        with open(label_file, newline="") as fh:
            for row in csv.reader(fh):
                start, end, _reps, name = int(row[0]), int(row[1]), row[2], row[3].strip()
                if name in MMFIT_ACTIVITIES:
                    labels[(frames >= start) & (frames <= end)] = MMFIT_ACTIVITIES.index(name)
        rows = np.stack(cols, axis=1).tolist()
        per_subject.setdefault(subject_of.get(w, w), []).append((labels.tolist(), rows))
    paths = [write_subject(out, s, MMFIT_RATE, channels, segs) for s, segs in sorted(per_subject.items())]
    return paths, skipped


CONVERTERS = {
    "wisdm": convert_wisdm,
    "pamap2": convert_pamap2,
    "motionsense": convert_motionsense,
    "mmfit": convert_mmfit,
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("dataset", choices=sorted(CONVERTERS))
    ap.add_argument("src", help="raw dataset file or directory")
    ap.add_argument("out", type=Path, help="output directory")
    ap.add_argument("--wrist", action="store_true", help="PAMAP2 / MM-Fit: wrist sensors only")
    ap.add_argument("--drop-null", action="store_true", help="PAMAP2: drop activity 0 instead of labelling it class 0")
    ap.add_argument("--subject-map", help="MM-Fit: CSV of workout,subject pairs; default one subject per workout")
    args = ap.parse_args(argv)
    if not os.path.exists(args.src):
        ap.error(f"{args.src} does not exist")
    paths, skipped = CONVERTERS[args.dataset](args.src, args.out, args)
    print(f"wrote {len(paths)} subject files to {args.out}; skipped {skipped} malformed records", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
