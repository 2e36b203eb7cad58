"""CSV / JSON artifacts and a small SVG line-chart writer.

CSV is the authoritative output; floats are written with six decimals so
repeated runs produce identical bytes. The SVG charts are for eyeballing.
"""
from __future__ import annotations

import csv
import json
from html import escape
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1

EPOCH_HEADER = ["epoch", "train_acc", "train_loss", "test_acc", "test_loss"]
SWEEP_HEADER = ["xi", "n_qubits", "seed", "epochs", "train_acc", "train_loss", "test_acc", "test_loss"]
NOISE_HEADER = ["kind", "level", "seed", "accuracy"]


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.6f}"


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def write_epochs_csv(record, path):
    _write_rows(path, EPOCH_HEADER, (
        (m.epoch, m.train_acc, m.train_loss, m.test_acc, m.test_loss) for m in record.epochs
    ))


def write_confusion_csv(cm, path):
    cm = np.asarray(cm)
    _write_rows(path, ["true\\pred"] + [str(c) for c in range(cm.shape[1])],
                ([str(i)] + [str(int(v)) for v in row] for i, row in enumerate(cm)))


def run_summary(record, **extra):
    final = record.final
    summary = {
        "schema_version": SCHEMA_VERSION,
        "config": record.config,
        "final": {
            "train_acc": final.train_acc,
            "train_loss": final.train_loss,
            "test_acc": final.test_acc,
            "test_loss": final.test_loss,
        },
        "confusion": None if record.confusion is None else np.asarray(record.confusion).tolist(),
        "wall_time_s": round(record.wall_time, 3),
    }
    summary.update(extra)
    return summary


def write_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def sweep_rows(records):
    for r in records:
        c, f = r.config, r.final
        yield (c["xi"], c["n_qubits"], c["seed"], len(r.epochs), f.train_acc, f.train_loss,
               f.test_acc, f.test_loss)


def write_sweep_csv(records, path):
    _write_rows(path, SWEEP_HEADER, sweep_rows(records))


def write_noise_csv(results, path):
    _write_rows(path, NOISE_HEADER, ((r.kind, r.level, r.seed, r.accuracy) for r in results))


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"]


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def line_chart(series, title="", xlabel="", ylabel="", width=560, height=320, y_range=None, offset_y=0):
    """One chart as an SVG ``<g>`` element.

    ``series`` maps a legend label to ``(xs, ys)`` or ``(xs, ys, yerr)``.
    """
    left, right, top, bottom = 60, 130, 30, 45
    pw, ph = width - left - right, height - top - bottom
    xs_all = [x for s in series.values() for x in s[0]]
    ys_all = [y for s in series.values() for y in s[1] if y is not None]
    x0, x1 = (min(xs_all), max(xs_all)) if xs_all else (0.0, 1.0)
    if y_range is not None:
        y0, y1 = y_range
    else:
        y0, y1 = (min(ys_all), max(ys_all)) if ys_all else (0.0, 1.0)
        pad = 0.05 * (y1 - y0 or 1.0)
        y0, y1 = y0 - pad, y1 + pad
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<g transform="translate(0,{offset_y})">',
           f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{px(t):.1f}" y1="{top + ph}" x2="{px(t):.1f}" y2="{top + ph + 4}" stroke="#444"/>')
        out.append(f'<text x="{px(t):.1f}" y="{top + ph + 16}" text-anchor="middle" font-size="10">{t:.3g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{left - 4}" y1="{py(t):.1f}" x2="{left}" y2="{py(t):.1f}" stroke="#444"/>')
        out.append(f'<text x="{left - 6}" y="{py(t) + 3:.1f}" text-anchor="end" font-size="10">{t:.3g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 14 {top + ph / 2:.1f})">{escape(ylabel)}</text>')

    for i, (label, s) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = [(x, y) for x, y in zip(s[0], s[1]) if y is not None]
        if pts:
            path = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.8"/>')
            for x, y in pts:
                out.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="2.5" fill="{color}"/>')
        if len(s) > 2 and s[2] is not None:
            for x, y, e in zip(s[0], s[1], s[2]):
                if y is not None and e:
                    out.append(f'<line x1="{px(x):.1f}" y1="{py(y - e):.1f}" x2="{px(x):.1f}" '
                               f'y2="{py(y + e):.1f}" stroke="{color}"/>')
        ly = top + 12 + 16 * i
        out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 28}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 32}" y="{ly + 4}" font-size="11">{escape(str(label))}</text>')
    out.append("</g>")
    return "\n".join(out)


def write_svg(charts, path, width=560, height=320):
    """Stack ``line_chart`` keyword dicts vertically in one SVG file."""
    body = [line_chart(width=width, height=height, offset_y=i * height, **c) for i, c in enumerate(charts)]
    total = height * len(charts)
    Path(path).write_text(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{total}" '
        f'viewBox="0 0 {width} {total}" font-family="sans-serif">\n'
        '<rect width="100%" height="100%" fill="white"/>\n' + "\n".join(body) + "\n</svg>\n"
    )


def curves_chart(record):
    ep = [m.epoch for m in record.epochs]
    acc = {"train": (ep, [m.train_acc for m in record.epochs]),
           "test": (ep, [m.test_acc for m in record.epochs])}
    loss = {"train": (ep, [m.train_loss for m in record.epochs]),
            "test": (ep, [m.test_loss for m in record.epochs])}
    return [dict(series=acc, title="Accuracy", xlabel="epoch", ylabel="accuracy", y_range=(0, 1)),
            dict(series=loss, title="NLL loss", xlabel="epoch", ylabel="loss")]


def mean_std(groups):
    """``{key: [values]}`` -> sorted keys, means, population stds."""
    keys = sorted(groups)
    means = [float(np.mean(groups[k])) for k in keys]
    stds = [float(np.std(groups[k])) for k in keys]
    return keys, means, stds
