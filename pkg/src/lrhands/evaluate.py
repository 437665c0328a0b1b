"""Segmentation metrics, report files and report figures.

Metrics operate on numpy masks: binary masks are boolean arrays, 3-class
masks use {0: no-hand, 1: left, 2: right}.  Reports are written as a JSON
key-value tree plus a plain-text summary, a CSV table per confusion matrix
and rendered matplotlib figures.
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from types import SimpleNamespace

import numpy as np
from scipy import ndimage

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .errors import DataError
from .identify import HandLabel
from .imaging import load_lrmask_dir

CLASS_NAMES = ("no-hand", "left", "right")


def binary_f1(pred, truth):
    """F1 of boolean masks; both empty counts as a perfect 1.0."""
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != truth.shape:
        raise DataError("mask dimensions differ")
    tp = int((pred & truth).sum())
    pred_pos = int(pred.sum())
    truth_pos = int(truth.sum())
    if pred_pos == 0 and truth_pos == 0:
        return 1.0
    if tp == 0:
        return 0.0
    precision = tp / pred_pos
    recall = tp / truth_pos
    return 2.0 * precision * recall / (precision + recall)


@dataclass
class ConfusionMatrix3:
    """3-class pixel confusion: rows = truth, columns = prediction."""

    counts: np.ndarray  # (3, 3) int64

    @property
    def normalized(self):
        rows = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        out = np.zeros((3, 3))
        nonzero = rows[:, 0] > 0
        out[nonzero] = self.counts[nonzero] / rows[nonzero]
        return out

    @property
    def diagonal(self):
        return self.normalized.diagonal()

    def __add__(self, other):
        return ConfusionMatrix3(counts=self.counts + other.counts)

    def to_dict(self):
        return {
            "labels": list(CLASS_NAMES),
            "counts": self.counts.tolist(),
            "normalized": np.round(self.normalized, 6).tolist(),
        }


def confusion_3class(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise DataError("mask dimensions differ")
    joint = truth.astype(np.int64).ravel() * 3 + pred.astype(np.int64).ravel()
    counts = np.bincount(joint, minlength=9).reshape(3, 3)
    return ConfusionMatrix3(counts=counts)


def identification_accuracy(results, truths):
    """Contour-level identification accuracy against truth 3-class masks.

    Each predicted segment is matched to the truth hand with maximal pixel
    overlap (ties to the larger truth region); accuracy is the fraction of
    matched segments whose label agrees.  Returns per-class accuracy and
    match counts.
    """
    correct = {HandLabel.LEFT: 0, HandLabel.RIGHT: 0}
    matched = {HandLabel.LEFT: 0, HandLabel.RIGHT: 0}
    for result, truth in zip(results, truths):
        truth = np.asarray(truth)
        regions = {HandLabel.LEFT: truth == 1, HandLabel.RIGHT: truth == 2}
        areas = {label: int(region.sum()) for label, region in regions.items()}
        for segment in result.segments:
            overlaps = {label: int((segment.contour.mask & region).sum())
                        for label, region in regions.items()}
            if max(overlaps.values()) == 0:
                continue
            truth_label = max(overlaps,
                              key=lambda lab: (overlaps[lab], areas[lab]))
            matched[truth_label] += 1
            if segment.label == truth_label:
                correct[truth_label] += 1
    def rate(label):
        return correct[label] / matched[label] if matched[label] else 0.0
    return {
        "left_accuracy": rate(HandLabel.LEFT),
        "right_accuracy": rate(HandLabel.RIGHT),
        "matched_left": matched[HandLabel.LEFT],
        "matched_right": matched[HandLabel.RIGHT],
    }


def occlusion_rate(results, truth_flags):
    """Fraction of truth-occluded frames flagged, plus benign extra flags."""
    flagged = [bool(r.occlusion_flag) for r in results]
    truth_flags = [bool(f) for f in truth_flags]
    occluded_idx = [i for i, f in enumerate(truth_flags) if f]
    detected = sum(1 for i in occluded_idx if flagged[i])
    false_flags = sum(1 for i, f in enumerate(flagged) if f and not truth_flags[i])
    rate = detected / len(occluded_idx) if occluded_idx else 1.0
    return {
        "detection_rate": rate,
        "truth_occlusions": len(occluded_idx),
        "detected": detected,
        "false_flags": false_flags,
    }


# ---------------------------------------------------------------------------
# Directory-level evaluation and report files
# ---------------------------------------------------------------------------

def evaluate_masks(pred_masks, truth_masks):
    """Aggregate metrics over aligned lists of 3-class masks."""
    if len(pred_masks) != len(truth_masks):
        raise DataError("prediction/truth frame counts differ")
    confusion = ConfusionMatrix3(counts=np.zeros((3, 3), dtype=np.int64))
    f1_scores = []
    for pred, truth in zip(pred_masks, truth_masks):
        if pred.shape != truth.shape:
            raise DataError("mask dimensions differ")
        confusion = confusion + confusion_3class(pred, truth)
        f1_scores.append(binary_f1(pred > 0, truth > 0))
    return {
        "frames": len(pred_masks),
        "binary_f1": {
            "mean": float(np.mean(f1_scores)),
            "min": float(np.min(f1_scores)),
            "per_frame": [round(float(v), 6) for v in f1_scores],
        },
        "confusion_3class": confusion.to_dict(),
    }


def results_from_masks(masks):
    """Pseudo frame results built from 3-class masks alone.

    Each connected component of a predicted class becomes one labeled
    segment, which lets mask directories feed the contour-level
    identification metric without the original per-frame records.
    """
    eight = np.ones((3, 3), dtype=bool)
    results = []
    for mask in masks:
        segments = []
        for value, label in ((1, HandLabel.LEFT), (2, HandLabel.RIGHT)):
            labels, count = ndimage.label(np.asarray(mask) == value, structure=eight)
            for i in range(1, count + 1):
                segments.append(SimpleNamespace(
                    contour=SimpleNamespace(mask=labels == i), label=label))
        results.append(SimpleNamespace(segments=segments, occlusion_flag=False))
    return results


def _load_flags(directory, filename, key):
    """Per-frame boolean flags from a JSON sidecar file, if present."""
    for candidate in (Path(directory) / filename, Path(directory).parent / filename):
        if candidate.is_file():
            data = json.loads(candidate.read_text())
            flags = data.get(key, data if isinstance(data, dict) else {})
            return {str(name): bool(v) for name, v in flags.items()}
    return None


def evaluate_pair(pred_dir, truth_dir):
    """Metrics for one prediction directory against one truth directory.

    Frames are paired by filename stem; predictions produced at a coarser
    sampling stride are evaluated on the frames they cover.  Occlusion
    detection is reported when both sides carry flag sidecars
    (results.json for predictions, scene.json for truth).
    """
    pred_names, pred_masks = load_lrmask_dir(pred_dir)
    truth_names, truth_masks = load_lrmask_dir(truth_dir)
    pred_by_name = dict(zip(pred_names, pred_masks))
    truth_by_name = dict(zip(truth_names, truth_masks))
    shared = sorted(set(pred_by_name) & set(truth_by_name))
    if not shared:
        raise DataError("no shared frame names between prediction and truth")

    preds = [pred_by_name[n] for n in shared]
    truths = [truth_by_name[n] for n in shared]
    section = evaluate_masks(preds, truths)
    section["identification"] = identification_accuracy(results_from_masks(preds), truths)

    pred_flags = _load_flags(pred_dir, "results.json", "occlusion_flags")
    truth_flags = _load_flags(truth_dir, "scene.json", "occlusion_flags")
    if pred_flags is not None and truth_flags is not None:
        common = [n for n in shared if n in pred_flags and n in truth_flags]
        if common:
            results = [SimpleNamespace(occlusion_flag=pred_flags[n], segments=[])
                       for n in common]
            section["occlusion"] = occlusion_rate(results, [truth_flags[n] for n in common])
    return section


def _aggregate(sections):
    if len(sections) == 1:
        return next(iter(sections.values()))
    counts = np.zeros((3, 3), dtype=np.int64)
    f1_all = []
    frames = 0
    for section in sections.values():
        counts += np.array(section["confusion_3class"]["counts"], dtype=np.int64)
        f1_all.extend(section["binary_f1"]["per_frame"])
        frames += section["frames"]
    out = {
        "frames": frames,
        "binary_f1": {"mean": float(np.mean(f1_all)), "min": float(np.min(f1_all)),
                      "per_frame": f1_all},
        "confusion_3class": ConfusionMatrix3(counts=counts).to_dict(),
    }
    return out


def evaluate_directories(pred_root, truth_root):
    """Full report dict for a prediction tree against a truth tree.

    When both roots contain matching subdirectories, each pair becomes one
    video section; otherwise the roots themselves form a single video.
    """
    pred_root, truth_root = Path(pred_root), Path(truth_root)
    pred_subs = {p.name for p in pred_root.iterdir() if p.is_dir()} if pred_root.is_dir() else set()
    truth_subs = {p.name for p in truth_root.iterdir() if p.is_dir()} if truth_root.is_dir() else set()
    shared_subs = sorted((pred_subs & truth_subs) - {"left", "right"})

    videos = {}
    if shared_subs:
        for name in shared_subs:
            videos[name] = evaluate_pair(pred_root / name, truth_root / name)
    else:
        videos[pred_root.name or "video"] = evaluate_pair(pred_root, truth_root)
    return {"videos": videos, "aggregate": _aggregate(videos)}


def save_report(report, path, figures=True):
    """Write report JSON plus text summary, CSV tables and figures."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    path.with_suffix(".txt").write_text(format_report_text(report))
    _write_csv_tables(report, path)
    if figures:
        render_figures(report, path.parent / (path.stem + "_figures"))


def format_report_text(report):
    lines = ["L/R hand-segmentation evaluation", "=" * 34]
    for video, section in sorted(report.get("videos", {}).items()):
        lines.append(f"\n[{video}]")
        lines.extend(_section_lines(section))
    lines.append("\n[aggregate]")
    lines.extend(_section_lines(report.get("aggregate", {})))
    return "\n".join(lines) + "\n"


def _section_lines(section):
    lines = []
    if "frames" in section:
        lines.append(f"  frames evaluated : {section['frames']}")
    f1 = section.get("binary_f1")
    if f1:
        lines.append(f"  binary F1 (mean) : {f1['mean']:.4f}")
    conf = section.get("confusion_3class")
    if conf:
        lines.append("  3-class confusion (row-normalized):")
        lines.append("                " + "  ".join(f"{n:>8}" for n in conf["labels"]))
        for name, row in zip(conf["labels"], conf["normalized"]):
            lines.append(f"      {name:>8}  " + "  ".join(f"{v:8.4f}" for v in row))
    ident = section.get("identification")
    if ident:
        lines.append(f"  id accuracy      : left {ident['left_accuracy']:.4f} "
                     f"({ident['matched_left']} matched), "
                     f"right {ident['right_accuracy']:.4f} "
                     f"({ident['matched_right']} matched)")
    occ = section.get("occlusion")
    if occ:
        lines.append(f"  occlusion detect : {occ['detection_rate']:.4f} "
                     f"({occ['detected']}/{occ['truth_occlusions']}, "
                     f"{occ['false_flags']} extra flags)")
    return lines


def _write_csv_tables(report, path):
    sections = dict(report.get("videos", {}))
    sections["aggregate"] = report.get("aggregate", {})
    for video, section in sections.items():
        conf = section.get("confusion_3class")
        if not conf:
            continue
        out = path.parent / f"{path.stem}_confusion_{video}.csv"
        with out.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["truth\\pred"] + conf["labels"] + [f"{n}_norm" for n in conf["labels"]])
            for name, counts, norm in zip(conf["labels"], conf["counts"], conf["normalized"]):
                writer.writerow([name] + counts + [f"{v:.6f}" for v in norm])


def render_figures(report, out_dir):
    """Confusion heatmaps and per-frame F1 curves as PNG files."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sections = dict(report.get("videos", {}))
    sections["aggregate"] = report.get("aggregate", {})
    written = []
    for video, section in sections.items():
        conf = section.get("confusion_3class")
        if conf:
            fig, ax = plt.subplots(figsize=(4.2, 3.6))
            norm = np.array(conf["normalized"])
            im = ax.imshow(norm, vmin=0.0, vmax=1.0, cmap="viridis")
            ax.set_xticks(range(3), conf["labels"])
            ax.set_yticks(range(3), conf["labels"])
            ax.set_xlabel("prediction")
            ax.set_ylabel("truth")
            ax.set_title(f"3-class confusion: {video}")
            for i in range(3):
                for j in range(3):
                    ax.text(j, i, f"{norm[i, j]:.3f}", ha="center", va="center",
                            color="white" if norm[i, j] < 0.6 else "black", fontsize=8)
            fig.colorbar(im, ax=ax, fraction=0.046)
            fig.tight_layout()
            target = out / f"confusion_{video}.png"
            fig.savefig(target, dpi=110)
            plt.close(fig)
            written.append(target)
        f1 = section.get("binary_f1")
        if f1 and f1.get("per_frame"):
            fig, ax = plt.subplots(figsize=(5.0, 2.8))
            ax.plot(f1["per_frame"], lw=1.2)
            ax.axhline(f1["mean"], color="gray", ls="--", lw=0.8,
                       label=f"mean {f1['mean']:.3f}")
            ax.set_xlabel("frame")
            ax.set_ylabel("binary F1")
            ax.set_ylim(0, 1.02)
            ax.set_title(f"per-frame F1: {video}")
            ax.legend(loc="lower right", fontsize=8)
            fig.tight_layout()
            target = out / f"f1_{video}.png"
            fig.savefig(target, dpi=110)
            plt.close(fig)
            written.append(target)
    return written
