"""Compression and resource reports: JSON, CSV, plain text and figures."""

from __future__ import annotations

import csv
import io
import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

from .config import DspConfig
from .huffman import entropy_bits, huffman_encode
from .manipulate import approximation_error_table
from .romdict import memory_crossover
from .sasim import ArrayConfig, resource_report


def truncated_percent(num: int, den: int) -> float:
    """``num / den`` as a percentage cut (not rounded) to one decimal: 2/3 -> 66.6."""
    if den == 0:
        return 0.0
    return math.floor(Fraction(num, den) * 1000) / 10


def error_histogram(errors) -> dict[int, int]:
    values, counts = np.unique(np.abs(np.asarray(errors, dtype=np.int64)), return_counts=True)
    return {int(v): int(n) for v, n in zip(values, counts)}


def build_report(acfg: ArrayConfig, words=None, param_count: int = 0,
                 pack_stats: dict | None = None) -> dict:
    """All reported quantities for one configuration and (optional) workload.

    With no words the workload figures are zero; the configuration-level
    ratios are still reported.
    """
    cfg = acfg.dsp
    words = np.zeros(0, dtype=np.int64) if words is None else np.asarray(words, dtype=np.int64)
    res = resource_report(acfg, param_count)
    tuples = int(words.size)
    raw_bits = param_count * cfg.c
    index_bits = tuples * cfg.index_width
    if tuples:
        huff = huffman_encode(words.tolist())
        huff_bits, table_bits = huff.nbits, huff.table_bits
        entropy = entropy_bits(words.tolist())
    else:
        huff_bits = table_bits = 0
        entropy = 0.0
    cross = memory_crossover(cfg)
    report = {
        "config": cfg.describe(),
        "array": {"rows": acfg.rows, "cols": acfg.cols, "pe_cols": acfg.pe_cols,
                  "psum_width": acfg.psum_width},
        "wrc": {
            "index_bits": cfg.index_width,
            "raw_bits_per_tuple": cfg.k * cfg.c,
            "ratio_percent": truncated_percent(cfg.index_width, cfg.k * cfg.c),
            "rom_capacity": cfg.rom_capacity,
        },
        "dsp": {
            "packed": res["dsp_packed"],
            "baseline": res["dsp_baseline"],
            "reduction_percent": truncated_percent(res["dsp_baseline"] - res["dsp_packed"],
                                                   res["dsp_baseline"]),
        },
        "workload": {
            "params": int(param_count),
            "tuples": tuples,
            "raw_bits": raw_bits,
            "index_bits": index_bits,
            "index_bits_per_param": index_bits / param_count if param_count else 0.0,
            "huffman_bits": huff_bits,
            "huffman_table_bits": table_bits,
            "huffman_bits_per_param": huff_bits / param_count if param_count else 0.0,
            "index_entropy_bits": entropy,
            "wmem_bytes_raw": res["wmem_bytes_raw"],
            "wmem_bytes_wrc": res["wmem_bytes_wrc"],
        },
        "memory_crossover": cross,
    }
    if pack_stats:
        report["pack"] = pack_stats
    return report


def flatten(report: dict, prefix: str = "") -> list[tuple[str, object]]:
    rows = []
    for key in sorted(report):
        val = report[key]
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            rows += flatten(val, name + ".")
        else:
            rows.append((name, val))
    return rows


def to_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric", "value"])
    writer.writerows(flatten(report))
    return buf.getvalue()


def to_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def to_text(report: dict) -> str:
    cfg, dsp, wrc, wl = report["config"], report["dsp"], report["wrc"], report["workload"]
    cross = report["memory_crossover"]
    lines = [
        f"config: c={cfg['c']} v={cfg['v']} k={cfg['k']} mode={cfg['mode']} "
        f"A={cfg['a_width']} B={cfg['b_width']} P={cfg['acc_width']}",
        f"WRC {wrc['ratio_percent']:.1f}% ({wrc['index_bits']} of {wrc['raw_bits_per_tuple']} bits per tuple)",
        f"DSP {dsp['packed']} (-{dsp['reduction_percent']:.1f}% vs {dsp['baseline']})",
        f"Huffman {wl['huffman_bits_per_param']:.3f} bits/param "
        f"(entropy {wl['index_entropy_bits']:.3f} bits/index, {wl['params']} params)",
        f"memory crossover at {cross['crossover_params']:.0f} params "
        f"({cross['rom_entries']} ROM entries, {cross['rom_bits']} ROM bits)",
    ]
    if "pack" in report and "funnel" in report["pack"]:
        f = report["pack"]["funnel"]
        lines.append(f"funnel {f['original']} -> {f['fine_tuned']} -> {f['approximated']}")
    return "\n".join(lines) + "\n"


# -- figures ------------------------------------------------------------------------

def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path: Path):
    # no timestamps in the PNG, so reruns are byte-identical
    fig.savefig(path, dpi=100, metadata={"Software": None})


def plot_error_histogram(c: int, path) -> Path:
    plt = _pyplot()
    hist = error_histogram(list(approximation_error_table(c).values()))
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar(list(hist), list(hist.values()), color="0.35", width=0.7)
    ax.set_xlabel("|w - approx(w)|")
    ax.set_ylabel(f"count over all {1 << c} values")
    ax.set_title(f"Approximation error, c={c}")
    ax.set_xticks(list(hist))
    fig.tight_layout()
    _save(fig, Path(path))
    plt.close(fig)
    return Path(path)


def plot_memory_crossover(cfg: DspConfig, path, rom_entries: int | None = None) -> Path:
    plt = _pyplot()
    cross = memory_crossover(cfg, rom_entries)
    top = max(4 * cross["crossover_params"], 1000)
    params = np.linspace(0, top, 200)
    raw = params * cfg.c
    sdmm = cross["rom_bits"] + np.ceil(params / cfg.k) * cfg.index_width
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(params, raw / 8192, label="raw parameters", color="0.2")
    ax.plot(params, sdmm / 8192, label="ROM + index words", color="tab:blue")
    ax.axvline(cross["crossover_params"], color="0.6", ls=":")
    ax.set_xlabel("parameters")
    ax.set_ylabel("KiB")
    ax.legend(frameon=False)
    fig.tight_layout()
    _save(fig, Path(path))
    plt.close(fig)
    return Path(path)


def plot_dsp_counts(rows: int, cols: int, path) -> Path:
    plt = _pyplot()
    widths = (8, 6, 4)
    packed = [ArrayConfig(rows, cols, DspConfig.for_bits(b)).pe_count for b in widths]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    x = np.arange(len(widths))
    ax.bar(x - 0.2, [rows * cols] * len(widths), 0.4, label="one MAC per DSP", color="0.6")
    ax.bar(x + 0.2, packed, 0.4, label="packed", color="tab:blue")
    for xi, n in zip(x, packed):
        ax.text(xi + 0.2, n, str(n), ha="center", va="bottom", fontsize=8)
    ax.set_xticks(x, [f"{b}-bit" for b in widths])
    ax.set_ylabel(f"DSP blocks ({rows}x{cols} array)")
    ax.legend(frameon=False)
    fig.tight_layout()
    _save(fig, Path(path))
    plt.close(fig)
    return Path(path)


def write_report(report: dict, acfg: ArrayConfig, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(to_json(report))
    (out / "report.csv").write_text(to_csv(report))
    (out / "report.txt").write_text(to_text(report))
    figs = [
        plot_error_histogram(acfg.dsp.c, out / "error_histogram.png"),
        plot_memory_crossover(acfg.dsp, out / "memory_crossover.png"),
        plot_dsp_counts(acfg.rows, acfg.cols, out / "dsp_counts.png"),
    ]
    return [out / "report.json", out / "report.csv", out / "report.txt", *figs]
