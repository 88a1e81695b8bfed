"""``sdmm`` command-line front end.

Exit codes: 0 success, 1 verification failure, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import RELAXED, STRICT, DspConfig
from .dspemu import AccumulatorOverflowError
from .huffman import HuffmanStream, entropy_bits, huffman_decode, huffman_encode
from .manipulate import approximate
from .report import build_report, error_histogram, to_text, write_report
from .romdict import RomImage, encode_stream, read_index_stream, write_index_stream
from .sasim import ArrayConfig, ConvSpec, PackedWeights, decoded_weights, execute_gemm, im2col, pack_weights
from .tensorio import TensorFormatError, check_signed_range, load_tensor
from .verify import lane_sweep, verify_rom

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

INDEX_FILE = "index.bin"
ROM_FILE = "rom.sdmm"
TUPLES_FILE = "rom_tuples.json"
PACK_REPORT = "pack_report.json"
MANIFEST = "manifest.json"
HUFFMAN_FILE = "index.huf"


class InputError(Exception):
    """Bad user input; maps to exit code 2."""


@dataclass
class RunManifest:
    command: str
    config: dict
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def write(self, path: Path):
        path.write_text(_dumps(asdict(self)))

    @classmethod
    def read(cls, path: Path) -> "RunManifest":
        return cls(**json.loads(path.read_text()))


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _config(args) -> DspConfig:
    try:
        return DspConfig.for_bits(args.bits, args.input_bits, args.mode)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _config_from(desc: dict) -> DspConfig:
    return DspConfig(v=desc["v"], c=desc["c"], k=desc["k"], a_width=desc["a_width"],
                     b_width=desc["b_width"], acc_width=desc["acc_width"], mode=desc["mode"])


def _advisory(cfg: DspConfig) -> str | None:
    if cfg.mode != RELAXED:
        return None
    return (f"advisory: relaxed mode, packed A word needs {cfg.a_word_bits} bits "
            f"(A port {cfg.a_width}, P port {cfg.acc_width}); a 25x18/48 DSP48E1 cannot host it")


def _as_matrix(weights: np.ndarray) -> tuple[str, np.ndarray]:
    if weights.ndim == 1:
        return "flat", weights
    if weights.ndim == 2:
        return "gemm", weights
    if weights.ndim == 4:
        return "conv", weights.reshape(-1, weights.shape[-1])
    raise InputError(f"weights must be 1-D, 2-D (N x P) or 4-D (Kh, Kw, Cin, Cout); got shape {weights.shape}")


def _load_weights(path, cfg: DspConfig) -> np.ndarray:
    w = load_tensor(path)
    check_signed_range(w, cfg.c, "weights")
    return w


def _encode(weights: np.ndarray, cfg: DspConfig, capacity: int | None):
    layout, mat = _as_matrix(weights)
    if layout == "flat":
        enc = encode_stream(mat, cfg, capacity)
        final = enc.final_values[:enc.param_count]
        words = enc.words
    else:
        packed, enc = pack_weights(mat, cfg, capacity)
        final = decoded_weights(packed, cfg)
        words = packed.words
    return layout, enc, words, np.asarray(final).ravel()


def _pack_stats(weights: np.ndarray, final: np.ndarray, enc, cfg: DspConfig, layout: str) -> dict:
    flat = weights.ravel()
    approx_only = np.array([approximate(int(x), cfg).value for x in flat], dtype=np.int64) - flat
    total = final - flat
    return {
        "layout": layout,
        "shape": list(weights.shape),
        "params": int(flat.size),
        "funnel": enc.funnel,
        "rom": enc.rom.stats,
        "approximation_error_histogram": {str(k): v for k, v in error_histogram(approx_only).items()},
        "total_error_histogram": {str(k): v for k, v in error_histogram(total).items()},
        "mean_abs_approximation_error": float(np.abs(approx_only).mean()) if flat.size else 0.0,
        "mean_abs_total_error": float(np.abs(total).mean()) if flat.size else 0.0,
        "max_abs_total_error": int(np.abs(total).max()) if flat.size else 0,
        "exact_fraction": float((approx_only == 0).mean()) if flat.size else 0.0,
    }


def _rom_tuples(rom: RomImage, cfg: DspConfig) -> list[list[int]]:
    return [list(e.magnitudes(cfg)) for e in rom.entries]


# -- commands -----------------------------------------------------------------------

def cmd_pack(args) -> int:
    cfg = _config(args)
    weights = _load_weights(args.weights, cfg)
    if weights.size == 0:
        raise InputError("weight file is empty")
    layout, enc, words, final = _encode(weights, cfg, args.rom_capacity)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_index_stream(out / INDEX_FILE, words.ravel(), cfg, enc.param_count)
    enc.rom.save(out / ROM_FILE)
    (out / TUPLES_FILE).write_text(_dumps(_rom_tuples(enc.rom, cfg)))
    stats = _pack_stats(weights, final, enc, cfg, layout)
    (out / PACK_REPORT).write_text(_dumps(stats))
    RunManifest(
        command="pack", config=cfg.describe(),
        inputs={"weights": str(args.weights)},
        outputs={"index": INDEX_FILE, "rom": ROM_FILE, "tuples": TUPLES_FILE, "report": PACK_REPORT},
        seed=args.seed,
        extra={"layout": layout, "shape": list(weights.shape),
               "words_shape": list(words.shape), "rom_capacity": enc.rom.capacity},
    ).write(out / MANIFEST)
    f = enc.funnel
    print(f"packed {stats['params']} params into {f['tuples']} index words, {f['rom_entries']} ROM entries")
    print(f"funnel {f['original']} -> {f['fine_tuned']} -> {f['approximated']}")
    print(f"mean |error| {stats['mean_abs_total_error']:.4f}, max {stats['max_abs_total_error']}")
    return EXIT_OK


def cmd_rom_build(args) -> int:
    cfg = _config(args)
    weights = _load_weights(args.weights, cfg)
    if weights.size == 0:
        raise InputError("weight file is empty")
    _, enc, _, _ = _encode(weights, cfg, args.rom_capacity)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    enc.rom.save(out)
    out.with_name(out.name + ".tuples.json").write_text(_dumps(_rom_tuples(enc.rom, cfg)))
    print(f"ROM: {len(enc.rom.entries)} entries of {enc.rom.capacity}, "
          f"{enc.rom.stats['merge_count']} tuples merged")
    return EXIT_OK


def _load_artifacts(path) -> tuple[RunManifest, DspConfig, RomImage, np.ndarray]:
    art = Path(path)
    if not (art / MANIFEST).exists():
        raise InputError(f"{art}: no {MANIFEST}; run `sdmm pack` first")
    manifest = RunManifest.read(art / MANIFEST)
    cfg = _config_from(manifest.config)
    for name in (ROM_FILE, INDEX_FILE):
        if not (art / name).exists():
            raise InputError(f"{art}: missing {name}")
    rom = RomImage.load(art / ROM_FILE)
    rom.check_config(cfg)
    words, _ = read_index_stream(art / INDEX_FILE)
    return manifest, cfg, rom, words


def write_i32(path: Path, arr: np.ndarray):
    """Raw little-endian int32 plus a JSON shape header next to it."""
    arr = np.asarray(arr, dtype=np.int64)
    if arr.size and (arr.min() < -(1 << 31) or arr.max() >= 1 << 31):
        raise OverflowError("output does not fit int32")
    path.write_bytes(arr.astype("<i4").tobytes())
    path.with_name(path.name + ".json").write_text(_dumps({"dtype": "<i4", "shape": list(arr.shape)}))


def read_i32(path) -> np.ndarray:
    path = Path(path)
    header = json.loads(path.with_name(path.name + ".json").read_text())
    return np.frombuffer(path.read_bytes(), dtype="<i4").astype(np.int64).reshape(header["shape"])


def cmd_simulate(args) -> int:
    manifest, cfg, rom, words = _load_artifacts(args.artifacts)
    layout = manifest.extra["layout"]
    if layout == "flat":
        raise InputError("flat weight streams have no GEMM shape; pack a 2-D or 4-D weight tensor")
    shape = manifest.extra["shape"]
    n_rows = int(np.prod(shape[:-1]))
    packed = PackedWeights(words.reshape(manifest.extra["words_shape"]), rom, n_rows, shape[-1])
    x = load_tensor(args.inputs)
    check_signed_range(x, cfg.v, "inputs")
    acfg = ArrayConfig(args.rows, args.cols, cfg, args.psum_width)

    if layout == "conv":
        if x.ndim != 3:
            raise InputError(f"convolution inputs must be (H, W, Cin); got {x.shape}")
        kh, kw, cin, cout = shape
        spec = ConvSpec(x.shape[0], x.shape[1], x.shape[2], kh, kw, cout, args.stride, args.padding)
        if cin != x.shape[2]:
            raise InputError(f"input has {x.shape[2]} channels, kernel expects {cin}")
        try:
            spec.validate()
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        a = im2col(x, spec)
        out_shape = (spec.out_height, spec.out_width, cout)
    else:
        if x.ndim != 2 or x.shape[1] != n_rows:
            raise InputError(f"GEMM inputs must be (M, {n_rows}); got {x.shape}")
        a = x
        out_shape = (x.shape[0], shape[-1])

    out, stats = execute_gemm(a, packed, acfg)
    out = out.reshape(out_shape)
    dest = Path(args.output)
    dest.parent.mkdir(parents=True, exist_ok=True)
    write_i32(dest, out)
    result = {"stats": stats.as_dict(), "array": {"rows": acfg.rows, "cols": acfg.cols,
                                                   "pe_count": acfg.pe_count}}
    status = EXIT_OK
    if args.check:
        ref = (a @ decoded_weights(packed, cfg)).reshape(out_shape)
        mismatches = int(np.count_nonzero(ref != out))
        result["check"] = {"mismatches": mismatches}
        print(f"{'PASS' if mismatches == 0 else 'FAIL'}, {mismatches} mismatches against the decoded-weight oracle")
        status = EXIT_OK if mismatches == 0 else EXIT_FAIL
    dest.with_name(dest.name + ".stats.json").write_text(_dumps(result))
    print(f"output {list(out_shape)}; {stats.passes} passes, {stats.multiplications} multiplications "
          f"on {acfg.pe_count} DSPs")
    return status


def cmd_compress(args) -> int:
    manifest, cfg, _, words = _load_artifacts(args.artifacts)
    params = manifest.extra.get("shape")
    param_count = int(np.prod(params)) if params else int(words.size * cfg.k)
    stream = huffman_encode(words.tolist())
    out = Path(args.artifacts) / HUFFMAN_FILE
    out.write_bytes(stream.to_bytes())
    back = huffman_decode(HuffmanStream.from_bytes(out.read_bytes()))
    if back != words.tolist():
        print("FAIL, Huffman round trip changed the index stream")
        return EXIT_FAIL
    summary = {
        "symbols": int(words.size),
        "distinct": len(stream.lengths),
        "index_bits_per_param": cfg.index_width * words.size / param_count,
        "huffman_bits_per_param": stream.nbits / param_count,
        "huffman_bits_per_index": stream.bits_per_symbol,
        "entropy_bits_per_index": entropy_bits(words.tolist()),
        "raw_bits_per_param": cfg.c,
    }
    (Path(args.artifacts) / "compress_report.json").write_text(_dumps(summary))
    print(f"Huffman {summary['huffman_bits_per_param']:.3f} bits/param "
          f"(index {summary['index_bits_per_param']:.3f}, raw {cfg.c}); round trip OK")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _config(args)
    seeds = tuple(range(args.seed, args.seed + args.seeds))
    failed = False

    if args.rom:
        rom = RomImage.load(args.rom)
        try:
            rom.check_config(cfg)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        expected = None
        tuples_path = Path(args.expected) if args.expected else Path(str(args.rom) + ".tuples.json")
        if args.expected or tuples_path.exists():
            expected = [tuple(t) for t in json.loads(tuples_path.read_text())]
        res = verify_rom(rom, cfg, expected)
        print(f"ROM {args.rom}: {res.summary()}")
        for note in res.notes:
            print(f"  {note}")
        return EXIT_OK if res.passed else EXIT_FAIL

    configs = [cfg]
    if not args.no_cross_width:
        configs += [DspConfig.for_bits(cfg.c, v, RELAXED if v != 8 else None)
                    for v in (8, 6, 4) if v != cfg.v]
    for i, c in enumerate(configs):
        res = lane_sweep(c, seeds if i == 0 else seeds[:1])
        print(f"c={c.c} v={c.v} k={c.k} {c.mode}: {res.summary()} "
              f"(max P width {res.max_p_bits} of {c.acc_width})")
        advisory = _advisory(c)
        if advisory:
            print(f"  {advisory}")
        failed |= not res.passed
    return EXIT_FAIL if failed else EXIT_OK


def cmd_report(args) -> int:
    pack_stats = None
    if args.artifacts:
        manifest, cfg, _, words = _load_artifacts(args.artifacts)
        shape = manifest.extra.get("shape")
        param_count = int(np.prod(shape)) if shape else int(words.size * cfg.k)
        pack_path = Path(args.artifacts) / PACK_REPORT
        if pack_path.exists():
            pack_stats = json.loads(pack_path.read_text())
    else:
        cfg = _config(args)
        words, param_count = None, 0
    acfg = ArrayConfig(args.rows, args.cols, cfg)
    report = build_report(acfg, words, param_count, pack_stats)
    paths = write_report(report, acfg, args.output)
    sys.stdout.write(to_text(report))
    print("wrote " + ", ".join(p.name for p in paths))
    return EXIT_OK


# -- parser -------------------------------------------------------------------------

def _add_config(p: argparse.ArgumentParser):
    p.add_argument("--bits", type=int, choices=(4, 6, 8), default=8, help="parameter width c")
    p.add_argument("--input-bits", type=int, choices=(4, 6, 8), default=None,
                   help="input width v (default: same as --bits)")
    p.add_argument("--mode", choices=(STRICT, RELAXED), default=None,
                   help="port-width policy (default: strict when the packing fits 25x18/48)")
    p.add_argument("--seed", type=int, default=0)


def _add_array(p: argparse.ArgumentParser):
    p.add_argument("--rows", type=int, default=12)
    p.add_argument("--cols", type=int, default=12)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdmm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pack", help="approximate, fine-tune and dictionary-encode a weight tensor")
    p.add_argument("weights")
    p.add_argument("-o", "--output", required=True, help="artifact directory")
    p.add_argument("--rom-capacity", type=int, default=None)
    _add_config(p)
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("rom-build", help="build only the ROM image for a weight tensor")
    p.add_argument("weights")
    p.add_argument("-o", "--output", required=True, help="ROM image path")
    p.add_argument("--rom-capacity", type=int, default=None)
    _add_config(p)
    p.set_defaults(func=cmd_rom_build)

    p = sub.add_parser("simulate", help="run GEMM or convolution on the systolic array from artifacts")
    p.add_argument("artifacts")
    p.add_argument("inputs")
    p.add_argument("-o", "--output", required=True, help="int32 output path")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--padding", type=int, default=0)
    p.add_argument("--psum-width", type=int, default=32)
    p.add_argument("--check", action="store_true", help="compare against the decoded-weight oracle")
    _add_array(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compress", help="Huffman-code the index stream of an artifact directory")
    p.add_argument("artifacts")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("verify", help="exhaustive lane sweeps or ROM checks")
    _add_config(p)
    p.add_argument("--seeds", type=int, default=3, help="co-lane seeds for the main sweep")
    p.add_argument("--no-cross-width", action="store_true", help="skip the other input widths")
    p.add_argument("--rom", help="check a ROM image instead of sweeping")
    p.add_argument("--expected", help="JSON list of magnitude tuples the ROM should hold")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="WRC, Huffman, DSP and memory-crossover report with figures")
    p.add_argument("artifacts", nargs="?", default=None)
    p.add_argument("-o", "--output", required=True, help="report directory")
    _add_config(p)
    _add_array(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        if getattr(args, "rows", 1) < 1 or getattr(args, "cols", 1) < 1:
            raise InputError("--rows and --cols must be positive")
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc.filename or exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, TensorFormatError, ValueError,
            KeyError, OverflowError, AccumulatorOverflowError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
