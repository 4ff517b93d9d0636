"""Command-line front end: encode, decode, inspect, bench, make-corpus.

Exit codes: 0 success, 1 runtime/format error (one-line diagnostic on
stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import container, corpus
from .codec_core import lossless_decode
from .radiance_io import parse_hdr, read_hdr_file, write_hdr_file
from .tonemap import SdrImage

__all__ = ["main", "BenchRecord", "write_ppm"]

MODES = ("no-slrme", "slrme", "global-slrme")


@dataclass
class BenchRecord:
    """One benchmark measurement; lossless_ok must hold for every record."""

    image_id: str
    mode: str
    quality: int
    bpp_total: float
    bpp_base: float
    bpp_enh: float
    encode_ms: float
    decode_ms: float
    table_entries: int
    lossless_ok: bool


def write_ppm(path, image: SdrImage) -> None:
    """Binary PPM (P6, maxval 255)."""
    with open(path, "wb") as fh:
        fh.write(f"P6\n{image.width} {image.height}\n255\n".encode("ascii"))
        fh.write(image.as_array().tobytes())


def _mode_flags(mode: str) -> dict:
    return {
        "slrme": mode != "no-slrme",
        "global_regression": mode == "global-slrme",
    }


def _bpp_parts(stream) -> tuple[float, float, float]:
    sizes = container.section_sizes(stream)
    npix = stream.width * stream.height
    table_bytes = len(stream.regression_table) * container._ENTRY_SIZE + 2
    enh = sizes["exponent"] + sizes["residual_r"] + sizes["residual_g"] + sizes["residual_b"]
    total = sum(sizes.values())
    return total * 8.0 / npix, sizes["base"] * 8.0 / npix, (enh + table_bytes) * 8.0 / npix


def cmd_encode(args) -> int:
    image = read_hdr_file(args.input)
    timings: dict = {}
    mode = "global-slrme" if args.global_slrme else ("no-slrme" if args.no_slrme else "slrme")
    t0 = time.perf_counter()
    stream = container.encode(
        image,
        quality=args.quality,
        sigma=args.sigma,
        lossy_coder=args.lossy_coder,
        lossless_coder=args.lossless_coder,
        timings=timings,
        **_mode_flags(mode),
    )
    total_ms = (time.perf_counter() - t0) * 1000.0
    data = container.serialize(stream)
    Path(args.output).write_bytes(data)
    bpp_total, bpp_base, bpp_enh = _bpp_parts(stream)
    stages = " ".join(f"{k}={v:.1f}" for k, v in timings.items())
    print(
        f"{args.input} -> {args.output}: {len(data)} bytes, "
        f"bpp total={bpp_total:.3f} base={bpp_base:.3f} enh={bpp_enh:.3f} | "
        f"mode={mode} q={args.quality} sigma={args.sigma} | "
        f"ms total={total_ms:.1f} {stages}"
    )
    return 0


def cmd_decode(args) -> int:
    data = Path(args.input).read_bytes()
    stream = container.deserialize(data)
    if args.sdr:
        write_ppm(args.sdr, container.decode_sdr(stream))
        print(f"wrote SDR {args.sdr}")
    if args.hdr:
        write_hdr_file(args.hdr, container.decode_hdr(stream))
        print(f"wrote HDR {args.hdr}")
    return 0


def cmd_inspect(args) -> int:
    path = Path(args.input)
    data = path.read_bytes()
    if data[:4] == container.MAGIC:
        stream = container.deserialize(data)
        sizes = container.section_sizes(stream)
        print(f"{path}: HDLL v{container.VERSION}, {stream.width}x{stream.height}")
        print(
            f"  slrme={stream.slrme} lossy=(id={stream.lossy_spec.coder_id}, "
            f"q={stream.lossy_spec.quality}) lossless=id {stream.lossless_spec.coder_id} "
            f"sigma={stream.sigma_milli / 1000.0}"
        )
        for name, size in sizes.items():
            print(f"  section {name}: {size} bytes")
        print(f"  sections total: {sum(sizes.values())} bytes (file {len(data)} bytes)")
        table = stream.regression_table
        print(f"  regression entries: {len(table)}")
        if len(table):
            for ch, name in enumerate(("R", "G", "B")):
                sub = [e for e in table.entries if e.channel == ch]
                a_vals = [e.a for e in sub]
                b_vals = [e.b for e in sub]
                print(
                    f"    {name}: {len(sub)} entries, a in [{min(a_vals):.4f}, "
                    f"{max(a_vals):.4f}], b in [{min(b_vals):.4f}, {max(b_vals):.4f}]"
                )
        if not stream.sdr_only:
            e_plane = lossless_decode(stream.e_payload, stream.lossless_spec)
            _print_exponent_histogram(e_plane)
    else:
        image = parse_hdr(data)
        print(f"{path}: Radiance, {image.width}x{image.height} "
              f"({image.resolution_orientation})")
        for key, value in image.header_vars:
            print(f"  header: {value if key == '' else f'{key}={value}'}")
        _print_exponent_histogram(image.pixels[..., 3])
    return 0


def _print_exponent_histogram(e_plane: np.ndarray) -> None:
    hist = np.bincount(e_plane.ravel(), minlength=256)
    present = np.flatnonzero(hist)
    print(f"  exponent histogram ({present.size} distinct values):")
    for e in present:
        print(f"    E={int(e)}: {int(hist[e])}")


def cmd_bench(args) -> int:
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    for m in modes:
        if m not in MODES:
            raise ValueError(f"unknown mode {m!r} (choose from {', '.join(MODES)})")
    paths = sorted(Path(args.corpus).glob("*.hdr"))
    if not paths:
        raise FileNotFoundError(f"no .hdr files in {args.corpus}")

    # warm the JIT kernels so the first measured image is not charged for them
    warm = read_hdr_file(paths[0])
    container.decode_hdr(container.encode(warm, quality=args.quality, sigma=args.sigma))

    records: list[BenchRecord] = []
    for path in paths:
        image = read_hdr_file(path)
        for mode in modes:
            t0 = time.perf_counter()
            stream = container.encode(
                image, quality=args.quality, sigma=args.sigma, **_mode_flags(mode)
            )
            encode_ms = (time.perf_counter() - t0) * 1000.0
            t0 = time.perf_counter()
            decoded = container.decode_hdr(stream)
            decode_ms = (time.perf_counter() - t0) * 1000.0
            ok = decoded == image
            bpp_total, bpp_base, bpp_enh = _bpp_parts(stream)
            records.append(
                BenchRecord(
                    image_id=path.stem,
                    mode=mode,
                    quality=args.quality,
                    bpp_total=bpp_total,
                    bpp_base=bpp_base,
                    bpp_enh=bpp_enh,
                    encode_ms=encode_ms,
                    decode_ms=decode_ms,
                    table_entries=len(stream.regression_table),
                    lossless_ok=ok,
                )
            )
            if not ok:
                _write_csv(args.out, records)
                raise RuntimeError(f"lossless round-trip FAILED for {path} mode={mode}")

    _write_csv(args.out, records)
    print(f"wrote {args.out}: {len(records)} records")
    for mode in modes:
        sub = [r for r in records if r.mode == mode]
        print(
            f"  {mode}: avg bpp {np.mean([r.bpp_total for r in sub]):.3f}, "
            f"avg encode {np.mean([r.encode_ms for r in sub]):.1f} ms, "
            f"avg decode {np.mean([r.decode_ms for r in sub]):.1f} ms"
        )
    if "slrme" in modes and "no-slrme" in modes:
        t_with = np.mean([r.encode_ms for r in records if r.mode == "slrme"])
        t_without = np.mean([r.encode_ms for r in records if r.mode == "no-slrme"])
        print(f"  encode-time overhead slrme/no-slrme: {t_with / t_without:.3f}")
    return 0


def _write_csv(out_path, records: list[BenchRecord]) -> None:
    names = [f.name for f in fields(BenchRecord)]
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for r in records:
            writer.writerow([getattr(r, n) for n in names])
        if records:
            avg = ["average", "", records[0].quality]
            for n in names[3:-1]:
                avg.append(float(np.mean([getattr(r, n) for r in records])))
            avg.append(all(r.lossless_ok for r in records))
            writer.writerow(avg)


def cmd_make_corpus(args) -> int:
    paths = corpus.make_corpus(args.out, seed=args.seed, size=args.size)
    print(f"wrote {len(paths)} images to {args.out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdll", description="dual-layer lossless Radiance HDR codec"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode a .hdr file into an .hll stream")
    p.add_argument("--input", required=True, help="input .hdr file")
    p.add_argument("--output", required=True, help="output .hll stream")
    p.add_argument("--quality", type=int, default=85, help="base-layer quality (default 85)")
    p.add_argument("--sigma", type=float, default=1.0, help="Gaussian prefilter sigma")
    p.add_argument("--no-slrme", action="store_true", help="disable mantissa estimation")
    p.add_argument(
        "--global-slrme",
        action="store_true",
        help="fit one region covering all exponents (baseline)",
    )
    p.add_argument("--lossy-coder", type=int, default=1)
    p.add_argument("--lossless-coder", type=int, default=1)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode an .hll stream")
    p.add_argument("--input", required=True, help="input .hll stream")
    p.add_argument("--sdr", help="write the base-layer image as binary PPM")
    p.add_argument("--hdr", help="write the lossless reconstruction as .hdr")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("inspect", help="describe an .hll stream or .hdr file")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("bench", help="rate/time benchmark over a corpus directory")
    p.add_argument("--corpus", required=True, help="directory of .hdr files")
    p.add_argument("--modes", default="no-slrme,slrme,global-slrme")
    p.add_argument("--quality", type=int, default=85)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--out", default="results.csv", help="output CSV path")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("make-corpus", help="generate the synthetic test corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=256)
    p.set_defaults(func=cmd_make_corpus)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "decode" and not (args.sdr or args.hdr):
        parser.error("decode requires --sdr and/or --hdr")
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single-line CLI diagnostics
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
