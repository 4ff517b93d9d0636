"""Acceptance criteria, one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines as they
complete.  The corpus is the deterministic 12-image 256x256 synthetic set.
"""

import csv
import hashlib
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from hdll import container
from hdll.cli import main as cli_main
from hdll.container import (
    DualLayerStream,
    decode_hdr,
    decode_sdr,
    deserialize,
    encode,
    section_sizes,
    serialize,
)
from hdll.corpus import MULTI_EXPONENT_PREFIXES
from hdll.estimator import fit_region
from hdll.radiance_io import read_hdr_file
from hdll.rgbe import float_to_rgbe, rgbe_to_float
from reference import normal_equations_fit, squared_error

FIXTURE_DIR = Path(__file__).parent / "fixtures"

QUALITIES = (30, 85, 100)
SIGMAS = (0.0, 1.0)
MODES = {
    "no-slrme": dict(slrme=False),
    "slrme": dict(slrme=True),
    "global-slrme": dict(slrme=True, global_regression=True),
}


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _enhancement_bytes(stream: DualLayerStream) -> int:
    sizes = section_sizes(stream)
    table_bytes = len(stream.regression_table) * container._ENTRY_SIZE + 2
    return (
        sizes["exponent"]
        + sizes["residual_r"]
        + sizes["residual_g"]
        + sizes["residual_b"]
        + table_bytes
    )


@pytest.fixture(scope="module")
def corpus_images(acceptance_corpus):
    return [(p.stem, read_hdr_file(p)) for p in acceptance_corpus]


@pytest.fixture(scope="module")
def rate_time_records(corpus_images):
    """Timed slrme vs no-slrme encodes at Q=85, sigma=1 (criteria 4 and 5)."""
    # warm the JIT kernels before any timed run
    encode(corpus_images[0][1], quality=85, sigma=1.0)
    records = []
    for name, image in corpus_images:
        row = {"image": name}
        for mode in ("no-slrme", "slrme"):
            t0 = time.perf_counter()
            stream = encode(image, quality=85, sigma=1.0, **MODES[mode])
            row[f"encode_s_{mode}"] = time.perf_counter() - t0
            assert decode_hdr(stream) == image, (name, mode)
            row[f"enh_bytes_{mode}"] = _enhancement_bytes(stream)
            row[f"bpp_{mode}"] = container.bitrate_bpp(stream)
        records.append(row)
    return records


def test_criterion_1_lossless_roundtrip(corpus_images):
    """Every corpus image round-trips exactly for all Q/sigma/mode combos."""
    start = time.perf_counter()
    runs = 0
    for name, image in corpus_images:
        for quality in QUALITIES:
            for sigma in SIGMAS:
                for mode, kwargs in MODES.items():
                    stream = encode(image, quality=quality, sigma=sigma, **kwargs)
                    decoded = decode_hdr(stream)
                    assert decoded == image, (name, quality, sigma, mode)
                    assert decoded.header_vars == image.header_vars
                    runs += 1
    elapsed = time.perf_counter() - start
    assert runs == len(corpus_images) * len(QUALITIES) * len(SIGMAS) * len(MODES)
    print(f"\nACCEPTANCE 1 lossless round-trip: PASS ({runs} runs exact, {elapsed:.0f}s)")


def test_criterion_2_rgbe_reversibility():
    """Exhaustive canonical grid round-trips exactly."""
    m_max = np.arange(128, 256, dtype=np.int64)
    exponents = np.arange(1, 255, dtype=np.int64)
    total = 0
    for other_rule in ("zero", "64", "127", "max"):
        others = {"zero": np.zeros_like(m_max), "64": np.full_like(m_max, 64),
                  "127": np.full_like(m_max, 127), "max": m_max}[other_rule]
        mm, ee = np.meshgrid(np.arange(m_max.size), exponents, indexing="ij")
        for pos in range(3):
            quads = np.empty((m_max.size, exponents.size, 4), dtype=np.uint8)
            for c in range(3):
                quads[..., c] = (m_max if c == pos else others)[mm]
            quads[..., 3] = ee
            assert (float_to_rgbe(rgbe_to_float(quads)) == quads).all(), (other_rule, pos)
            total += quads.size // 4
    print(f"ACCEPTANCE 2 RGBE reversibility: PASS ({total} canonical pixels exact)")


def test_criterion_3_regression_oracle_equivalence():
    """fit_region matches the brute-force oracle and is a local minimum."""
    rng = np.random.default_rng(42)
    sizes = rng.integers(1, 10_001, size=1000)
    checked_minimum = 0
    for i, n in enumerate(sizes):
        x = rng.uniform(0.0, 255.0, int(n))
        y = rng.integers(0, 256, int(n)).astype(np.float64)
        a, b = fit_region(x, y)
        ao, bo = normal_equations_fit(x, y)
        assert math.isclose(a, ao, rel_tol=1e-9, abs_tol=1e-12), (i, n)
        assert math.isclose(b, bo, rel_tol=1e-9, abs_tol=1e-12), (i, n)
        if i % 20 == 0:
            base = squared_error(x, y, a, b)
            tol = 1e-9 * max(base, 1.0)
            for da in (-1e-3, 0.0, 1e-3):
                for db in (-1e-3, 0.0, 1e-3):
                    assert squared_error(x, y, a + da, b + db) >= base - tol
            checked_minimum += 1
    print(
        "ACCEPTANCE 3 regression oracle equivalence: PASS "
        f"(1000 regions, {checked_minimum} perturbation checks)"
    )


def test_criterion_4_slrme_rate_benefit(rate_time_records):
    """Enhancement bytes strictly shrink with the estimator on >= 90% of the
    multi-exponent corpus, and the average total bpp is lower."""
    multi = [
        r for r in rate_time_records if r["image"].startswith(MULTI_EXPONENT_PREFIXES)
    ]
    wins = sum(r["enh_bytes_slrme"] < r["enh_bytes_no-slrme"] for r in multi)
    assert wins >= math.ceil(0.9 * len(multi)), f"{wins}/{len(multi)}"
    avg_with = np.mean([r["bpp_slrme"] for r in rate_time_records])
    avg_without = np.mean([r["bpp_no-slrme"] for r in rate_time_records])
    assert avg_with < avg_without
    print(
        f"ACCEPTANCE 4 SLRME rate benefit: PASS ({wins}/{len(multi)} images win, "
        f"avg bpp {avg_with:.3f} vs {avg_without:.3f})"
    )


def test_criterion_5_slrme_overhead_bound(rate_time_records):
    """Average slrme encode time is at most 1.5x the no-slrme time."""
    t_with = np.mean([r["encode_s_slrme"] for r in rate_time_records])
    t_without = np.mean([r["encode_s_no-slrme"] for r in rate_time_records])
    ratio = t_with / t_without
    assert ratio <= 1.5, f"overhead ratio {ratio:.3f}"
    print(
        f"ACCEPTANCE 5 SLRME overhead bound: PASS "
        f"(avg {t_with * 1000:.0f} ms vs {t_without * 1000:.0f} ms, ratio {ratio:.2f})"
    )


def test_criterion_6_image_selectivity(corpus_images):
    """SDR decoding works on enhancement-truncated streams, matches the
    encoder-side S bit-exactly, and consumes no enhancement bytes."""

    class Poison:
        def __getattr__(self, name):
            raise AssertionError(f"enhancement bytes consumed via {name}")

        def __len__(self):
            raise AssertionError("enhancement bytes consumed via len")

        def __getitem__(self, item):
            raise AssertionError("enhancement bytes consumed via indexing")

    checked = 0
    for name, image in corpus_images[:4]:
        trace: dict = {}
        stream = encode(image, trace=trace)
        blob = serialize(stream)
        sizes = section_sizes(stream)
        truncated = deserialize(blob[: sizes["header"] + sizes["base"]])
        assert truncated.sdr_only
        assert decode_sdr(truncated) == trace["s"], name

        poisoned = DualLayerStream(
            width=stream.width, height=stream.height, slrme=stream.slrme,
            lossy_spec=stream.lossy_spec, lossless_spec=stream.lossless_spec,
            sigma_milli=stream.sigma_milli, tmo_record=stream.tmo_record,
            regression_table=stream.regression_table, header_vars=stream.header_vars,
            resolution_orientation=stream.resolution_orientation,
            base_payload=stream.base_payload,
            e_payload=Poison(), residual_payloads=Poison(),
        )
        assert decode_sdr(poisoned) == trace["s"], name
        checked += 1
    print(f"ACCEPTANCE 6 image selectivity: PASS ({checked} streams, S bit-exact)")


def test_criterion_7_decoder_parameter_reuse(corpus_images):
    """Decoder-side M* equals encoder-side M* bit-exactly, in-process and
    against the digests frozen in the fixtures."""
    compared = 0
    for name, image in corpus_images:
        for sigma in SIGMAS:
            enc_trace: dict = {}
            stream = encode(image, sigma=sigma, trace=enc_trace)
            dec_trace: dict = {}
            assert decode_hdr(stream, trace=dec_trace) == image
            for enc_p, dec_p in zip(enc_trace["m_star"], dec_trace["m_star"]):
                assert (enc_p == dec_p).all(), (name, sigma)
            compared += 1

    manifest = json.loads((FIXTURE_DIR / "fixtures.json").read_text())
    for stem, expect in manifest["streams"].items():
        stream = deserialize((FIXTURE_DIR / f"{stem}.hll").read_bytes())
        dec_trace = {}
        decode_hdr(stream, trace=dec_trace)
        digest = _sha(b"".join(p.tobytes() for p in dec_trace["m_star"]))
        assert digest == expect["m_star_sha256"], stem
    print(
        f"ACCEPTANCE 7 decoder parameter reuse: PASS "
        f"({compared} in-process runs, {len(manifest['streams'])} fixture digests)"
    )


def test_criterion_8_bitstream_stability():
    """Golden fixtures decode byte-identically; serialize/deserialize is the
    identity on every fixture."""
    manifest = json.loads((FIXTURE_DIR / "fixtures.json").read_text())
    assert len(manifest["streams"]) == 6  # three images x two modes
    for stem, expect in manifest["streams"].items():
        blob = (FIXTURE_DIR / f"{stem}.hll").read_bytes()
        assert _sha(blob) == expect["stream_sha256"], stem
        stream = deserialize(blob)
        assert serialize(stream) == blob, stem
        decoded = decode_hdr(stream)
        assert _sha(decoded.pixels.tobytes()) == expect["hdr_pixels_sha256"], stem
        assert decoded == read_hdr_file(FIXTURE_DIR / expect["image"]), stem
        sdr = decode_sdr(stream)
        assert _sha(sdr.as_array().tobytes()) == expect["sdr_sha256"], stem
    print("ACCEPTANCE 8 bitstream stability: PASS (6 fixtures byte-exact)")


def test_criterion_9_bench_table_structure(acceptance_corpus, tmp_path):
    """The bench harness reproduces the per-image/per-mode bpp + averages +
    times table structure from a corpus directory.  Absolute paper bitrates
    are out of scope by design."""
    subset = tmp_path / "subset"
    subset.mkdir()
    for p in acceptance_corpus[:3]:
        (subset / p.name).write_bytes(p.read_bytes())
    out = tmp_path / "table.csv"
    code = cli_main(
        ["bench", "--corpus", str(subset), "--modes", "no-slrme,slrme,global-slrme",
         "--quality", "85", "--out", str(out)]
    )
    assert code == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    modes = {"no-slrme", "slrme", "global-slrme"}
    body = rows[:-1]
    assert len(body) == 3 * 3
    assert {r["mode"] for r in body} == modes
    assert rows[-1]["image_id"] == "average"
    for col in ("bpp_total", "bpp_base", "bpp_enh", "encode_ms", "decode_ms"):
        recomputed = np.mean([float(r[col]) for r in body])
        assert np.isclose(float(rows[-1][col]), recomputed), col
    assert all(r["lossless_ok"] == "True" for r in rows)
    print("ACCEPTANCE 9 bench table structure: PASS (9 rows + averages, times included)")
