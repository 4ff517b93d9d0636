import csv

import numpy as np
import pytest

from hdll import container
from hdll.cli import main
from hdll.radiance_io import read_hdr_file
from hdll.tonemap import SdrImage


@pytest.fixture()
def hdr_path(mini_corpus):
    return next(p for p in mini_corpus if p.stem == "gradient_00")


def read_ppm(path) -> SdrImage:
    data = path.read_bytes()
    magic, dims, maxval, raster = data.split(b"\n", 3)
    assert magic == b"P6" and maxval == b"255"
    w, h = map(int, dims.split())
    arr = np.frombuffer(raster, np.uint8, count=w * h * 3).reshape(h, w, 3)
    return SdrImage.from_array(arr)


class TestEncodeDecode:
    def test_encode_decode_roundtrip(self, hdr_path, tmp_path, capsys):
        out = tmp_path / "x.hll"
        assert main(["encode", "--input", str(hdr_path), "--output", str(out)]) == 0
        summary = capsys.readouterr().out
        assert "bpp" in summary and "ms" in summary
        hdr_out = tmp_path / "x.hdr"
        sdr_out = tmp_path / "x.ppm"
        code = main(["decode", "--input", str(out), "--hdr", str(hdr_out),
                     "--sdr", str(sdr_out)])
        assert code == 0
        assert read_hdr_file(hdr_out) == read_hdr_file(hdr_path)
        stream = container.deserialize(out.read_bytes())
        assert read_ppm(sdr_out) == container.decode_sdr(stream)

    def test_default_quality_85(self, hdr_path, tmp_path):
        out = tmp_path / "x.hll"
        main(["encode", "--input", str(hdr_path), "--output", str(out)])
        stream = container.deserialize(out.read_bytes())
        assert stream.lossy_spec.quality == 85
        assert stream.slrme and len(stream.regression_table) > 0

    def test_no_slrme_flag(self, hdr_path, tmp_path):
        out = tmp_path / "x.hll"
        main(["encode", "--input", str(hdr_path), "--output", str(out), "--no-slrme"])
        stream = container.deserialize(out.read_bytes())
        assert not stream.slrme
        assert len(stream.regression_table) == 0

    def test_global_slrme_flag(self, hdr_path, tmp_path):
        out = tmp_path / "x.hll"
        main(["encode", "--input", str(hdr_path), "--output", str(out), "--global-slrme"])
        stream = container.deserialize(out.read_bytes())
        table = stream.regression_table
        assert stream.slrme
        for ch in range(3):
            pairs = {(e.a, e.b) for e in table.entries if e.channel == ch}
            assert len(pairs) == 1  # one whole-plane fit shared by all exponents

    def test_decode_requires_an_output(self, hdr_path, tmp_path, capsys):
        out = tmp_path / "x.hll"
        main(["encode", "--input", str(hdr_path), "--output", str(out)])
        with pytest.raises(SystemExit) as exc:
            main(["decode", "--input", str(out)])
        assert exc.value.code == 2

    def test_sdr_only_decode_of_truncated_stream(self, hdr_path, tmp_path):
        out = tmp_path / "x.hll"
        main(["encode", "--input", str(hdr_path), "--output", str(out)])
        stream = container.deserialize(out.read_bytes())
        sizes = container.section_sizes(stream)
        cut = tmp_path / "cut.hll"
        cut.write_bytes(out.read_bytes()[: sizes["header"] + sizes["base"]])
        sdr_out = tmp_path / "cut.ppm"
        assert main(["decode", "--input", str(cut), "--sdr", str(sdr_out)]) == 0
        assert read_ppm(sdr_out) == container.decode_sdr(stream)
        assert main(["decode", "--input", str(cut), "--hdr", str(tmp_path / "no.hdr")]) == 1

    def test_missing_input_is_exit_1(self, tmp_path, capsys):
        code = main(["encode", "--input", str(tmp_path / "nope.hdr"),
                     "--output", str(tmp_path / "x.hll")])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_corrupt_stream_is_exit_1(self, hdr_path, tmp_path, capsys):
        out = tmp_path / "x.hll"
        main(["encode", "--input", str(hdr_path), "--output", str(out)])
        blob = bytearray(out.read_bytes())
        blob[len(blob) // 2] ^= 0x40
        bad = tmp_path / "bad.hll"
        bad.write_bytes(bytes(blob))
        assert main(["decode", "--input", str(bad), "--hdr", str(tmp_path / "y.hdr")]) == 1


class TestInspect:
    def test_inspect_hll_sections_sum_to_file_size(self, hdr_path, tmp_path, capsys):
        out = tmp_path / "x.hll"
        main(["encode", "--input", str(hdr_path), "--output", str(out)])
        assert main(["inspect", "--input", str(out)]) == 0
        text = capsys.readouterr().out
        sizes = {}
        for line in text.splitlines():
            if line.strip().startswith("section "):
                name, size = line.split("section ")[1].split(": ")
                sizes[name] = int(size.split()[0])
        assert sum(sizes.values()) == out.stat().st_size

    def test_inspect_hdr_histogram(self, hdr_path, capsys):
        assert main(["inspect", "--input", str(hdr_path)]) == 0
        text = capsys.readouterr().out
        img = read_hdr_file(hdr_path)
        distinct = np.unique(img.pixels[..., 3]).size
        assert f"({distinct} distinct values)" in text
        assert text.count("    E=") == distinct

    def test_slrme_entry_count_divisible_by_3(self, hdr_path, tmp_path, capsys):
        out = tmp_path / "x.hll"
        main(["encode", "--input", str(hdr_path), "--output", str(out)])
        stream = container.deserialize(out.read_bytes())
        assert len(stream.regression_table) % 3 == 0

    def test_inspect_unreadable_is_exit_1(self, tmp_path, capsys):
        assert main(["inspect", "--input", str(tmp_path / "ghost.hll")]) == 1


class TestBench:
    def test_bench_csv_structure(self, mini_corpus, tmp_path, capsys):
        out = tmp_path / "results.csv"
        corpus_dir = mini_corpus[0].parent
        code = main(["bench", "--corpus", str(corpus_dir),
                     "--modes", "no-slrme,slrme", "--out", str(out)])
        assert code == 0
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        n_images = len(mini_corpus)
        assert len(rows) == 2 * n_images + 1
        assert rows[-1]["image_id"] == "average"
        body = rows[:-1]
        assert all(r["lossless_ok"] == "True" for r in rows)
        for r in body:
            assert float(r["bpp_total"]) >= float(r["bpp_base"])
            entries = int(r["table_entries"])
            assert (entries > 0) == (r["mode"] == "slrme")
        # averages row recomputes exactly from the body rows
        for col in ("bpp_total", "bpp_base", "bpp_enh", "encode_ms", "decode_ms"):
            expect = np.mean([float(r[col]) for r in body])
            assert np.isclose(float(rows[-1][col]), expect)
        text = capsys.readouterr().out
        assert "encode-time overhead" in text

    def test_bench_rejects_unknown_mode(self, mini_corpus, tmp_path):
        corpus_dir = mini_corpus[0].parent
        code = main(["bench", "--corpus", str(corpus_dir), "--modes", "frobnicate",
                     "--out", str(tmp_path / "r.csv")])
        assert code == 1

    def test_bench_empty_corpus_fails(self, tmp_path):
        code = main(["bench", "--corpus", str(tmp_path), "--out", str(tmp_path / "r.csv")])
        assert code == 1


class TestMakeCorpus:
    def test_same_seed_identical_bytes(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        assert main(["make-corpus", "--out", str(a), "--seed", "4", "--size", "32"]) == 0
        assert main(["make-corpus", "--out", str(b), "--seed", "4", "--size", "32"]) == 0
        for pa, pb in zip(sorted(a.glob("*.hdr")), sorted(b.glob("*.hdr"))):
            assert pa.read_bytes() == pb.read_bytes()

    def test_gradient_spans_six_exponents(self, tmp_path):
        main(["make-corpus", "--out", str(tmp_path / "c"), "--size", "64"])
        img = read_hdr_file(tmp_path / "c" / "gradient_00.hdr")
        assert np.unique(img.pixels[..., 3]).size >= 6

    def test_corpus_decodes_losslessly_under_all_modes(self, tmp_path):
        main(["make-corpus", "--out", str(tmp_path / "c"), "--size", "24"])
        img = read_hdr_file(tmp_path / "c" / "steps_00.hdr")
        for kwargs in (dict(slrme=True), dict(slrme=False),
                       dict(slrme=True, global_regression=True)):
            assert container.decode_hdr(container.encode(img, **kwargs)) == img
