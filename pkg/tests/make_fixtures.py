#!/usr/bin/env python3
"""Regenerate the golden bitstream fixtures under tests/fixtures/.

Run from the repository root after an intentional format change:

    python tests/make_fixtures.py

Commits three corpus images (.hdr), six encoded streams (.hll: two modes per
image), and fixtures.json with SHA-256 digests of the stream bytes, the
decoded HDR pixels, the decoded SDR planes, and the encoder-side estimated
mantissa planes M*.
"""

from __future__ import annotations

import hashlib
import json
import sys
import tempfile
from pathlib import Path

FIXTURE_DIR = Path(__file__).parent / "fixtures"
IMAGE_NAMES = ("gradient_00", "steps_00", "affine_00")
MODES = {"slrme": dict(slrme=True), "noslrme": dict(slrme=False)}
SEED = 123
SIZE = 96


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def main() -> int:
    from hdll import container
    from hdll.corpus import make_corpus
    from hdll.radiance_io import read_hdr_file

    FIXTURE_DIR.mkdir(exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        make_corpus(tmp, seed=SEED, size=SIZE)
        manifest: dict = {"seed": SEED, "size": SIZE, "streams": {}}
        for name in IMAGE_NAMES:
            src = Path(tmp) / f"{name}.hdr"
            (FIXTURE_DIR / f"{name}.hdr").write_bytes(src.read_bytes())
            image = read_hdr_file(src)
            for mode, kwargs in MODES.items():
                trace: dict = {}
                stream = container.encode(image, trace=trace, **kwargs)
                blob = container.serialize(stream)
                decoded = container.decode_hdr(stream)
                assert decoded == image, (name, mode)
                stem = f"{name}.{mode}"
                (FIXTURE_DIR / f"{stem}.hll").write_bytes(blob)
                manifest["streams"][stem] = {
                    "image": f"{name}.hdr",
                    "stream_sha256": _sha(blob),
                    "hdr_pixels_sha256": _sha(decoded.pixels.tobytes()),
                    "sdr_sha256": _sha(container.decode_sdr(stream).as_array().tobytes()),
                    "m_star_sha256": _sha(b"".join(p.tobytes() for p in trace["m_star"])),
                }
        (FIXTURE_DIR / "fixtures.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {len(manifest['streams'])} fixtures to {FIXTURE_DIR}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
