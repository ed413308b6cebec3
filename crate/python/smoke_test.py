#!/usr/bin/env python3
"""Smoke test for the stega_py extension module.

Builds the cdylib with cargo, imports it, and exercises a full
catalog -> embed -> extract round trip plus the metric helpers.
"""

import shutil
import subprocess
import sys
import sysconfig
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent


def build_extension(workdir: Path) -> None:
    subprocess.run(
        ["cargo", "build", "-p", "stega-py"],
        cwd=REPO_ROOT,
        check=True,
    )
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    shutil.copy(
        REPO_ROOT / "target" / "debug" / "libstega_py.so",
        workdir / f"stega_py{suffix}",
    )
    sys.path.insert(0, str(workdir))


def main() -> int:
    workdir = Path(tempfile.mkdtemp(prefix="stega-py-"))
    build_extension(workdir)
    import stega_py

    key = stega_py.generate_key()
    assert len(key) == 16 and key == key.lower(), key

    catalog = stega_py.build_catalog("Entertainment News")
    assert catalog.version == 1
    assert len(catalog.fingerprint) == 64
    subjects = catalog.keywords("subject")
    assert len(subjects) == 16
    assert abs(sum(p for _, p in subjects) - 1.0) < 1e-9

    catalog_path = workdir / "catalog.json"
    catalog.save(catalog_path)
    reloaded = stega_py.Catalog.load(catalog_path)
    assert reloaded.fingerprint == catalog.fingerprint

    payload = b"the parcel is under the third bench"
    envelope_path = workdir / "envelopes.jsonl"
    report = stega_py.embed(payload, key, catalog, envelope_path, seed=42)
    assert report["sentences"] == stega_py.sentence_count(len(payload))
    assert report["embedded_bits"] == 64 * report["sentences"]
    assert report["capacity_bpw"] > 0

    recovered = stega_py.extract(envelope_path, key, reloaded, seed=42)
    assert recovered == payload, recovered

    wrong_key = ("0" * 15 + "1") if key != "0" * 15 + "1" else "0" * 15 + "2"
    try:
        mismatch = stega_py.extract(envelope_path, wrong_key, catalog, seed=42)
    except RuntimeError:
        pass
    else:
        assert mismatch != payload, "wrong key silently decoded"

    assert stega_py.embedding_capacity(64, 16) == 4.0
    assert abs(stega_py.accuracy(515, 516, 484, 485) - 0.5155) < 1e-12
    rows = [[0.5, 1.5], [1.0, 2.5], [2.0, 3.0]]
    assert stega_py.kld(rows, rows) == 0.0
    ppl = stega_py.perplexity("the cat sat", "the cat sat\nthe dog sat\n", order=2)
    assert ppl > 1.0

    shutil.rmtree(workdir, ignore_errors=True)
    print("smoke test ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
