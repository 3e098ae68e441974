"""Regenerate the CSV fixtures used by the data tests.

Run: ``python tests/oracles/make_fixtures.py``. The 1,130-row campaign file
comes from the synthetic generator (no images) and is frozen on disk so the
ingestion tests do not depend on generator changes.
"""
from pathlib import Path

from mrtforge.data import write_csv
from mrtforge.synth import synth_generate

HERE = Path(__file__).resolve().parent.parent / "fixtures"

if __name__ == "__main__":
    ds, _, _ = synth_generate(1130, seed=2018, face_size=None)
    write_csv(HERE / "campaign_1130.csv", ds.records)
    print(ds.summary())
