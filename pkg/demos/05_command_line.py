"""
Files and the command line
==========================

The ``mmiva`` command writes every artifact to disk: scenario JSON,
multichannel WAV, per-iteration CSV logs and a JSON summary. This script
drives it in-process; the same arguments work from a shell.
"""

import json
import tempfile
from pathlib import Path

from mmiva.cli import main
from mmiva.experiment import RunRecord
from mmiva.wavio import read_wav

work = Path(tempfile.mkdtemp())

# a synthetic scenario with its mixture and reference images
main(["synth", "--m", "2", "--duration", "6", "--seed", "5", "--out", str(work / "synth")])
print(sorted(p.name for p in (work / "synth").iterdir()))
print("mixture:", read_wav(work / "synth" / "mixture.wav").samples.shape)

# separate the WAV file; references enable the dSDR column
main([
    "separate",
    "--config", str(work / "synth" / "config.json"),
    "--input", str(work / "synth" / "mixture.wav"),
    "--references", str(work / "synth" / "references.wav"),
    "--solver", "iss2",
    "--iters", "20",
    "--out", str(work / "sep"),
])
cols = RunRecord.read_csv(work / "sep" / "run.csv")
print("dSDR by iteration:", [round(float(v), 2) for v in cols["delta_sdr_db"][::5]])
print("summary keys:", sorted(json.loads((work / "sep" / "run.json").read_text())["runs"][0]))

# a small scaling run
main(["scaling", "--m-list", "4,8,32", "--n", "128", "--K", "4", "--reps", "3", "--out", str(work / "scaling")])
print((work / "scaling" / "scaling.csv").read_text().splitlines()[:3])
