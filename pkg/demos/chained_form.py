"""
Chained form, round trip through the command line
=================================================

"""

import subprocess
import sys
import tempfile
from pathlib import Path

from flatcheck.cli import load_system
from flatcheck.fixtures import path
from flatcheck.flatness import candidate_sequence, check_theorem1

# The chained system ends in the second terminal case: the last
# distribution is not involutive and its Cauchy characteristic has corank 3.
sf = load_system(path("chained"))
rep = candidate_sequence(sf.sys)
print("case", rep.case, "corank", rep.terminal_corank, "pool", rep.pool)

# Ask the CLI for the normal form and save the transformed system.
out = Path(tempfile.mkdtemp()) / "chained_nf.sys"
proc = subprocess.run([sys.executable, "-m", "flatcheck", "normalform", str(path("chained")), "-o", str(out)],
                      capture_output=True, text=True)
print(proc.stdout)

# Feed it back in: the candidate (z1, z2) is written into the file, and the
# transformed system passes the same check.
back = load_system(out)
print("re-ingested verdict:", check_theorem1(back.sys, back.candidate).verdict)
