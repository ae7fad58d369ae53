"""
End to end: synthetic fixtures to regression tables
===================================================

"""

import os
import tempfile

from labshare.cli import main

work = tempfile.mkdtemp(prefix="labshare-")
print("working in", work)

# the same steps as the command line: labshare synth / derive / index / estimate
main(["synth", "-o", work])
main(["derive", os.path.join(work, "unido.csv"), "-o", os.path.join(work, "derived.csv")])
main(["index", os.path.join(work, "irlex_codes.csv"), "-o", os.path.join(work, "indices.csv")])
main(["estimate", os.path.join(work, "config.yaml"), "-o", os.path.join(work, "tables"), "--unicode-minus"])

with open(os.path.join(work, "tables", "panel_all.txt"), encoding="utf-8") as f:
    print(f.read())
