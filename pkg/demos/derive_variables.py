"""
Deriving regression variables from an industry panel
=====================================================

"""

import numpy as np

from labshare.core import PanelFrame
from labshare.derive import derive_panel, tfp

# a small panel: two country-industry pairs, one with a gap year and one
# with a non-positive wage bill
raw = PanelFrame(
    ["MKD"] * 4 + ["POL"] * 3,
    ["15", "15", "15", "15", "24", "24", "24"],
    [2016, 2017, 2018, 2020, 2016, 2017, 2018],
    {
        "wages": [30, 33, 36, 40, 10, 0, 12],
        "value_added": [100, 110, 120, 125, 50, 60, 64],
        "output": [300, 310, 330, 340, 150, 160, 170],
        "gfcf": [20, 25, 30, 35, 6, 8, 9],
        "employment": [100, 110, 121, 130, 40, 44, 45],
    },
)

derived, provenance = derive_panel(raw, alpha=1 / 3)
print("provenance:", provenance)
for var in ("ln_labor_share", "ln_k", "ln_tfp", "dln_n"):
    print(f"{var:>15}", np.round(derived.column(var), 4))

# the growth-accounting residual recomposes value added exactly
level = tfp(120.0, 121.0, 30.0, 1 / 3)
print("tfp * k^a * n^(1-a) =", level * 30.0 ** (1 / 3) * 121.0 ** (2 / 3))

# a pair-specific capital elasticity taken from the average labor share
by_share, provenance = derive_panel(raw, alpha="labor_share")
print("alpha by pair:", np.round(by_share.column("alpha"), 3), provenance["alpha"])
