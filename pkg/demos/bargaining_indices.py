"""
Qualitative bargaining indices from coded legal provisions
==========================================================

"""

from labshare.irlex import INDEX_IDS, audit, build_all_indices, format_audit, load_codebook
from labshare.synth import synthetic_codes

codebook = load_codebook()
for idx in INDEX_IDS:
    members = codebook.members(idx)
    print(f"{idx}: " + ", ".join(f"{m.name} (0..{m.max_code})" for m in members))

# every provision code is rescaled to 1..6 (0 stays 0) and averaged per index
countries = synthetic_codes(40, seed=3)
indices = build_all_indices(countries, codebook)
first = countries[0]
print()
print(first.country, first.codes)
print(indices[first.country])
print()
print(format_audit(audit(countries, indices, codebook)))
