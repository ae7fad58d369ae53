"""
From capital-output coefficients to substitution elasticities
=============================================================

"""

from labshare.elasticity import (
    ETA_W,
    capital_labor_elasticity,
    classify_technical_progress,
    load_published_coefficients,
    published_report,
)

print(f"sigma = 1 + beta_k * eta_w, eta_w = {ETA_W}")
for beta in (0.0, -0.383, -0.323, -0.482):
    print(f"beta_k {beta:+.3f} -> sigma {capital_labor_elasticity(beta):.4f}")

print()
published = load_published_coefficients()
for name, block in published.items():
    rep = published_report(name)
    print(f"{name:<28} range {rep.rounded_range()}  excludes 1: {rep.cobb_douglas_excluded}")
    b_k, _, p_k, _ = block["ln_k"][0]
    b_t, _, p_t, _ = block["ln_tfp"][0]
    print(f"{'':<28} first column: {classify_technical_progress(b_t, b_k, p_t, p_k)}")
