"""
Shielded vs naive rendering of the same scene
=============================================

One scene spec, two renderers.  The naive renderer paints texture over the
whole object mask, so texture edges sit right on the object boundary.  The
shielded renderer wraps the texture in a constant shell and a constant gap,
so every boundary voxel sees a flat neighbourhood.
"""

import numpy as np

from boundsafe import GenConfig, bsr_map, render, sample_scene
from boundsafe.composer import stratum_map
from boundsafe.shielding import Stratum

cfg = GenConfig(domain_shape=(64, 64, 64), size_range=(10, 28))
# first scene whose objects all carry a textured core
spec = next(sp for sp in (sample_scene(0, i, cfg) for i in range(100))
            if all(o.inner_primitive is not None for o in sp.objects))
print(f"{len(spec.objects)} object(s), background intensity {spec.mu_bg:.3f}")

shielded = render(spec)
naive = render(spec.with_mode("naive"))

# Same geometry, same labels; only the intensities differ.
assert np.array_equal(shielded.instance_labels, naive.instance_labels)

strata, core_owner = stratum_map(shielded)
for s in Stratum:
    print(f"  {s.name.lower():<11} {np.count_nonzero(strata == s):>7} voxels")
print(f"  textured core voxels: {np.count_nonzero(core_owner)}")

# Boundary saliency ratio: squared edge contrast over expected squared texture gradient.
for name, sample in (("shielded", shielded), ("naive", naive)):
    r = bsr_map(sample, epsilon=1e-6, mc_realizations=8)
    s = r.summary
    print(f"{name:>9}: median BSR {s['bsr_median']:.4g}, min {s['bsr_min']:.4g}, "
          f"aliased fraction {s['frac_aliased']:.2f}, max gap gradient {s['gap_gradient_max']}")

# A mid-volume line profile through the first object shows the layered structure.
c = np.round(spec.objects[0].primitive.center).astype(int)
row = shielded.image[:, c[1], c[2]]
print("shielded profile:", " ".join(f"{v:.2f}" for v in row[::3]))
print("naive profile:   ", " ".join(f"{v:.2f}" for v in naive.image[::3, c[1], c[2]]))
